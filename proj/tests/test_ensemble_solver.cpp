#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "uqgroup/ensemble_solver.hpp"
#include "uqgroup/errors.hpp"

using namespace uqgroup;

namespace {

EnsembleCsrMatrix pack(const std::vector<oracle::Csr>& lanes) {
  const auto& first = lanes.front();
  EnsembleCsrMatrix a(first.offsets, first.cols, lanes.size());
  for (std::size_t k = 0; k < first.cols.size(); ++k) {
    for (std::size_t s = 0; s < lanes.size(); ++s) a.entry(k)[s] = lanes[s].vals[k];
  }
  return a;
}

// 1D Laplacian tridiagonal pattern.
oracle::Csr tridiag(std::size_t n, double diag) {
  oracle::Csr a;
  a.n = n;
  a.offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      a.cols.push_back(i - 1);
      a.vals.push_back(-1.0);
    }
    a.cols.push_back(i);
    a.vals.push_back(diag);
    if (i + 1 < n) {
      a.cols.push_back(i + 1);
      a.vals.push_back(-1.0);
    }
    a.offsets.push_back(a.cols.size());
  }
  return a;
}

}  // namespace

TEST_CASE("ensemble scalar is lane-wise") {
  EnsembleScalar a(std::vector<double>{1.0, 2.0, 3.0});
  EnsembleScalar b(std::vector<double>{4.0, 5.0, 6.0});
  const auto c = a * b + a;
  CHECK(c[0] == 5.0);
  CHECK(c[1] == 12.0);
  CHECK(c[2] == 21.0);
  CHECK_THROWS_AS(a + EnsembleScalar(2), DomainError);
}

TEST_CASE("spmv matches per-lane products") {
  // [[2,-1],[-1,2]] and [[4,-1],[-1,4]], x = [1,1] in both lanes.
  EnsembleCsrMatrix a({0, 2, 4}, {0, 1, 0, 1}, 2);
  const double v[4][2] = {{2, 4}, {-1, -1}, {-1, -1}, {2, 4}};
  for (std::size_t k = 0; k < 4; ++k) {
    a.entry(k)[0] = v[k][0];
    a.entry(k)[1] = v[k][1];
  }
  EnsembleVector x(2, 2, 1.0);
  const auto y = spmv(a, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(1, 0) == 1.0);
  CHECK(y(0, 1) == 3.0);
  CHECK(y(1, 1) == 3.0);

  std::mt19937_64 rng(11);
  const auto p = oracle::random_pattern(40, 6, rng);
  std::vector<oracle::Csr> lanes;
  for (int s = 0; s < 4; ++s) lanes.push_back(oracle::random_spd(p, 0.1 * s, rng));
  const auto ea = pack(lanes);
  std::uniform_real_distribution<double> u(-1, 1);
  EnsembleVector ex(40, 4);
  for (auto& d : ex.data()) d = u(rng);
  const auto ey = spmv(ea, ex);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto xs = ex.lane(s);
    for (std::size_t i = 0; i < 40; ++i) {
      double ref = 0.0;
      for (std::size_t k = p.offsets[i]; k < p.offsets[i + 1]; ++k) ref += lanes[s].vals[k] * xs[p.cols[k]];
      CHECK(ey(i, s) == ref);
    }
  }
}

TEST_CASE("lane dots keep lanes separate") {
  EnsembleVector x(3, 2);
  x.set_lane(0, std::vector<double>{1, 2, 3});
  x.set_lane(1, std::vector<double>{0, 0, 2});
  const auto d = lane_dots(x, x);
  CHECK(d[0] == 14.0);
  CHECK(d[1] == 4.0);
  CHECK(lane_norms(x)[1] == 2.0);
}

TEST_CASE("identical lanes give identical counts") {
  const auto a1 = tridiag(50, 2.5);
  const auto ea = pack({a1, a1, a1, a1});
  EnsembleVector b(50, 4, 1.0);
  const auto res = ensemble_pcg(ea, b, jacobi_precond(ea));
  for (int s = 1; s < 4; ++s) CHECK(res.iterations_per_lane[s] == res.iterations_per_lane[0]);
  CHECK(res.ensemble_iterations == res.iterations_per_lane[0]);
}

TEST_CASE("ensemble count is the lane maximum and lanes match scalar PCG") {
  const auto easy = tridiag(60, 4.0);
  const auto hard = tridiag(60, 2.0001);
  const auto ea = pack({easy, hard});
  EnsembleVector b(60, 2, 1.0);
  const auto res = ensemble_pcg(ea, b, jacobi_precond(ea));
  const auto o_easy = oracle::scalar_pcg(easy, std::vector<double>(60, 1.0), 1e-7, 10000);
  const auto o_hard = oracle::scalar_pcg(hard, std::vector<double>(60, 1.0), 1e-7, 10000);
  CHECK(res.iterations_per_lane[0] == o_easy.iterations);
  CHECK(res.iterations_per_lane[1] == o_hard.iterations);
  CHECK(res.iterations_per_lane[0] < res.iterations_per_lane[1]);
  CHECK(res.ensemble_iterations == o_hard.iterations);
  CHECK(res.solution.lane(0) == o_easy.x);
  CHECK(res.solution.lane(1) == o_hard.x);
}

TEST_CASE("zero right-hand side lane converges at once") {
  const auto a1 = tridiag(10, 3.0);
  const auto ea = pack({a1, a1});
  EnsembleVector b(10, 2, 0.0);
  b.set_lane(1, std::vector<double>(10, 1.0));
  const auto res = ensemble_pcg(ea, b, jacobi_precond(ea));
  CHECK(res.iterations_per_lane[0] == 0);
  CHECK(res.converged_per_lane[0]);
  for (double v : res.solution.lane(0)) CHECK(v == 0.0);
}

TEST_CASE("residual history and maximum iterations") {
  const auto a1 = tridiag(200, 2.0);
  const auto ea = pack({a1});
  EnsembleVector b(200, 1, 1.0);
  PcgOptions opt;
  opt.max_iterations = 5;
  opt.record_history = true;
  const auto res = ensemble_pcg(ea, b, jacobi_precond(ea), opt);
  CHECK(res.iterations_per_lane[0] == 5);
  CHECK_FALSE(res.converged_per_lane[0]);
  CHECK(res.residual_history.size() == 6);
  std::ostringstream out;
  write_residual_history_csv(res, out);
  CHECK(out.str().rfind("iteration,lane0\n0,1\n", 0) == 0);
}

TEST_CASE("errors") {
  EnsembleCsrMatrix a({0, 1, 2}, {0, 1}, 1);
  a.entry(0)[0] = 1.0;
  a.entry(1)[0] = -1.0;
  CHECK_THROWS_AS(jacobi_precond(a), DomainError);
  a.entry(1)[0] = std::nan("");
  EnsembleVector b(2, 1, 1.0);
  CHECK_THROWS_AS(ensemble_pcg(a, b, IdentityPreconditioner{}), NumericalError);
  CHECK_THROWS_AS(ensemble_pcg(a, EnsembleVector(3, 1, 1.0), IdentityPreconditioner{}), DomainError);
}

TEST_CASE("agrees with dense Cholesky") {
  std::mt19937_64 rng(5);
  const auto p = oracle::random_pattern(80, 8, rng);
  const auto a1 = oracle::random_spd(p, 0.05, rng);
  const auto ea = pack({a1});
  std::vector<double> rhs(80);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : rhs) v = u(rng);
  EnsembleVector b(80, 1);
  b.set_lane(0, rhs);
  PcgOptions opt;
  opt.tol = 1e-12;
  const auto res = ensemble_pcg(ea, b, jacobi_precond(ea), opt);
  const auto ref = oracle::dense_llt_solve(a1, rhs);
  double err = 0.0, nrm = 0.0;
  for (std::size_t i = 0; i < 80; ++i) {
    err = std::max(err, std::abs(res.solution(i, 0) - ref[i]));
    nrm = std::max(nrm, std::abs(ref[i]));
  }
  CHECK(err <= 1e-9 * nrm);
}
