#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "uqgroup/errors.hpp"
#include "uqgroup/random_field.hpp"

using namespace uqgroup;

namespace {

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) < 0) == (f(mid) < 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Continuous eigenvalues of exp(-|x-x'|/delta) on an interval of length 1.
std::vector<double> analytic_eigenvalues(double delta, int count) {
  const double c = 1.0 / delta;
  const double a = 0.5;
  std::vector<double> out;
  for (int k = 0; static_cast<int>(out.size()) < count; ++k) {
    // Branch k of tan(w a) lies in ((k - 1/2) pi / a, (k + 1/2) pi / a).
    const double lo = std::max(1e-12, (k - 0.5) * M_PI / a + 1e-12);
    const double hi = (k + 0.5) * M_PI / a - 1e-12;
    const double even = bisect([&](double w) { return c - w * std::tan(w * a); }, std::max(lo, k * M_PI / a), hi);
    out.push_back(2.0 * c / (even * even + c * c));
    if (k == 0) continue;
    const double odd = bisect([&](double w) { return w + c * std::tan(w * a); }, lo, k * M_PI / a - 1e-12);
    out.push_back(2.0 * c / (odd * odd + c * c));
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  out.resize(static_cast<std::size_t>(count));
  return out;
}

}  // namespace

TEST_CASE("1D eigenpairs: ordering, sign, normalisation") {
  const auto pairs = eigenpairs_1d(0.25, 5, 257);
  REQUIRE(pairs.size() == 5);
  const double h = 1.0 / 256.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].values.front() > 0.0);
    if (i > 0) CHECK(pairs[i].eigenvalue < pairs[i - 1].eigenvalue);
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 257; ++k) {
        const double w = (k == 0 || k == 256) ? h / 2 : h;
        s += w * pairs[i].values[k] * pairs[j].values[k];
      }
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
    }
  }
  CHECK_THROWS_AS(eigenpairs_1d(0.25, 3, 10), DomainError);
  CHECK_THROWS_AS(eigenpairs_1d(-1.0, 3, 100), DomainError);
}

TEST_CASE("1D eigenvalues approach the continuous spectrum") {
  const auto pairs = eigenpairs_1d(0.25, 4, 1025);
  const auto exact = analytic_eigenvalues(0.25, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(pairs[i].eigenvalue - exact[i]) < 1e-5);
  }
}

TEST_CASE("dense Nystrom agrees with the subspace-iteration oracle on the same grid") {
  const auto pairs = eigenpairs_1d(0.25, 4, 257);
  const auto ref = oracle::nystrom_subspace(0.25, 4, 257);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pairs[i].eigenvalue == doctest::Approx(ref.eigenvalues[i]).epsilon(1e-12));
    double diff = 0.0;
    for (std::size_t k = 0; k < 257; ++k) diff = std::max(diff, std::abs(pairs[i].values[k] - ref.vectors[i][k]));
    CHECK(diff < 1e-9);
  }
}

TEST_CASE("3D mode selection") {
  FieldSpec spec;
  spec.modes = 4;
  spec.nystrom_points = 129;
  const auto f = build_field(spec);
  const auto& b = f.basis_1d();
  const double s2 = spec.sigma0 * spec.sigma0;
  REQUIRE(f.num_modes() == 4);
  CHECK(f.modes()[0].index == std::array<std::size_t, 3>{0, 0, 0});
  CHECK(f.modes()[0].eigenvalue == doctest::Approx(s2 * std::pow(b[0].eigenvalue, 3)));
  CHECK(f.modes()[1].index == std::array<std::size_t, 3>{0, 0, 1});
  CHECK(f.modes()[2].index == std::array<std::size_t, 3>{0, 1, 0});
  CHECK(f.modes()[3].index == std::array<std::size_t, 3>{1, 0, 0});
  CHECK(f.modes()[1].eigenvalue == f.modes()[3].eigenvalue);

  spec.sigma0_placement = Sigma0Placement::Kernel;
  spec.modes = 1;
  const auto k = build_field(spec);
  CHECK(k.modes()[0].eigenvalue == doctest::Approx(spec.sigma0 * std::pow(k.basis_1d()[0].eigenvalue, 3)));
}

TEST_CASE("coefficient models") {
  FieldSpec spec;
  spec.modes = 2;
  spec.nystrom_points = 129;
  spec.sigma0 = 0.0;
  spec.a_min = 0.1;
  spec.a_hat = 2.0;
  const auto f = build_field(spec);
  const std::vector<double> y{0.7, -0.3};
  CHECK(f.eval_a({0.2, 0.5, 0.9}, y) == doctest::Approx(2.1));

  spec.sigma0 = 1.0;
  const auto g = build_field(spec);
  const Point3 x{0.3, 0.6, 0.1};
  const auto mv = g.mode_values(x);
  double sum = 0.0;
  for (std::size_t n = 0; n < 2; ++n) sum += std::sqrt(g.modes()[n].eigenvalue) * mv[n] * y[n];
  CHECK(g.eval_a(x, y) == doctest::Approx(0.1 + 2.0 * std::exp(sum)).epsilon(1e-14));
  CHECK_THROWS_AS(g.eval_a(x, std::vector<double>{1.0}), DomainError);

  spec.model = FieldModel::Linear;
  const auto lin = build_field(spec);
  CHECK(lin.eval_a(x, y) == doctest::Approx(0.1 + 2.0 * sum).epsilon(1e-14));
}

TEST_CASE("radial amplitude rule") {
  FieldSpec spec;
  spec.modes = 3;
  spec.nystrom_points = 65;
  spec.amplitude_mode = AmplitudeMode::Test2;
  const auto f = build_field(spec);
  CHECK(f.amplitude(std::vector<double>{0.0, 0.0, 0.0}) == 1.0);
  CHECK(f.amplitude(std::vector<double>{0.5, 0.0, 0.0}) == 100.0);  // sqrt(3)/4 < 0.5
  CHECK(f.amplitude(std::vector<double>{0.9, 0.0, 0.0}) == 10.0);   // > sqrt(3)/2
  CHECK(f.amplitude(std::vector<double>{0.4, 0.0, 0.0}) == 1.0);
}

TEST_CASE("anisotropy indicator") {
  FieldSpec spec;
  spec.modes = 1;
  spec.nystrom_points = 65;
  spec.sigma0 = 0.0;
  spec.a_min = 0.0;
  spec.a_hat = 4.0;
  spec.a_y = 1.0;
  spec.a_z = 2.0;
  const auto f = build_field(spec);
  const std::vector<Point3> probes{{0.5, 0.5, 0.5}};
  CHECK(anisotropy_indicator(f, std::vector<double>{0.0}, probes) == doctest::Approx(4.0));
  spec.isotropic = true;
  const auto iso = build_field(spec);
  CHECK(anisotropy_indicator(iso, std::vector<double>{0.3}, probes) == 1.0);
}
