#include "uqgroup/random_field.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <lapacke.h>

#include "uqgroup/errors.hpp"

namespace uqgroup {

double Eigenpair1D::operator()(double x) const {
  const std::size_t last = values.size() - 1;
  const double t = std::clamp(x, 0.0, 1.0) * static_cast<double>(last);
  const std::size_t k = std::min(static_cast<std::size_t>(t), last - 1);
  const double frac = t - static_cast<double>(k);
  return (1.0 - frac) * values[k] + frac * values[k + 1];
}

std::vector<Eigenpair1D> eigenpairs_1d(double delta, std::size_t count,
                                       std::size_t grid_points) {
  if (!(delta > 0.0)) throw DomainError("correlation length must be positive");
  if (count < 1) throw DomainError("need at least one eigenpair");
  if (grid_points < 64) throw DomainError("Nystrom grid needs at least 64 points");
  if (count > grid_points) {
    throw ConfigError(fmt::format("{} eigenpairs requested from a {}-point grid",
                                  count, grid_points));
  }

  // The kernel matrix rho^|i-j| has a tridiagonal inverse, so the
  // symmetrised Nystrom operator W^{1/2} K W^{1/2} is the inverse of a
  // tridiagonal T; its largest eigenvalues are the smallest of T.
  const auto n = static_cast<lapack_int>(grid_points);
  const double h = 1.0 / static_cast<double>(grid_points - 1);
  const double one_minus_rho2 = -std::expm1(-2.0 * h / delta);
  const double rho = std::exp(-h / delta);
  std::vector<double> w(grid_points, h);
  w.front() = w.back() = 0.5 * h;

  std::vector<double> diag(grid_points);
  std::vector<double> off(grid_points - 1);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double k = (i == 0 || i + 1 == grid_points) ? 1.0 : 1.0 + rho * rho;
    diag[i] = k / (one_minus_rho2 * w[i]);
    if (i + 1 < grid_points) off[i] = -rho / (one_minus_rho2 * std::sqrt(w[i] * w[i + 1]));
  }

  const auto want = static_cast<lapack_int>(count);
  lapack_int found = 0;
  std::vector<double> mu(grid_points);
  std::vector<double> z(grid_points * count);
  std::vector<lapack_int> ifail(grid_points);
  const lapack_int info =
      LAPACKE_dstevx(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0, 0.0, 1, want,
                     2.0 * LAPACKE_dlamch('S'), &found, mu.data(), z.data(), n, ifail.data());
  if (info != 0 || found != want) {
    throw NumericalError(fmt::format("tridiagonal eigensolver failed (info {})", info));
  }

  std::vector<Eigenpair1D> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    Eigenpair1D pair;
    pair.eigenvalue = 1.0 / mu[c];
    pair.values.resize(grid_points);
    const double* u = z.data() + c * grid_points;
    const double sign = u[0] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < grid_points; ++i) pair.values[i] = sign * u[i] / std::sqrt(w[i]);
    out.push_back(std::move(pair));
  }
  return out;
}

KLDiffusionField::KLDiffusionField(FieldSpec spec, std::vector<Eigenpair1D> basis,
                                   std::vector<Mode3D> modes)
    : spec_(std::move(spec)), basis_(std::move(basis)), modes_(std::move(modes)) {
  sqrt_lambda_.reserve(modes_.size());
  for (const auto& m : modes_) sqrt_lambda_.push_back(std::sqrt(m.eigenvalue));
}

std::vector<double> KLDiffusionField::mode_values(const Point3& x) const {
  std::vector<double> out(modes_.size());
  for (std::size_t n = 0; n < modes_.size(); ++n) {
    const auto& idx = modes_[n].index;
    out[n] = basis_[idx[0]](x[0]) * basis_[idx[1]](x[1]) * basis_[idx[2]](x[2]);
  }
  return out;
}

double KLDiffusionField::amplitude(std::span<const double> y) const {
  if (spec_.amplitude_mode == AmplitudeMode::Constant) return spec_.a_hat;
  double r2 = 0.0;
  for (double v : y) r2 += v * v;
  const double r = std::sqrt(r2);
  const double d = std::sqrt(3.0);
  if (r < d / 4.0) return 1.0;
  if (r < d / 2.0) return 100.0;
  return 10.0;
}

double KLDiffusionField::coefficient(std::span<const double> mode_values,
                                     std::span<const double> y) const {
  if (y.size() != modes_.size() || mode_values.size() != modes_.size()) {
    throw DomainError(fmt::format("field has {} modes, sample has {} coordinates",
                                  modes_.size(), y.size()));
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < modes_.size(); ++n) {
    sum += sqrt_lambda_[n] * mode_values[n] * y[n];
  }
  const double scale = amplitude(y);
  if (spec_.model == FieldModel::Linear) return spec_.a_min + scale * sum;
  return spec_.a_min + scale * std::exp(sum);
}

double KLDiffusionField::eval_a(const Point3& x, std::span<const double> y) const {
  return coefficient(mode_values(x), y);
}

Point3 KLDiffusionField::tensor_diagonal(double a) const {
  if (spec_.isotropic) return {a, a, a};
  return {a, spec_.a_y, spec_.a_z};
}

KLDiffusionField build_field(const FieldSpec& spec) {
  if (spec.modes < 1) throw ConfigError("field needs at least one KL mode");
  if (spec.a_min < 0.0) throw ConfigError("a_min must be non-negative");
  if (!(spec.a_y > 0.0 && spec.a_z > 0.0)) throw ConfigError("a_y and a_z must be positive");
  if (spec.sigma0 < 0.0) throw ConfigError("sigma0 must be non-negative");

  // Any triple with a 1D index >= modes is dominated by at least `modes`
  // triples, so `modes` 1D eigenpairs suffice.
  const std::size_t count = spec.modes;
  auto basis = eigenpairs_1d(spec.delta, count, spec.nystrom_points);

  const double scale = spec.sigma0_placement == Sigma0Placement::Variance
                           ? spec.sigma0 * spec.sigma0
                           : spec.sigma0;
  std::vector<Mode3D> candidates;
  candidates.reserve(count * count * count);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t q = 0; q < count; ++q) {
      for (std::size_t r = 0; r < count; ++r) {
        // Multiply in sorted order so permuted triples give identical values.
        std::array<double, 3> lam{basis[p].eigenvalue, basis[q].eigenvalue,
                                  basis[r].eigenvalue};
        std::sort(lam.begin(), lam.end(), std::greater<>());
        candidates.push_back({{p, q, r}, scale * (lam[0] * lam[1] * lam[2])});
      }
    }
  }
  if (candidates.size() < spec.modes) {
    throw ConfigError("not enough 1D modes for the requested KL truncation");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Mode3D& a, const Mode3D& b) { return a.eigenvalue > b.eigenvalue; });
  candidates.resize(spec.modes);
  return KLDiffusionField(spec, std::move(basis), std::move(candidates));
}

namespace {

double point_ratio(const KLDiffusionField& field, double a) {
  const auto d = field.tensor_diagonal(a);
  const double hi = std::max({d[0], d[1], d[2]});
  const double lo = std::min({d[0], d[1], d[2]});
  return hi / lo;
}

}  // namespace

double anisotropy_indicator(const KLDiffusionField& field, std::span<const double> y,
                            std::span<const Point3> probe_points) {
  double h = 0.0;
  for (const auto& x : probe_points) h = std::max(h, point_ratio(field, field.eval_a(x, y)));
  return h;
}

double anisotropy_indicator(const KLDiffusionField& field, std::span<const double> y,
                            std::span<const double> mode_table) {
  const std::size_t nm = field.num_modes();
  double h = 0.0;
  for (std::size_t off = 0; off + nm <= mode_table.size(); off += nm) {
    h = std::max(h, point_ratio(field, field.coefficient(mode_table.subspan(off, nm), y)));
  }
  return h;
}

}  // namespace uqgroup
