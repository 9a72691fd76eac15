#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uqgroup {

using Point3 = std::array<double, 3>;

/// Eigenpair of the unit-variance kernel exp(-|x - x'| / delta) on [0,1].
/// The eigenfunction is tabulated on a uniform grid and linearly
/// interpolated between grid points.
struct Eigenpair1D {
  double eigenvalue = 0.0;
  std::vector<double> values;  // at x_k = k / (values.size() - 1)

  double operator()(double x) const;
};

/// Nyström discretisation with trapezoid weights on `grid_points` uniform
/// points. Returns the `count` largest eigenpairs, eigenfunctions normalised
/// in the discrete (trapezoid) L2 norm and positive at x = 0.
std::vector<Eigenpair1D> eigenpairs_1d(double delta, std::size_t count,
                                       std::size_t grid_points);

/// How the exponential of the KL series is scaled: a constant, or the
/// three-valued radial rule 1 / 100 / 10 at r < sqrt(3)/4, r < sqrt(3)/2, else.
enum class AmplitudeMode { Constant, Test2 };

/// Log-normal: a = a_min + a_hat * exp(sum). Linear: a = a_min + a_hat * sum.
enum class FieldModel { LogNormal, Linear };

/// Variance: sigma0 multiplies the field, so 3D eigenvalues carry sigma0^2.
/// Kernel: sigma0 multiplies the covariance kernel, eigenvalues carry sigma0.
enum class Sigma0Placement { Variance, Kernel };

struct FieldSpec {
  double delta = 0.25;
  double sigma0 = 17.320508075688772;  // sqrt(300)
  Sigma0Placement sigma0_placement = Sigma0Placement::Variance;
  std::size_t modes = 4;
  double a_min = 0.1;
  AmplitudeMode amplitude_mode = AmplitudeMode::Constant;
  double a_hat = 1.0;
  double a_y = 1.0;
  double a_z = 1.0;
  FieldModel model = FieldModel::LogNormal;
  /// diag(a, a, a) instead of diag(a, a_y, a_z).
  bool isotropic = false;
  std::size_t nystrom_points = 4097;
};

struct Mode3D {
  std::array<std::size_t, 3> index{};  // 0-based 1D mode numbers
  double eigenvalue = 0.0;
};

class KLDiffusionField {
 public:
  KLDiffusionField() = default;
  KLDiffusionField(FieldSpec spec, std::vector<Eigenpair1D> basis,
                   std::vector<Mode3D> modes);

  const FieldSpec& spec() const { return spec_; }
  std::size_t num_modes() const { return modes_.size(); }
  const std::vector<Mode3D>& modes() const { return modes_; }
  const std::vector<Eigenpair1D>& basis_1d() const { return basis_; }

  /// b_n(x) for all retained modes.
  std::vector<double> mode_values(const Point3& x) const;

  /// a from precomputed mode values at one spatial point.
  double coefficient(std::span<const double> mode_values, std::span<const double> y) const;
  double amplitude(std::span<const double> y) const;
  double eval_a(const Point3& x, std::span<const double> y) const;

  /// Diagonal of the diffusion tensor given a.
  Point3 tensor_diagonal(double a) const;

 private:
  FieldSpec spec_;
  std::vector<Eigenpair1D> basis_;
  std::vector<Mode3D> modes_;
  std::vector<double> sqrt_lambda_;
};

/// Keeps the `spec.modes` largest tensor products of 1D eigenvalues
/// (ties broken lexicographically on the 1D mode triple).
KLDiffusionField build_field(const FieldSpec& spec);

/// max over probe points of the ratio of the largest to the smallest
/// diffusion-tensor entry.
double anisotropy_indicator(const KLDiffusionField& field, std::span<const double> y,
                            std::span<const Point3> probe_points);

/// Same indicator from precomputed mode values (num_modes per probe point).
double anisotropy_indicator(const KLDiffusionField& field, std::span<const double> y,
                            std::span<const double> mode_table);

}  // namespace uqgroup
