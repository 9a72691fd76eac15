#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace uqgroup {

/// S lane values carried as one scalar; arithmetic is lane-wise.
class EnsembleScalar {
 public:
  EnsembleScalar() = default;
  explicit EnsembleScalar(std::size_t width, double fill = 0.0)
      : lanes_(width, fill) {}
  explicit EnsembleScalar(std::vector<double> lanes) : lanes_(std::move(lanes)) {}

  std::size_t width() const { return lanes_.size(); }
  double& operator[](std::size_t s) { return lanes_[s]; }
  double operator[](std::size_t s) const { return lanes_[s]; }
  std::span<const double> lanes() const { return lanes_; }

  EnsembleScalar& operator+=(const EnsembleScalar& o);
  EnsembleScalar& operator-=(const EnsembleScalar& o);
  EnsembleScalar& operator*=(const EnsembleScalar& o);
  EnsembleScalar& operator/=(const EnsembleScalar& o);

  friend EnsembleScalar operator+(EnsembleScalar a, const EnsembleScalar& b) { return a += b; }
  friend EnsembleScalar operator-(EnsembleScalar a, const EnsembleScalar& b) { return a -= b; }
  friend EnsembleScalar operator*(EnsembleScalar a, const EnsembleScalar& b) { return a *= b; }
  friend EnsembleScalar operator/(EnsembleScalar a, const EnsembleScalar& b) { return a /= b; }
  friend bool operator==(const EnsembleScalar&, const EnsembleScalar&) = default;

 private:
  std::vector<double> lanes_;
};

/// J spatial entries, each a width-S lane array. Lanes of one entry are
/// contiguous (commuted Kronecker ordering).
class EnsembleVector {
 public:
  EnsembleVector() = default;
  EnsembleVector(std::size_t rows, std::size_t width, double fill = 0.0)
      : rows_(rows), width_(width), values_(rows * width, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t width() const { return width_; }

  double& operator()(std::size_t row, std::size_t lane) { return values_[row * width_ + lane]; }
  double operator()(std::size_t row, std::size_t lane) const { return values_[row * width_ + lane]; }

  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }

  std::vector<double> lane(std::size_t s) const;
  void set_lane(std::size_t s, std::span<const double> values);

  friend bool operator==(const EnsembleVector&, const EnsembleVector&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// CSR matrix whose graph is shared by all lanes; every stored nonzero is a
/// width-S lane array.
class EnsembleCsrMatrix {
 public:
  EnsembleCsrMatrix() = default;
  EnsembleCsrMatrix(std::vector<std::size_t> row_offsets,
                    std::vector<std::size_t> col_indices, std::size_t width);

  std::size_t rows() const { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  std::size_t width() const { return width_; }
  std::size_t nnz() const { return col_indices_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> col_indices() const { return col_indices_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Lane array of the k-th stored nonzero.
  std::span<double> entry(std::size_t k) { return {values_.data() + k * width_, width_}; }
  std::span<const double> entry(std::size_t k) const {
    return {values_.data() + k * width_, width_};
  }

  /// Position of (row, col) in the nonzero arrays, or nnz() when absent.
  std::size_t find(std::size_t row, std::size_t col) const;

  /// Values of one lane, aligned with col_indices().
  std::vector<double> lane_values(std::size_t s) const;

  friend bool operator==(const EnsembleCsrMatrix&, const EnsembleCsrMatrix&) = default;

 private:
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

void spmv(const EnsembleCsrMatrix& a, const EnsembleVector& x, EnsembleVector& y);
EnsembleVector spmv(const EnsembleCsrMatrix& a, const EnsembleVector& x);

/// Per-lane inner product; lanes are never summed together.
EnsembleScalar lane_dots(const EnsembleVector& x, const EnsembleVector& y);
/// Per-lane Euclidean norm.
EnsembleScalar lane_norms(const EnsembleVector& x);

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const EnsembleVector& r, EnsembleVector& z) const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  void apply(const EnsembleVector& r, EnsembleVector& z) const override { z = r; }
};

/// z = D^{-1} r lane-wise.
class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(EnsembleVector inverse_diagonal)
      : inverse_diagonal_(std::move(inverse_diagonal)) {}

  void apply(const EnsembleVector& r, EnsembleVector& z) const override;
  const EnsembleVector& inverse_diagonal() const { return inverse_diagonal_; }

 private:
  EnsembleVector inverse_diagonal_;
};

/// Throws DomainError on a missing, zero, or negative diagonal entry.
JacobiPreconditioner jacobi_precond(const EnsembleCsrMatrix& a);

struct PcgOptions {
  /// Relative residual ||r|| / ||b|| per lane.
  double tol = 1e-7;
  std::size_t max_iterations = 10000;
  bool record_history = false;
};

struct LaneSolveResult {
  EnsembleVector solution;
  /// First iteration with relative residual <= tol; for lanes that never
  /// converge, the iteration at which they stopped moving.
  std::vector<int> iterations_per_lane;
  int ensemble_iterations = 0;
  std::vector<bool> converged_per_lane;
  /// Lanes whose A-conjugate norm vanished before convergence.
  std::vector<bool> frozen_lanes;
  /// Row t holds the relative residual of every lane after t iterations.
  std::vector<std::vector<double>> residual_history;
};

/// Preconditioned CG over all lanes in one iteration stream.
///
/// Each lane follows exactly the recurrence a scalar PCG would follow on
/// its own system: norms and inner products are lane-wise, and a lane stops
/// updating as soon as it converges or its A-conjugate norm drops below the
/// smallest normal double. The loop runs until every lane is done or
/// `max_iterations` is reached. Non-finite values in a live lane throw
/// NumericalError.
LaneSolveResult ensemble_pcg(const EnsembleCsrMatrix& a, const EnsembleVector& b,
                             const Preconditioner& precond,
                             const PcgOptions& options = {});

/// CSV with columns iteration,lane0,...,lane{S-1}.
void write_residual_history_csv(const LaneSolveResult& result, std::ostream& out);

}  // namespace uqgroup
