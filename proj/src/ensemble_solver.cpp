#include "uqgroup/ensemble_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "uqgroup/errors.hpp"

namespace uqgroup {

namespace {

void require_width(std::size_t a, std::size_t b) {
  if (a != b) throw DomainError(fmt::format("ensemble width {} vs {}", a, b));
}

}  // namespace

EnsembleScalar& EnsembleScalar::operator+=(const EnsembleScalar& o) {
  require_width(width(), o.width());
  for (std::size_t s = 0; s < width(); ++s) lanes_[s] += o.lanes_[s];
  return *this;
}

EnsembleScalar& EnsembleScalar::operator-=(const EnsembleScalar& o) {
  require_width(width(), o.width());
  for (std::size_t s = 0; s < width(); ++s) lanes_[s] -= o.lanes_[s];
  return *this;
}

EnsembleScalar& EnsembleScalar::operator*=(const EnsembleScalar& o) {
  require_width(width(), o.width());
  for (std::size_t s = 0; s < width(); ++s) lanes_[s] *= o.lanes_[s];
  return *this;
}

EnsembleScalar& EnsembleScalar::operator/=(const EnsembleScalar& o) {
  require_width(width(), o.width());
  for (std::size_t s = 0; s < width(); ++s) lanes_[s] /= o.lanes_[s];
  return *this;
}

std::vector<double> EnsembleVector::lane(std::size_t s) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = values_[i * width_ + s];
  return out;
}

void EnsembleVector::set_lane(std::size_t s, std::span<const double> values) {
  if (values.size() != rows_) throw DomainError("lane length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) values_[i * width_ + s] = values[i];
}

EnsembleCsrMatrix::EnsembleCsrMatrix(std::vector<std::size_t> row_offsets,
                                     std::vector<std::size_t> col_indices,
                                     std::size_t width)
    : row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      width_(width),
      values_(col_indices_.size() * width, 0.0) {
  if (row_offsets_.empty() || row_offsets_.front() != 0 ||
      row_offsets_.back() != col_indices_.size()) {
    throw DomainError("malformed CSR row offsets");
  }
  if (width_ == 0) throw DomainError("ensemble width must be >= 1");
}

std::size_t EnsembleCsrMatrix::find(std::size_t row, std::size_t col) const {
  const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row]);
  const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row + 1]);
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return nnz();
  return static_cast<std::size_t>(it - col_indices_.begin());
}

std::vector<double> EnsembleCsrMatrix::lane_values(std::size_t s) const {
  std::vector<double> out(nnz());
  for (std::size_t k = 0; k < nnz(); ++k) out[k] = values_[k * width_ + s];
  return out;
}

void spmv(const EnsembleCsrMatrix& a, const EnsembleVector& x, EnsembleVector& y) {
  if (x.rows() != a.rows()) {
    throw DomainError(fmt::format("spmv: matrix has {} columns, vector {} rows",
                                  a.rows(), x.rows()));
  }
  require_width(a.width(), x.width());
  const std::size_t width = a.width();
  if (y.rows() != a.rows() || y.width() != width) y = EnsembleVector(a.rows(), width);

  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const double* vals = a.values().data();
  const double* xv = x.data().data();
  double* yv = y.data().data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* yi = yv + i * width;
    for (std::size_t s = 0; s < width; ++s) yi[s] = 0.0;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const double* ak = vals + k * width;
      const double* xk = xv + cols[k] * width;
      for (std::size_t s = 0; s < width; ++s) yi[s] += ak[s] * xk[s];
    }
  }
}

EnsembleVector spmv(const EnsembleCsrMatrix& a, const EnsembleVector& x) {
  EnsembleVector y(a.rows(), a.width());
  spmv(a, x, y);
  return y;
}

EnsembleScalar lane_dots(const EnsembleVector& x, const EnsembleVector& y) {
  if (x.rows() != y.rows()) throw DomainError("lane_dots: length mismatch");
  require_width(x.width(), y.width());
  const std::size_t width = x.width();
  EnsembleScalar out(width);
  const double* xv = x.data().data();
  const double* yv = y.data().data();
  std::vector<double> acc(width, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t s = 0; s < width; ++s) acc[s] += xv[i * width + s] * yv[i * width + s];
  }
  for (std::size_t s = 0; s < width; ++s) out[s] = acc[s];
  return out;
}

EnsembleScalar lane_norms(const EnsembleVector& x) {
  EnsembleScalar out = lane_dots(x, x);
  for (std::size_t s = 0; s < out.width(); ++s) out[s] = std::sqrt(out[s]);
  return out;
}

void JacobiPreconditioner::apply(const EnsembleVector& r, EnsembleVector& z) const {
  if (r.rows() != inverse_diagonal_.rows()) throw DomainError("jacobi: length mismatch");
  require_width(r.width(), inverse_diagonal_.width());
  if (z.rows() != r.rows() || z.width() != r.width()) z = EnsembleVector(r.rows(), r.width());
  const auto d = inverse_diagonal_.data();
  const auto rv = r.data();
  auto zv = z.data();
  for (std::size_t k = 0; k < rv.size(); ++k) zv[k] = d[k] * rv[k];
}

JacobiPreconditioner jacobi_precond(const EnsembleCsrMatrix& a) {
  EnsembleVector inv(a.rows(), a.width());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::size_t k = a.find(i, i);
    if (k == a.nnz()) throw DomainError(fmt::format("row {} has no diagonal entry", i));
    const auto lanes = a.entry(k);
    for (std::size_t s = 0; s < a.width(); ++s) {
      if (!(lanes[s] > 0.0)) {
        throw DomainError(fmt::format(
            "non-positive diagonal {} at row {} lane {}", lanes[s], i, s));
      }
      inv(i, s) = 1.0 / lanes[s];
    }
  }
  return JacobiPreconditioner(std::move(inv));
}

LaneSolveResult ensemble_pcg(const EnsembleCsrMatrix& a, const EnsembleVector& b,
                             const Preconditioner& precond, const PcgOptions& options) {
  if (b.rows() != a.rows()) throw DomainError("ensemble_pcg: rhs length mismatch");
  require_width(a.width(), b.width());
  if (!(options.tol > 0.0 && options.tol < 1.0)) {
    throw DomainError("ensemble_pcg: tolerance must lie in (0,1)");
  }

  const std::size_t n = a.rows();
  const std::size_t width = a.width();
  constexpr double tiny = std::numeric_limits<double>::min();

  LaneSolveResult res;
  res.solution = EnsembleVector(n, width);
  res.iterations_per_lane.assign(width, 0);
  res.converged_per_lane.assign(width, false);
  res.frozen_lanes.assign(width, false);

  EnsembleVector r = b;
  EnsembleVector z(n, width), p(n, width), q(n, width);
  const EnsembleScalar bnorm = lane_norms(b);

  std::vector<char> active(width, 1);
  std::vector<double> rel(width, 0.0);
  for (std::size_t s = 0; s < width; ++s) {
    if (!std::isfinite(bnorm[s])) throw NumericalError("non-finite right-hand side");
    if (bnorm[s] == 0.0) {
      active[s] = 0;
      res.converged_per_lane[s] = true;
    } else {
      rel[s] = 1.0;
    }
  }
  if (options.record_history) res.residual_history.push_back(rel);

  precond.apply(r, z);
  p = z;
  EnsembleScalar rz = lane_dots(r, z);

  std::vector<double> alpha(width, 0.0), beta(width, 1.0), keep(width, 0.0);
  auto any_active = [&] { return std::any_of(active.begin(), active.end(), [](char c) { return c != 0; }); };

  int iter = 0;
  while (any_active() && static_cast<std::size_t>(iter) < options.max_iterations) {
    ++iter;
    spmv(a, p, q);
    const EnsembleScalar pap = lane_dots(p, q);
    for (std::size_t s = 0; s < width; ++s) {
      alpha[s] = 0.0;
      if (!active[s]) continue;
      if (!std::isfinite(pap[s]) || !std::isfinite(rz[s])) {
        throw NumericalError(fmt::format("non-finite A-norm in lane {} at iteration {}", s, iter));
      }
      if (std::abs(pap[s]) < tiny) {
        // Vanishing A-conjugate norm: drop the update for this lane only.
        active[s] = 0;
        res.frozen_lanes[s] = true;
        res.iterations_per_lane[s] = iter;
        continue;
      }
      if (pap[s] < 0.0) {
        throw NumericalError(fmt::format("lane {} is not positive definite", s));
      }
      alpha[s] = rz[s] / pap[s];
    }

    double* xv = res.solution.data().data();
    double* rv = r.data().data();
    const double* pv = p.data().data();
    const double* qv = q.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < width; ++s) {
        const std::size_t k = i * width + s;
        xv[k] = xv[k] + alpha[s] * pv[k];
        rv[k] = rv[k] - alpha[s] * qv[k];
      }
    }

    const EnsembleScalar rnorm = lane_norms(r);
    for (std::size_t s = 0; s < width; ++s) {
      if (!active[s]) continue;
      if (!std::isfinite(rnorm[s])) {
        throw NumericalError(fmt::format("non-finite residual in lane {} at iteration {}", s, iter));
      }
      rel[s] = rnorm[s] / bnorm[s];
      if (rel[s] <= options.tol) {
        active[s] = 0;
        res.converged_per_lane[s] = true;
        res.iterations_per_lane[s] = iter;
      }
    }
    if (options.record_history) res.residual_history.push_back(rel);
    if (!any_active()) break;

    precond.apply(r, z);
    const EnsembleScalar rz_new = lane_dots(r, z);
    for (std::size_t s = 0; s < width; ++s) {
      if (active[s]) {
        keep[s] = 1.0;
        beta[s] = rz_new[s] / rz[s];
        rz[s] = rz_new[s];
      } else {
        keep[s] = 0.0;
        beta[s] = 1.0;
      }
    }
    double* pw = p.data().data();
    const double* zv = z.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < width; ++s) {
        const std::size_t k = i * width + s;
        pw[k] = keep[s] * zv[k] + beta[s] * pw[k];
      }
    }
  }

  for (std::size_t s = 0; s < width; ++s) {
    if (active[s]) res.iterations_per_lane[s] = iter;  // hit max_iterations
  }
  res.ensemble_iterations =
      *std::max_element(res.iterations_per_lane.begin(), res.iterations_per_lane.end());
  return res;
}

void write_residual_history_csv(const LaneSolveResult& result, std::ostream& out) {
  const std::size_t width = result.iterations_per_lane.size();
  out << "iteration";
  for (std::size_t s = 0; s < width; ++s) out << ",lane" << s;
  out << '\n';
  for (std::size_t t = 0; t < result.residual_history.size(); ++t) {
    out << t;
    for (double v : result.residual_history[t]) out << ',' << fmt::format("{:.17g}", v);
    out << '\n';
  }
}

}  // namespace uqgroup
