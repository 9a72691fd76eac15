#include "uqgroup/fem3d.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "uqgroup/errors.hpp"

namespace uqgroup {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

// Reference element [0,1]^3, local node a = ax + 2 ay + 4 az.
struct ReferenceHex {
  std::array<double, 2> gauss{};
  double shape[8][8]{};        // [q][a]
  double grad[8][8][3]{};      // [q][a][d]

  ReferenceHex() {
    const double off = 0.5 / std::sqrt(3.0);
    gauss = {0.5 - off, 0.5 + off};
    for (int q = 0; q < 8; ++q) {
      const double xi[3] = {gauss[q & 1], gauss[(q >> 1) & 1], gauss[(q >> 2) & 1]};
      for (int a = 0; a < 8; ++a) {
        double f[3], df[3];
        for (int d = 0; d < 3; ++d) {
          const bool hi = (a >> d) & 1;
          f[d] = hi ? xi[d] : 1.0 - xi[d];
          df[d] = hi ? 1.0 : -1.0;
        }
        shape[q][a] = f[0] * f[1] * f[2];
        grad[q][a][0] = df[0] * f[1] * f[2];
        grad[q][a][1] = f[0] * df[1] * f[2];
        grad[q][a][2] = f[0] * f[1] * df[2];
      }
    }
  }
};

const ReferenceHex& reference() {
  static const ReferenceHex ref;
  return ref;
}

}  // namespace

StructuredMesh::StructuredMesh(int cells_per_dim) : cells_(cells_per_dim) {
  if (cells_ < 2) throw DomainError("mesh needs at least 2 cells per direction");
}

std::size_t StructuredMesh::num_elements() const {
  const auto m = static_cast<std::size_t>(cells_);
  return m * m * m;
}

std::size_t StructuredMesh::num_dofs() const {
  const auto m = static_cast<std::size_t>(cells_ - 1);
  return m * m * m;
}

std::optional<std::size_t> StructuredMesh::dof(int i, int j, int k) const {
  if (i <= 0 || j <= 0 || k <= 0 || i >= cells_ || j >= cells_ || k >= cells_) {
    return std::nullopt;
  }
  const auto n = static_cast<std::size_t>(cells_ - 1);
  return static_cast<std::size_t>(i - 1) +
         n * (static_cast<std::size_t>(j - 1) + n * static_cast<std::size_t>(k - 1));
}

Point3 StructuredMesh::node_coords(int i, int j, int k) const {
  const double h = spacing();
  return {i * h, j * h, k * h};
}

std::vector<Point3> StructuredMesh::quadrature_points() const {
  const auto& ref = reference();
  const double h = spacing();
  std::vector<Point3> pts;
  pts.reserve(num_elements() * 8);
  for (int ez = 0; ez < cells_; ++ez) {
    for (int ey = 0; ey < cells_; ++ey) {
      for (int ex = 0; ex < cells_; ++ex) {
        for (int q = 0; q < 8; ++q) {
          pts.push_back({(ex + ref.gauss[q & 1]) * h, (ey + ref.gauss[(q >> 1) & 1]) * h,
                         (ez + ref.gauss[(q >> 2) & 1]) * h});
        }
      }
    }
  }
  return pts;
}

EnsembleAssembler::EnsembleAssembler(StructuredMesh mesh, KLDiffusionField field,
                                     double forcing)
    : mesh_(mesh), field_(std::move(field)), forcing_(forcing) {
  const int m = mesh_.cells();

  // 27-point graph over interior nodes; columns come out sorted because the
  // dof numbering runs i fastest.
  row_offsets_.reserve(mesh_.num_dofs() + 1);
  row_offsets_.push_back(0);
  for (int k = 1; k < m; ++k) {
    for (int j = 1; j < m; ++j) {
      for (int i = 1; i < m; ++i) {
        for (int dk = -1; dk <= 1; ++dk) {
          for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
              if (auto c = mesh_.dof(i + di, j + dj, k + dk)) col_indices_.push_back(*c);
            }
          }
        }
        row_offsets_.push_back(col_indices_.size());
      }
    }
  }

  EnsembleCsrMatrix probe(row_offsets_, col_indices_, 1);
  element_dofs_.assign(mesh_.num_elements() * 8, npos);
  element_slots_.assign(mesh_.num_elements() * 64, npos);
  std::size_t e = 0;
  for (int ez = 0; ez < m; ++ez) {
    for (int ey = 0; ey < m; ++ey) {
      for (int ex = 0; ex < m; ++ex, ++e) {
        for (int a = 0; a < 8; ++a) {
          if (auto d = mesh_.dof(ex + (a & 1), ey + ((a >> 1) & 1), ez + ((a >> 2) & 1))) {
            element_dofs_[e * 8 + a] = *d;
          }
        }
        for (int a = 0; a < 8; ++a) {
          const auto ra = element_dofs_[e * 8 + a];
          if (ra == npos) continue;
          for (int b = 0; b < 8; ++b) {
            const auto cb = element_dofs_[e * 8 + b];
            if (cb == npos) continue;
            element_slots_[e * 64 + a * 8 + b] = probe.find(ra, cb);
          }
        }
      }
    }
  }

  const auto qps = mesh_.quadrature_points();
  mode_table_.reserve(qps.size() * field_.num_modes());
  for (const auto& x : qps) {
    const auto v = field_.mode_values(x);
    mode_table_.insert(mode_table_.end(), v.begin(), v.end());
  }
}

AssembledEnsembleSystem EnsembleAssembler::assemble(
    std::span<const std::vector<double>> samples,
    std::span<const std::size_t> sample_ids) const {
  const std::size_t width = samples.size();
  if (width == 0) throw DomainError("assemble needs at least one sample");
  if (!sample_ids.empty() && sample_ids.size() != width) {
    throw DomainError("sample id count differs from sample count");
  }
  const auto& ref = reference();
  const double h = mesh_.spacing();
  const std::size_t nm = field_.num_modes();

  AssembledEnsembleSystem sys{EnsembleCsrMatrix(row_offsets_, col_indices_, width),
                              EnsembleVector(mesh_.num_dofs(), width), {}};
  if (sample_ids.empty()) {
    for (std::size_t s = 0; s < width; ++s) sys.sample_ids.push_back(s);
  } else {
    sys.sample_ids.assign(sample_ids.begin(), sample_ids.end());
  }

  auto values = sys.A.values();
  double diag[8][3];
  double ke[8][8];
  for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
    const std::size_t* dofs = element_dofs_.data() + e * 8;
    const std::size_t* slots = element_slots_.data() + e * 64;
    for (std::size_t s = 0; s < width; ++s) {
      for (int q = 0; q < 8; ++q) {
        const std::span<const double> mv(mode_table_.data() + (e * 8 + q) * nm, nm);
        const double a = field_.coefficient(mv, samples[s]);
        if (!(a > 0.0) || !std::isfinite(a)) {
          throw AssemblyError(fmt::format(
              "diffusion coefficient {} at element {} quadrature point {} (lane {})", a, e, q, s));
        }
        const auto t = field_.tensor_diagonal(a);
        diag[q][0] = t[0];
        diag[q][1] = t[1];
        diag[q][2] = t[2];
      }
      // Weight 1/8 per Gauss point, Jacobian h^3, gradients scaled by 1/h.
      for (int a = 0; a < 8; ++a) {
        for (int b = a; b < 8; ++b) {
          double sum = 0.0;
          for (int q = 0; q < 8; ++q) {
            sum += diag[q][0] * ref.grad[q][a][0] * ref.grad[q][b][0] +
                   diag[q][1] * ref.grad[q][a][1] * ref.grad[q][b][1] +
                   diag[q][2] * ref.grad[q][a][2] * ref.grad[q][b][2];
          }
          ke[a][b] = ke[b][a] = sum * h / 8.0;
        }
      }
      for (int a = 0; a < 64; ++a) {
        if (slots[a] != npos) values[slots[a] * width + s] += ke[a / 8][a % 8];
      }
    }
    for (int a = 0; a < 8; ++a) {
      if (dofs[a] == npos) continue;
      double load = 0.0;
      for (int q = 0; q < 8; ++q) load += ref.shape[q][a];
      load *= forcing_ * h * h * h / 8.0;
      for (std::size_t s = 0; s < width; ++s) sys.b(dofs[a], s) += load;
    }
  }
  return sys;
}

double EnsembleAssembler::indicator(std::span<const double> y) const {
  return anisotropy_indicator(field_, y, mode_table_);
}

AssembledEnsembleSystem assemble(const StructuredMesh& mesh, const KLDiffusionField& field,
                                 std::span<const std::vector<double>> samples) {
  return EnsembleAssembler(mesh, field).assemble(samples);
}

double qoi(std::span<const double> u) {
  double sum = 0.0;
  for (double v : u) sum += v * v;
  return sum;
}

}  // namespace uqgroup
