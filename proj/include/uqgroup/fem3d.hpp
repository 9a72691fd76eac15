#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "uqgroup/ensemble_solver.hpp"
#include "uqgroup/random_field.hpp"

namespace uqgroup {

/// Uniform hexahedral mesh of [0,1]^3 with m cells per direction. Only the
/// (m-1)^3 interior lattice nodes carry unknowns (homogeneous Dirichlet).
class StructuredMesh {
 public:
  explicit StructuredMesh(int cells_per_dim);

  int cells() const { return cells_; }
  double spacing() const { return 1.0 / cells_; }
  std::size_t num_elements() const;
  std::size_t num_dofs() const;

  /// Unknown number of lattice node (i,j,k), i fastest; nullopt on the boundary.
  std::optional<std::size_t> dof(int i, int j, int k) const;
  Point3 node_coords(int i, int j, int k) const;

  /// 2x2x2 Gauss points, element by element (8 consecutive entries each).
  std::vector<Point3> quadrature_points() const;

 private:
  int cells_;
};

struct AssembledEnsembleSystem {
  EnsembleCsrMatrix A;
  EnsembleVector b;
  std::vector<std::size_t> sample_ids;
};

/// Builds ensemble systems for -div(A grad u) = f on a fixed mesh and field.
///
/// The 27-point graph, the element scatter map and the KL mode values at
/// every quadrature point are computed once and shared by all assemblies.
class EnsembleAssembler {
 public:
  EnsembleAssembler(StructuredMesh mesh, KLDiffusionField field, double forcing = 1.0);

  const StructuredMesh& mesh() const { return mesh_; }
  const KLDiffusionField& field() const { return field_; }

  /// One lane per sample. Throws AssemblyError when the coefficient is not
  /// positive at some quadrature point.
  AssembledEnsembleSystem assemble(std::span<const std::vector<double>> samples,
                                   std::span<const std::size_t> sample_ids = {}) const;

  /// Anisotropy indicator over this mesh's quadrature points.
  double indicator(std::span<const double> y) const;

 private:
  StructuredMesh mesh_;
  KLDiffusionField field_;
  double forcing_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  // Per element: 8 dofs (or npos) and 64 nonzero positions (or npos).
  std::vector<std::size_t> element_dofs_;
  std::vector<std::size_t> element_slots_;
  std::vector<double> mode_table_;  // num_modes per quadrature point
};

AssembledEnsembleSystem assemble(const StructuredMesh& mesh, const KLDiffusionField& field,
                                 std::span<const std::vector<double>> samples);

/// Sum of squares of the discrete solution values.
double qoi(std::span<const double> u);

}  // namespace uqgroup
