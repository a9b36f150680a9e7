#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "chb/mesh.hpp"

namespace chb {

using MeshPtr = std::shared_ptr<const SimplicialMesh>;

// Nodal P1 field; values[v] is the coefficient at vertex v.
struct ScalarField {
    MeshPtr mesh;
    std::vector<double> values;

    ScalarField() = default;
    ScalarField(MeshPtr m, double fill = 0.0);

    // Value at a point of `cell` given barycentric coordinates.
    double eval(int cell, const std::array<double, 3>& bary) const;
    std::array<double, 2> gradient(int cell) const;  // constant per cell
};

// Vector-valued P1 field with homogeneous Dirichlet data on the boundary;
// values interleaved (x0,y0,x1,y1,...). Construction and apply_dirichlet
// zero the boundary entries.
struct VectorField {
    MeshPtr mesh;
    std::vector<double> values;

    VectorField() = default;
    explicit VectorField(MeshPtr m);

    void apply_dirichlet();  // idempotent
    std::array<double, 2> eval(int cell, const std::array<double, 3>& bary) const;
};

// Symmetric gradient per cell, strain-type Voigt (e11, e22, 2*e12).
struct CellStrainField {
    MeshPtr mesh;
    std::vector<std::array<double, 3>> voigt;

    double div(int cell) const { return voigt[cell][0] + voigt[cell][1]; }
};

// Interior-displacement dof numbering: two dofs per free vertex, ordered by
// vertex index, x before y. Boundary (or masked) vertices carry no dofs.
struct DisplacementDofMap {
    std::vector<int> vertex_dof;  // first dof of vertex, -1 if constrained
    int n_dofs = 0;

    static DisplacementDofMap interior(const SimplicialMesh& mesh);
    static DisplacementDofMap all_free(const SimplicialMesh& mesh);  // no constraints
};

ScalarField interpolate_nodal(const std::function<double(double, double)>& f,
                              const MeshPtr& mesh);

// Injection onto a mesh produced by refine_uniform from the field's mesh:
// parent vertices copy, edge midpoints average the two endpoint values.
ScalarField prolong(const ScalarField& field, const MeshPtr& fine);
VectorField prolong(const VectorField& field, const MeshPtr& fine);

CellStrainField strain(const VectorField& u);

// Scatter between a full nodal vector field and its interior dof vector.
std::vector<double> gather_dofs(const VectorField& u, const DisplacementDofMap& map);
VectorField scatter_dofs(const std::vector<double>& dofs, const DisplacementDofMap& map,
                         const MeshPtr& mesh);

}  // namespace chb
