#include "chb/fespace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chb {

ScalarField::ScalarField(MeshPtr m, double fill)
    : mesh(std::move(m)), values(mesh ? mesh->vertices.size() : 0, fill) {}

double ScalarField::eval(int cell, const std::array<double, 3>& bary) const {
    const auto& c = mesh->cells[cell];
    return bary[0] * values[c[0]] + bary[1] * values[c[1]] + bary[2] * values[c[2]];
}

std::array<double, 2> ScalarField::gradient(int cell) const {
    const CellGeometry g = cell_geometry(*mesh, cell);
    const auto& c = mesh->cells[cell];
    std::array<double, 2> grad{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        grad[0] += values[c[i]] * g.grad[i][0];
        grad[1] += values[c[i]] * g.grad[i][1];
    }
    return grad;
}

VectorField::VectorField(MeshPtr m)
    : mesh(std::move(m)), values(mesh ? 2 * mesh->vertices.size() : 0, 0.0) {}

void VectorField::apply_dirichlet() {
    for (int v = 0; v < mesh->n_vertices(); ++v) {
        if (mesh->boundary_vertex[v]) {
            values[2 * v] = 0.0;
            values[2 * v + 1] = 0.0;
        }
    }
}

std::array<double, 2> VectorField::eval(int cell, const std::array<double, 3>& bary) const {
    const auto& c = mesh->cells[cell];
    std::array<double, 2> out{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        out[0] += bary[i] * values[2 * c[i]];
        out[1] += bary[i] * values[2 * c[i] + 1];
    }
    return out;
}

DisplacementDofMap DisplacementDofMap::interior(const SimplicialMesh& mesh) {
    DisplacementDofMap map;
    map.vertex_dof.assign(mesh.vertices.size(), -1);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        if (!mesh.boundary_vertex[v]) {
            map.vertex_dof[v] = map.n_dofs;
            map.n_dofs += 2;
        }
    }
    return map;
}

DisplacementDofMap DisplacementDofMap::all_free(const SimplicialMesh& mesh) {
    DisplacementDofMap map;
    map.vertex_dof.resize(mesh.vertices.size());
    for (int v = 0; v < mesh.n_vertices(); ++v) map.vertex_dof[v] = 2 * v;
    map.n_dofs = 2 * mesh.n_vertices();
    return map;
}

ScalarField interpolate_nodal(const std::function<double(double, double)>& f,
                              const MeshPtr& mesh) {
    ScalarField out(mesh);
    for (int v = 0; v < mesh->n_vertices(); ++v) {
        const double val = f(mesh->vertices[v][0], mesh->vertices[v][1]);
        if (!std::isfinite(val))
            throw std::invalid_argument("interpolate_nodal: non-finite value at vertex " +
                                     std::to_string(v) + " (" +
                                     std::to_string(mesh->vertices[v][0]) + ", " +
                                     std::to_string(mesh->vertices[v][1]) + ")");
        out.values[v] = val;
    }
    return out;
}

namespace {

void check_nested(const SimplicialMesh& coarse, const SimplicialMesh& fine) {
    if (!fine.refined_from_parent() || fine.level != coarse.level + 1 ||
        static_cast<int>(fine.parent_edge.size()) != fine.n_vertices() ||
        fine.parent_edge.size() < coarse.vertices.size())
        throw std::invalid_argument("prolong: target mesh is not a refinement of the source");
}

}  // namespace

ScalarField prolong(const ScalarField& field, const MeshPtr& fine) {
    check_nested(*field.mesh, *fine);
    ScalarField out(fine);
    for (int v = 0; v < fine->n_vertices(); ++v) {
        const auto& pe = fine->parent_edge[v];
        out.values[v] = 0.5 * (field.values[pe[0]] + field.values[pe[1]]);
    }
    return out;
}

VectorField prolong(const VectorField& field, const MeshPtr& fine) {
    check_nested(*field.mesh, *fine);
    VectorField out(fine);
    for (int v = 0; v < fine->n_vertices(); ++v) {
        const auto& pe = fine->parent_edge[v];
        out.values[2 * v] = 0.5 * (field.values[2 * pe[0]] + field.values[2 * pe[1]]);
        out.values[2 * v + 1] = 0.5 * (field.values[2 * pe[0] + 1] + field.values[2 * pe[1] + 1]);
    }
    return out;
}

CellStrainField strain(const VectorField& u) {
    CellStrainField s;
    s.mesh = u.mesh;
    s.voigt.resize(u.mesh->cells.size());
    for (int cell = 0; cell < u.mesh->n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(*u.mesh, cell);
        const auto& c = u.mesh->cells[cell];
        double e11 = 0.0, e22 = 0.0, g12 = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double ux = u.values[2 * c[i]], uy = u.values[2 * c[i] + 1];
            e11 += ux * g.grad[i][0];
            e22 += uy * g.grad[i][1];
            g12 += ux * g.grad[i][1] + uy * g.grad[i][0];
        }
        s.voigt[cell] = {e11, e22, g12};
    }
    return s;
}

std::vector<double> gather_dofs(const VectorField& u, const DisplacementDofMap& map) {
    std::vector<double> out(map.n_dofs, 0.0);
    for (size_t v = 0; v < map.vertex_dof.size(); ++v) {
        const int d = map.vertex_dof[v];
        if (d >= 0) {
            out[d] = u.values[2 * v];
            out[d + 1] = u.values[2 * v + 1];
        }
    }
    return out;
}

VectorField scatter_dofs(const std::vector<double>& dofs, const DisplacementDofMap& map,
                         const MeshPtr& mesh) {
    if (static_cast<int>(dofs.size()) != map.n_dofs)
        throw std::invalid_argument("scatter_dofs: dof vector size mismatch");
    VectorField out(mesh);
    for (size_t v = 0; v < map.vertex_dof.size(); ++v) {
        const int d = map.vertex_dof[v];
        if (d >= 0) {
            out.values[2 * v] = dofs[d];
            out.values[2 * v + 1] = dofs[d + 1];
        }
    }
    return out;
}

}  // namespace chb
