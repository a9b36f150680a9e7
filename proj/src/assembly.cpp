#include "chb/assembly.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

namespace chb {

// ------------------------------------------------------------ quadrature

const QuadRule& quad_rule_for_degree(int degree) {
    if (degree < 0 || degree > 20)
        throw std::invalid_argument("quad_rule_for_degree: degree out of range [0,20]");
    static std::map<int, QuadRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(degree);
    if (it != cache.end()) return it->second;

    // Duffy map (u,v) in [0,1]^2 -> (x,y) = (u(1-v), v), Jacobian (1-v).
    // A degree-d integrand is degree <= d in u and <= d+1 in v.
    const int n_u = degree / 2 + 1;
    const int n_v = (degree + 1) / 2 + 1;
    const GaussRule01& gu = gauss_rule_01(n_u);
    const GaussRule01& gv = gauss_rule_01(n_v);
    QuadRule rule;
    rule.degree = degree;
    for (int a = 0; a < n_u; ++a) {
        for (int b = 0; b < n_v; ++b) {
            const double u = gu.nodes[a], v = gv.nodes[b];
            const double x = u * (1.0 - v), y = v;
            rule.bary.push_back({1.0 - x - y, x, y});
            // reference-triangle area is 1/2; normalize weights to sum to 1
            rule.weights.push_back(2.0 * gu.weights[a] * gv.weights[b] * (1.0 - v));
        }
    }
    return cache.emplace(degree, std::move(rule)).first->second;
}

namespace {

QuadPoint quad_point(const SimplicialMesh& mesh, int cell, const std::array<double, 3>& bary) {
    const auto& c = mesh.cells[cell];
    QuadPoint qp;
    qp.cell = cell;
    qp.bary = bary;
    qp.x = bary[0] * mesh.vertices[c[0]][0] + bary[1] * mesh.vertices[c[1]][0] +
           bary[2] * mesh.vertices[c[2]][0];
    qp.y = bary[0] * mesh.vertices[c[0]][1] + bary[1] * mesh.vertices[c[1]][1] +
           bary[2] * mesh.vertices[c[2]][1];
    return qp;
}

// strain-type Voigt of the two vector hat functions at vertex slot i:
// column 0 the x-component basis, column 1 the y-component basis.
std::array<Voigt3, 2> basis_strains(const CellGeometry& g, int i) {
    return {Voigt3{g.grad[i][0], 0.0, g.grad[i][1]}, Voigt3{0.0, g.grad[i][1], g.grad[i][0]}};
}

}  // namespace

// ----------------------------------------------------------------- mass

CsrMatrix assemble_mass(const SimplicialMesh& mesh) {
    return assemble_mass(mesh, std::vector<double>(mesh.cells.size(), 1.0));
}

CsrMatrix assemble_mass(const SimplicialMesh& mesh, const std::vector<double>& cell_weights) {
    if (cell_weights.size() != mesh.cells.size())
        throw std::invalid_argument("assemble_mass: cell weight count mismatch");
    std::vector<Triplet> t;
    t.reserve(9 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        const double s = cell_weights[cell] * g.area / 12.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                t.push_back({c[i], c[j], i == j ? 2.0 * s : s});
    }
    return CsrMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

CsrMatrix assemble_mass(const SimplicialMesh& mesh, const ScalarPointFn& weight, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<Triplet> t;
    t.reserve(9 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        double local[3][3] = {};
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const double w = rule.weights[q] * g.area * weight(qp);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) local[i][j] += w * qp.bary[i] * qp.bary[j];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t.push_back({c[i], c[j], local[i][j]});
    }
    return CsrMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

// ------------------------------------------------------------- stiffness

CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const std::vector<double>& cell_coeff) {
    if (cell_coeff.size() != mesh.cells.size())
        throw std::invalid_argument("assemble_stiffness: cell coefficient count mismatch");
    std::vector<Triplet> t;
    t.reserve(9 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        const double s = cell_coeff[cell] * g.area;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                t.push_back({c[i], c[j],
                             s * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1])});
    }
    return CsrMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const ScalarPointFn& coeff, int degree) {
    return assemble_stiffness(mesh, cell_averages(mesh, coeff, degree));
}

CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, double coeff) {
    return assemble_stiffness(mesh, std::vector<double>(mesh.cells.size(), coeff));
}

// ------------------------------------------------------------ elasticity

CsrMatrix assemble_elasticity(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                              const std::vector<Voigt3x3>& C_cell) {
    if (C_cell.size() != mesh.cells.size())
        throw std::invalid_argument("assemble_elasticity: cell matrix count mismatch");
    std::vector<Triplet> t;
    t.reserve(36 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        const Voigt3x3& C = C_cell[cell];
        std::array<std::array<Voigt3, 2>, 3> B;
        for (int i = 0; i < 3; ++i) B[i] = basis_strains(g, i);
        for (int i = 0; i < 3; ++i) {
            const int di = map.vertex_dof[c[i]];
            if (di < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int dj = map.vertex_dof[c[j]];
                if (dj < 0) continue;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        t.push_back({di + a, dj + b, g.area * C.quad(B[i][a], B[j][b])});
            }
        }
    }
    return CsrMatrix::from_triplets(map.n_dofs, map.n_dofs, std::move(t));
}

// ---------------------------------------------------------- div coupling

CsrMatrix assemble_div_coupling(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                                const ScalarPointFn& coeff, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<Triplet> t;
    t.reserve(18 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        // int_K coeff * basis_i, i local
        double ci[3] = {};
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const double w = rule.weights[q] * g.area * coeff(qp);
            for (int i = 0; i < 3; ++i) ci[i] += w * qp.bary[i];
        }
        for (int j = 0; j < 3; ++j) {
            const int dj = map.vertex_dof[c[j]];
            if (dj < 0) continue;
            // div of the x/y hat at slot j is grad[j][0] / grad[j][1]
            for (int i = 0; i < 3; ++i) {
                t.push_back({c[i], dj, ci[i] * g.grad[j][0]});
                t.push_back({c[i], dj + 1, ci[i] * g.grad[j][1]});
            }
        }
    }
    return CsrMatrix::from_triplets(mesh.n_vertices(), map.n_dofs, std::move(t));
}

CsrMatrix assemble_strain_coupling(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                                   const StressPointFn& stress, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<Triplet> t;
    t.reserve(18 * mesh.cells.size());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        // int_K stress * basis_i componentwise (basis strains are constant)
        Voigt3 si[3] = {};
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const Voigt3 s = stress(qp);
            const double w = rule.weights[q] * g.area;
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k) si[i][k] += w * qp.bary[i] * s[k];
        }
        for (int j = 0; j < 3; ++j) {
            const int dj = map.vertex_dof[c[j]];
            if (dj < 0) continue;
            const auto bs = basis_strains(g, j);
            for (int i = 0; i < 3; ++i)
                for (int a = 0; a < 2; ++a)
                    t.push_back({c[i], dj + a,
                                 si[i][0] * bs[a][0] + si[i][1] * bs[a][1] + si[i][2] * bs[a][2]});
        }
    }
    return CsrMatrix::from_triplets(mesh.n_vertices(), map.n_dofs, std::move(t));
}

// ----------------------------------------------------------------- loads

std::vector<double> assemble_load(const SimplicialMesh& mesh, const ScalarPointFn& density,
                                  int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<double> load(mesh.n_vertices(), 0.0);
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const double w = rule.weights[q] * g.area * density(qp);
            for (int i = 0; i < 3; ++i) load[c[i]] += w * qp.bary[i];
        }
    }
    return load;
}

std::vector<double> assemble_vector_load(const SimplicialMesh& mesh,
                                         const DisplacementDofMap& map,
                                         const VectorPointFn& density, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<double> load(map.n_dofs, 0.0);
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const std::array<double, 2> f = density(qp);
            const double w = rule.weights[q] * g.area;
            for (int i = 0; i < 3; ++i) {
                const int di = map.vertex_dof[c[i]];
                if (di < 0) continue;
                load[di] += w * qp.bary[i] * f[0];
                load[di + 1] += w * qp.bary[i] * f[1];
            }
        }
    }
    return load;
}

std::vector<double> assemble_strain_load(const SimplicialMesh& mesh,
                                         const DisplacementDofMap& map,
                                         const StressPointFn& stress, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<double> load(map.n_dofs, 0.0);
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        const auto& c = mesh.cells[cell];
        Voigt3 avg{0.0, 0.0, 0.0};  // int_K stress (basis strains are cellwise constant)
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            const Voigt3 s = stress(qp);
            const double w = rule.weights[q] * g.area;
            for (int k = 0; k < 3; ++k) avg[k] += w * s[k];
        }
        for (int i = 0; i < 3; ++i) {
            const int di = map.vertex_dof[c[i]];
            if (di < 0) continue;
            const auto bs = basis_strains(g, i);
            for (int a = 0; a < 2; ++a)
                load[di + a] += avg[0] * bs[a][0] + avg[1] * bs[a][1] + avg[2] * bs[a][2];
        }
    }
    return load;
}

double integrate(const SimplicialMesh& mesh, const ScalarPointFn& density, int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    double acc = 0.0;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(mesh, cell);
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = quad_point(mesh, cell, rule.bary[q]);
            acc += rule.weights[q] * g.area * density(qp);
        }
    }
    return acc;
}

std::vector<double> cell_averages(const SimplicialMesh& mesh, const ScalarPointFn& fn,
                                  int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<double> avg(mesh.n_cells(), 0.0);
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        double acc = 0.0;
        for (int q = 0; q < rule.n_points(); ++q)
            acc += rule.weights[q] * fn(quad_point(mesh, cell, rule.bary[q]));
        avg[cell] = acc;  // weights sum to 1, so this is the mean value
    }
    return avg;
}

std::vector<Voigt3x3> cell_average_matrices(const SimplicialMesh& mesh, const MatrixPointFn& fn,
                                            int degree) {
    const QuadRule& rule = quad_rule_for_degree(degree);
    std::vector<Voigt3x3> avg(mesh.n_cells());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        Voigt3x3 acc = Voigt3x3::zero();
        for (int q = 0; q < rule.n_points(); ++q)
            acc = acc + rule.weights[q] * fn(quad_point(mesh, cell, rule.bary[q]));
        avg[cell] = acc;
    }
    return avg;
}

}  // namespace chb
