#pragma once

#include <array>
#include <functional>
#include <vector>

#include "chb/fespace.hpp"
#include "chb/material.hpp"
#include "chb/mesh.hpp"
#include "chb/sparse.hpp"

namespace chb {

// Positive-weight rule on the reference triangle; weights sum to 1 and scale
// by the physical cell area. Built from tensor Gauss under the Duffy map, so
// any requested degree is available.
struct QuadRule {
    int degree = 0;
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;

    int n_points() const { return static_cast<int>(weights.size()); }
};

const QuadRule& quad_rule_for_degree(int degree);

constexpr int kDefaultQuadDegree = 6;

struct QuadPoint {
    int cell;
    std::array<double, 3> bary;
    double x, y;
};

using ScalarPointFn = std::function<double(const QuadPoint&)>;
using VectorPointFn = std::function<std::array<double, 2>(const QuadPoint&)>;
using StressPointFn = std::function<Voigt3(const QuadPoint&)>;
using MatrixPointFn = std::function<Voigt3x3(const QuadPoint&)>;

// entry (i,j) = int w * basis_i * basis_j
CsrMatrix assemble_mass(const SimplicialMesh& mesh);
CsrMatrix assemble_mass(const SimplicialMesh& mesh, const std::vector<double>& cell_weights);
CsrMatrix assemble_mass(const SimplicialMesh& mesh, const ScalarPointFn& weight, int degree);

// entry (i,j) = int c * grad basis_i . grad basis_j  (gradients cellwise
// constant, so a pointwise coefficient enters through its exact cell average)
CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const std::vector<double>& cell_coeff);
CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const ScalarPointFn& coeff, int degree);
CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, double coeff = 1.0);

// entry (i,j) = int strain(basis_i)^T C strain(basis_j) over the dofs of
// `map`; C per cell (use cell_average_matrix for pointwise data).
CsrMatrix assemble_elasticity(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                              const std::vector<Voigt3x3>& C_cell);

// entry (i,j) = int c * div(vector basis_j) * scalar basis_i; rows are mesh
// vertices, columns the dofs of `map`.
CsrMatrix assemble_div_coupling(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                                const ScalarPointFn& coeff, int degree);

// entry (i,j) = int stress(x) . strain(vector basis_j) * scalar basis_i with a
// pointwise stress-type Voigt coefficient; rows are mesh vertices.
CsrMatrix assemble_strain_coupling(const SimplicialMesh& mesh, const DisplacementDofMap& map,
                                   const StressPointFn& stress, int degree);

std::vector<double> assemble_load(const SimplicialMesh& mesh, const ScalarPointFn& density,
                                  int degree);
std::vector<double> assemble_vector_load(const SimplicialMesh& mesh,
                                         const DisplacementDofMap& map,
                                         const VectorPointFn& density, int degree);
// entry j = int stress(x) . strain(basis_j), stress-type Voigt data
std::vector<double> assemble_strain_load(const SimplicialMesh& mesh,
                                         const DisplacementDofMap& map,
                                         const StressPointFn& stress, int degree);

double integrate(const SimplicialMesh& mesh, const ScalarPointFn& density, int degree);

std::vector<double> cell_averages(const SimplicialMesh& mesh, const ScalarPointFn& fn,
                                  int degree);
std::vector<Voigt3x3> cell_average_matrices(const SimplicialMesh& mesh, const MatrixPointFn& fn,
                                            int degree);

}  // namespace chb
