#pragma once

#include <array>
#include <memory>
#include <vector>

namespace chb {

// Conforming triangulation of the unit square. Cells are CCW vertex triples;
// vertex order of build_unit_square_mesh is row-major over the lattice.
struct SimplicialMesh {
    std::vector<std::array<double, 2>> vertices;
    std::vector<std::array<int, 3>> cells;
    std::vector<char> boundary_vertex;  // 1 where min(x,y,1-x,1-y) < 1e-12
    int level = 0;
    double h_max = 0.0;
    // Nesting metadata, filled by refine_uniform only: for each vertex the
    // parent-mesh edge it bisects (a == b for vertices copied from the parent).
    std::vector<std::array<int, 2>> parent_edge;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_cells() const { return static_cast<int>(cells.size()); }
    bool refined_from_parent() const { return !parent_edge.empty(); }
};

struct CellGeometry {
    double area;                            // strictly positive (CCW cells)
    std::array<std::array<double, 2>, 3> grad;  // P1 hat-function gradients
};

// Structured lattice of (2^level+1)^2 vertices, each lattice square split
// along its lower-left to upper-right diagonal (2*4^level cells).
SimplicialMesh build_unit_square_mesh(int level);

// Red refinement: every cell into four via edge midpoints. Parent vertices
// keep their indices; child cells 4c..4c+3 come from parent cell c.
SimplicialMesh refine_uniform(const SimplicialMesh& mesh);

CellGeometry cell_geometry(const SimplicialMesh& mesh, int cell);

std::shared_ptr<const SimplicialMesh> share(SimplicialMesh mesh);

}  // namespace chb
