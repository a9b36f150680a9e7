#include "chb/mesh.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace chb {

namespace {

constexpr double kBoundaryTol = 1e-12;

char classify_boundary(double x, double y) {
    return (x < kBoundaryTol || x > 1.0 - kBoundaryTol || y < kBoundaryTol ||
            y > 1.0 - kBoundaryTol)
               ? 1
               : 0;
}

double edge_length(const SimplicialMesh& m, int a, int b) {
    const double dx = m.vertices[a][0] - m.vertices[b][0];
    const double dy = m.vertices[a][1] - m.vertices[b][1];
    return std::sqrt(dx * dx + dy * dy);
}

double longest_edge(const SimplicialMesh& m) {
    double h = 0.0;
    for (const auto& c : m.cells) {
        h = std::max(h, edge_length(m, c[0], c[1]));
        h = std::max(h, edge_length(m, c[1], c[2]));
        h = std::max(h, edge_length(m, c[2], c[0]));
    }
    return h;
}

}  // namespace

SimplicialMesh build_unit_square_mesh(int level) {
    if (level < 0 || level > 12)
        throw std::invalid_argument("build_unit_square_mesh: level out of range [0,12]: " +
                                    std::to_string(level));
    const int n = 1 << level;  // lattice squares per side
    const double h = 1.0 / n;
    SimplicialMesh m;
    m.level = level;
    m.vertices.reserve(static_cast<size_t>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            m.vertices.push_back({i * h, j * h});
    auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    m.cells.reserve(static_cast<size_t>(2) * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            // split along the v00-v11 diagonal, both cells CCW
            m.cells.push_back({v00, v10, v11});
            m.cells.push_back({v00, v11, v01});
        }
    }
    m.boundary_vertex.resize(m.vertices.size());
    for (size_t v = 0; v < m.vertices.size(); ++v)
        m.boundary_vertex[v] = classify_boundary(m.vertices[v][0], m.vertices[v][1]);
    m.h_max = longest_edge(m);
    return m;
}

SimplicialMesh refine_uniform(const SimplicialMesh& mesh) {
    SimplicialMesh fine;
    fine.level = mesh.level + 1;
    fine.vertices = mesh.vertices;
    fine.parent_edge.reserve(mesh.vertices.size());
    for (int v = 0; v < mesh.n_vertices(); ++v) fine.parent_edge.push_back({v, v});

    std::map<std::pair<int, int>, int> midpoint;  // sorted parent edge -> fine vertex
    auto mid_of = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int id = fine.n_vertices();
        fine.vertices.push_back({0.5 * (mesh.vertices[a][0] + mesh.vertices[b][0]),
                                 0.5 * (mesh.vertices[a][1] + mesh.vertices[b][1])});
        fine.parent_edge.push_back({key.first, key.second});
        midpoint.emplace(key, id);
        return id;
    };

    fine.cells.reserve(4 * mesh.cells.size());
    for (const auto& c : mesh.cells) {
        const int a = c[0], b = c[1], d = c[2];
        const int mab = mid_of(a, b), mbd = mid_of(b, d), mda = mid_of(d, a);
        fine.cells.push_back({a, mab, mda});
        fine.cells.push_back({mab, b, mbd});
        fine.cells.push_back({mda, mbd, d});
        fine.cells.push_back({mab, mbd, mda});
    }
    fine.boundary_vertex.resize(fine.vertices.size());
    for (size_t v = 0; v < fine.vertices.size(); ++v)
        fine.boundary_vertex[v] = classify_boundary(fine.vertices[v][0], fine.vertices[v][1]);
    fine.h_max = longest_edge(fine);
    return fine;
}

CellGeometry cell_geometry(const SimplicialMesh& mesh, int cell) {
    if (cell < 0 || cell >= mesh.n_cells())
        throw std::out_of_range("cell_geometry: cell index " + std::to_string(cell) +
                                " out of range");
    const auto& c = mesh.cells[cell];
    const auto& pa = mesh.vertices[c[0]];
    const auto& pb = mesh.vertices[c[1]];
    const auto& pc = mesh.vertices[c[2]];
    const double det =
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    if (det <= 0.0)
        throw std::invalid_argument("cell_geometry: degenerate or CW cell " + std::to_string(cell));
    CellGeometry g;
    g.area = 0.5 * det;
    // grad lambda_i = perp(opposite edge) / (2*area), perp(v) = (-vy, vx)
    g.grad[0] = {(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det};
    g.grad[1] = {(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det};
    g.grad[2] = {(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det};
    return g;
}

std::shared_ptr<const SimplicialMesh> share(SimplicialMesh mesh) {
    return std::make_shared<const SimplicialMesh>(std::move(mesh));
}

}  // namespace chb
