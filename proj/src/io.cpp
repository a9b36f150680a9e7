#include "chb/io.hpp"

#include <cstdio>
#include <stdexcept>

namespace chb {

namespace {

struct File {
    std::FILE* f;
    explicit File(const std::string& path) : f(std::fopen(path.c_str(), "w")) {
        if (!f) throw std::runtime_error("io: cannot open '" + path + "' for writing");
    }
    ~File() {
        if (f) std::fclose(f);
    }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
};

}  // namespace

const char* const kCsvHeader =
    "t,energy_total,energy_interface,energy_potential,energy_elastic,energy_fluid,"
    "dissipation,production,energy_residual,mass_phi,mass_theta,newton_iters";

void write_vtk(const SimplicialMesh& mesh, const VtkFields& fields, const std::string& path) {
    const int n = mesh.n_vertices();
    for (const auto& [name, f] : fields.scalars)
        if (static_cast<int>(f->values.size()) != n)
            throw std::invalid_argument("write_vtk: scalar field '" + name +
                                        "' does not match the mesh");
    for (const auto& [name, f] : fields.vectors)
        if (static_cast<int>(f->values.size()) != 2 * n)
            throw std::invalid_argument("write_vtk: vector field '" + name +
                                        "' does not match the mesh");

    File out(path);
    std::fprintf(out.f, "# vtk DataFile Version 2.0\n");
    std::fprintf(out.f, "chb fields\n");
    std::fprintf(out.f, "ASCII\n");
    std::fprintf(out.f, "DATASET UNSTRUCTURED_GRID\n");
    std::fprintf(out.f, "POINTS %d double\n", n);
    for (int v = 0; v < n; ++v)
        std::fprintf(out.f, "%.17g %.17g 0\n", mesh.vertices[v][0], mesh.vertices[v][1]);
    const int m = mesh.n_cells();
    std::fprintf(out.f, "CELLS %d %d\n", m, 4 * m);
    for (int c = 0; c < m; ++c)
        std::fprintf(out.f, "3 %d %d %d\n", mesh.cells[c][0], mesh.cells[c][1],
                     mesh.cells[c][2]);
    std::fprintf(out.f, "CELL_TYPES %d\n", m);
    for (int c = 0; c < m; ++c) std::fprintf(out.f, "5\n");
    std::fprintf(out.f, "POINT_DATA %d\n", n);
    for (const auto& [name, f] : fields.scalars) {
        std::fprintf(out.f, "SCALARS %s double 1\n", name.c_str());
        std::fprintf(out.f, "LOOKUP_TABLE default\n");
        for (int v = 0; v < n; ++v) std::fprintf(out.f, "%.17g\n", f->values[v]);
    }
    for (const auto& [name, f] : fields.vectors) {
        std::fprintf(out.f, "VECTORS %s double\n", name.c_str());
        for (int v = 0; v < n; ++v)
            std::fprintf(out.f, "%.17g %.17g 0\n", f->values[2 * v], f->values[2 * v + 1]);
    }
}

void write_csv(const std::vector<StepRecord>& records, const std::string& path) {
    File out(path);
    std::fprintf(out.f, "%s\n", kCsvHeader);
    for (const StepRecord& r : records)
        std::fprintf(out.f,
                     "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                     r.t, r.energy.total(), r.energy.interface, r.energy.potential,
                     r.energy.elastic, r.energy.fluid, r.dissipation, r.production,
                     r.energy_residual, r.mass_residual_phi, r.mass_residual_theta,
                     r.newton_iters);
}

}  // namespace chb
