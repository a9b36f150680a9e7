#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chb/diagnostics.hpp"
#include "chb/fespace.hpp"

namespace chb {

// Nodal fields for one snapshot; all fields must live on `mesh`.
struct VtkFields {
    std::vector<std::pair<std::string, const ScalarField*>> scalars;
    std::vector<std::pair<std::string, const VectorField*>> vectors;
};

// Legacy VTK 2.0 ASCII unstructured grid: 3-component points (z = 0),
// triangle cells (type 5), POINT_DATA scalars and 3-component vectors.
void write_vtk(const SimplicialMesh& mesh, const VtkFields& fields, const std::string& path);

// Fixed header, one record per line, 17 significant digits.
void write_csv(const std::vector<StepRecord>& records, const std::string& path);

extern const char* const kCsvHeader;

}  // namespace chb
