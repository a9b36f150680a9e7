#pragma once

#include "chb/fespace.hpp"

namespace chb {

// Primary unknowns carried between time steps.
struct State {
    double t = 0.0;
    ScalarField phi;
    VectorField u;
    ScalarField theta;
};

// Step byproducts (chemical potential, pressure) of the last completed step.
struct StepAux {
    ScalarField mu;
    ScalarField p;
};

}  // namespace chb
