#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mixent/adam.hpp"
#include "mixent/tape.hpp"

namespace mixent {

// Builds a scalar-valued graph from leaves aligned with a ParameterStore's
// slots. Used to compare reverse-mode gradients against central differences.
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst_slot;
    long worst_index = -1;
};

// Central-difference check of every scalar in every slot. The relative error
// uses a small absolute floor so near-zero gradients (e.g. parameters with
// negligible influence on this input) do not blow up the ratio.
FdReport finite_difference_check(const ParameterStore& params, const GraphBuilder& f, double h = 1e-5);

}  // namespace mixent
