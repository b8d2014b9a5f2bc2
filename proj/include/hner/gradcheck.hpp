#pragma once

#include <string>
#include <vector>

#include "hner/model.hpp"

namespace hner {

struct GroupError {
    std::string name;
    double rel_err = 0;
};

struct GradCheckResult {
    double max_rel_err = 0;
    std::vector<GroupError> groups;  // worst error per parameter tensor
};

// Tape gradients of the full-model CRF NLL vs central finite differences on a
// small random instance (d=8). Deterministic given the seed.
GradCheckResult gradcheck_model(unsigned long long seed, double eps, WordLayerKind kind);

}  // namespace hner
