#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aulmpm {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

// Small self-checks of the solver invariants, used by `aulmpm verify`.
std::vector<PropertyResult> run_property_suite(std::uint64_t seed = 1);

} // namespace aulmpm
