#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paa/adapters.hpp"

namespace paa {

struct GradCheckReport {
  Variant variant;
  double max_rel_error = 0.0;
  std::string worst_input;  // "X", "Y" or a parameter name
};

// Small configuration used for finite-difference checks: 4 patches of
// width 3, a 3-word prompt of width 2.
AdapterConfig gradcheck_config(Variant v, std::uint64_t seed);

// Checks the variant's full forward pass under a random linear readout
// against central differences, with respect to X, Y and every parameter.
GradCheckReport adapter_grad_check(const AdapterConfig& cfg, std::uint64_t seed, double eps = 1e-5);

}  // namespace paa
