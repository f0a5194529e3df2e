#pragma once

#include "atnf/gradcheck.hpp"

namespace atnf {

struct TargetReport {
    std::string name;
    GradCheckReport report;
};

/// Gradient-check batteries behind `gradcheck --target ...`:
///   ops   - every differentiable tensor op on small random tensors
///   se    - the SE block end-to-end (randomized gate layers)
///   sa    - the SA block end-to-end (randomized gate conv)
///   model - a hybrid-attention VggMini at toy scale, sampled coordinates
/// All run in 64-bit precision.
std::vector<TargetReport> run_gradcheck_target(const std::string& target, uint64_t seed,
                                               double eps = 1e-5);

}  // namespace atnf
