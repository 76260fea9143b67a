#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fkpf/harness.hpp"

namespace fkpf {

inline constexpr int kCriterionCount = 14;

struct AcceptanceOptions {
    std::uint64_t seed = 20240611;
    unsigned workers = 0;
    std::vector<int> only;  // empty: all criteria
};

// Runs the acceptance criteria in order; progress is called after each one.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& progress = {});

// "[PASS] 3 free semigroup: ... (1.2 s)"
std::string format_criterion(const CriterionResult& r);

}  // namespace fkpf
