#pragma once

#include <string>

#include "pgnlm/error.hpp"
#include "pgnlm/types.hpp"

namespace pgnlm {

/// Estimator tunables. Defaults: 39x39 search window, 5x5 patches,
/// gamma = 0.85, lambda = 2, median thresholds and at most 64 predictors.
struct PgnlmConfig {
    int search_half = 19;
    int patch_half = 2;
    double gamma = 0.85;
    double lambda = 2.0;
    double p_pol = 50.0;
    double p_opt = 50.0;
    int s_max = 64;
    bool guided = true;
    BorderPolicy border = BorderPolicy::Mirror;

    int search_side() const noexcept { return 2 * search_half + 1; }
    /// Number of candidate predictors in the search window.
    int candidates() const noexcept { return search_side() * search_side(); }
    Patch patch() const noexcept { return Patch{patch_half}; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorCategory::Usage, msg); };
        if (search_half < 0)
            fail("search half-width must be >= 0");
        if (patch_half < 0)
            fail("patch half-width must be >= 0");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            fail("gamma must lie in [0, 1]");
        if (!(lambda >= 0.0))
            fail("lambda must be >= 0");
        if (!(p_pol >= 0.0 && p_pol <= 100.0) || !(p_opt >= 0.0 && p_opt <= 100.0))
            fail("percentiles must lie in [0, 100]");
        if (s_max < 1 || s_max > candidates())
            fail("s_max must lie in [1, " + std::to_string(candidates()) + "]");
    }
};

} // namespace pgnlm
