#pragma once

#include "polydiff/core/params.hpp"

#include <functional>
#include <string>
#include <vector>

namespace polydiff::core {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_parameter;
    Index worst_index = -1;
    Index checked_entries = 0;
    std::vector<std::string> skipped;  // parameters with requires_grad off
    bool passed = false;
};

/// Compares the taped gradient of `loss_fn` against central differences
/// (loss(p+h) - loss(p-h)) / 2h for every entry of every trainable parameter.
///
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
/// the floor keeps entries whose true gradient is zero from dividing by
/// round-off. `loss_fn` must be deterministic and return a scalar tensor.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParameterStore& params,
                                  double step, double tol, double floor = 1e-6);

}  // namespace polydiff::core
