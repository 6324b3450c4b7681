#include "polydiff/core/gradcheck.hpp"

#include "polydiff/core/error.hpp"

#include <cmath>

namespace polydiff::core {

namespace {

double evaluate(const std::function<Tensor()>& loss_fn) {
    NoGradGuard guard;
    const double v = loss_fn().item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
    return v;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParameterStore& params,
                                  double step, double tol, double floor) {
    if (!(step > 0)) throw ArgumentError("finite_diff_check: step must be positive");

    params.zero_grad();
    Tensor loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: loss is not finite");
    loss.backward();

    GradCheckReport report;
    for (auto& [name, tensor] : params) {
        if (!tensor.requires_grad()) {
            report.skipped.push_back(name);
            continue;
        }
        std::vector<double> analytic(tensor.grad().begin(), tensor.grad().end());
        if (analytic.empty()) analytic.assign(static_cast<std::size_t>(tensor.size()), 0.0);
        auto values = tensor.mutable_data();
        for (Index i = 0; i < tensor.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = evaluate(loss_fn);
            values[i] = saved - step;
            const double down = evaluate(loss_fn);
            values[i] = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[static_cast<std::size_t>(i)];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            ++report.checked_entries;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = name;
                report.worst_index = i;
            }
        }
    }
    params.zero_grad();
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace polydiff::core
