#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "swr/param_store.hpp"

namespace swr {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_path;
    size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Central-difference check of the store's accumulated gradients against
/// `loss_fn`, which must recompute the scalar loss from current store values.
/// Analytic grads must already be in the store. Relative error uses
/// |a - n| / max(1, |a|, |n|); the step is scaled by parameter magnitude.
template <class LossFn>
GradCheckReport grad_check(ParameterStore<double>& store, LossFn&& loss_fn, double h_base = 1e-6) {
    GradCheckReport rep;
    for (size_t e = 0; e < store.size(); ++e) {
        auto& entry = store.entry(e);
        if (!entry.trainable) continue;
        for (size_t i = 0; i < entry.value.numel(); ++i) {
            const double w = entry.value.values[i];
            const double h = h_base * std::max(1.0, std::abs(w));
            entry.value.values[i] = w + h;
            const double fp = loss_fn();
            entry.value.values[i] = w - h;
            const double fm = loss_fn();
            entry.value.values[i] = w;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = entry.grad.values[i];
            const double rel =
                std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_path = entry.path;
                rep.worst_index = i;
                rep.analytic = analytic;
                rep.numeric = numeric;
            }
        }
    }
    return rep;
}

}  // namespace swr
