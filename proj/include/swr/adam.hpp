#pragma once

#include <cmath>
#include <vector>

#include "swr/param_store.hpp"

namespace swr {

/// Adam with bias correction. Moment buffers are laid out per store entry and
/// sized on first use; the store must not gain or lose entries afterwards.
template <class S>
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    int64_t step_count() const { return t_; }

    /// One update over all trainable entries from their accumulated grads.
    /// Grads are not cleared here.
    void step(ParameterStore<S>& store) {
        if (m_.empty()) init_slots(store);
        require(m_.size() == store.size(), "optimizer slot count ", m_.size(),
                " does not match store entry count ", store.size());
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t e = 0; e < store.size(); ++e) {
            auto& entry = store.entry(e);
            if (!entry.trainable) continue;
            auto& m = m_[e];
            auto& v = v_[e];
            require(m.size() == entry.value.numel(), "optimizer slot size mismatch for '", entry.path, "'");
            for (size_t i = 0; i < m.size(); ++i) {
                const double g = static_cast<double>(entry.grad.values[i]);
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                entry.value.values[i] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    void init_slots(const ParameterStore<S>& store) {
        m_.resize(store.size());
        v_.resize(store.size());
        for (size_t e = 0; e < store.size(); ++e) {
            if (!store.entry(e).trainable) continue;
            m_[e].assign(store.entry(e).value.numel(), 0.0);
            v_[e].assign(store.entry(e).value.numel(), 0.0);
        }
    }

    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace swr
