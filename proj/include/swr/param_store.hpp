#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "swr/rng.hpp"
#include "swr/tensor.hpp"

namespace swr {

enum class Init {
    zeros,
    ones,
    /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; fan_in = first shape dim
    /// for matrices.
    dense_uniform,
    /// Normal(0, 0.01), used for embedding tables.
    embedding_normal,
};

/// Ordered named parameter set. Iteration order is registration order, so
/// optimizer sweeps and checkpoints are deterministic. Each entry carries its
/// gradient buffer; non-trainable entries (running state such as cluster
/// centroids) are skipped by the optimizer but still checkpointed.
template <class S>
class ParameterStore {
public:
    struct Entry {
        std::string path;
        Tensor<S> value;
        Tensor<S> grad;
        bool trainable = true;
    };

    explicit ParameterStore(uint64_t rng_seed = 0) : seed_(rng_seed) {}

    uint64_t seed() const { return seed_; }

    /// Initial values are a pure function of (store seed, path, shape).
    size_t add(const std::string& path, std::vector<size_t> shape, Init init, bool trainable = true) {
        require(index_.find(path) == index_.end(), "duplicate parameter path '", path, "'");
        Entry e;
        e.path = path;
        e.value = Tensor<S>(shape);
        e.grad = Tensor<S>(std::move(shape));
        e.trainable = trainable;
        initialize(e.value, path, init);
        entries_.push_back(std::move(e));
        index_[path] = entries_.size() - 1;
        return entries_.size() - 1;
    }

    bool has(const std::string& path) const { return index_.count(path) != 0; }

    size_t index_of(const std::string& path) const {
        auto it = index_.find(path);
        require(it != index_.end(), "unknown parameter path '", path, "'");
        return it->second;
    }

    Entry& entry(size_t i) { return entries_[i]; }
    const Entry& entry(size_t i) const { return entries_[i]; }
    Entry& entry(const std::string& path) { return entries_[index_of(path)]; }
    const Entry& entry(const std::string& path) const { return entries_[index_of(path)]; }

    Tensor<S>& value(const std::string& path) { return entries_[index_of(path)].value; }
    const Tensor<S>& value(const std::string& path) const { return entries_[index_of(path)].value; }
    Tensor<S>& grad(const std::string& path) { return entries_[index_of(path)].grad; }

    size_t size() const { return entries_.size(); }

    size_t total_params() const {
        size_t n = 0;
        for (const auto& e : entries_) n += e.value.numel();
        return n;
    }

    size_t total_trainable() const {
        size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(S(0));
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    void initialize(Tensor<S>& t, const std::string& path, Init init) {
        switch (init) {
            case Init::zeros:
                t.fill(S(0));
                return;
            case Init::ones:
                t.fill(S(1));
                return;
            case Init::dense_uniform: {
                Rng rng(mix_seed(seed_, hash_str(path)));
                const double fan_in = static_cast<double>(t.rank() >= 1 ? t.shape[0] : 1);
                const double bound = 1.0 / std::sqrt(fan_in > 0 ? fan_in : 1.0);
                for (auto& v : t.values) v = static_cast<S>(rng.uniform(-bound, bound));
                return;
            }
            case Init::embedding_normal: {
                Rng rng(mix_seed(seed_, hash_str(path)));
                for (auto& v : t.values) v = static_cast<S>(rng.normal(0.0, 0.01));
                return;
            }
        }
    }

    uint64_t seed_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace swr
