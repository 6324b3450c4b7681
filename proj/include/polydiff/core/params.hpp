#pragma once

#include "polydiff/core/tensor.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace polydiff::core {

using Rng = std::mt19937_64;

enum class Init { Zeros, Ones, Normal };

/// Named trainable tensors in insertion order. Names are unique; iteration
/// order is the order of registration, which fixes the serialized layout.
class ParameterStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    /// Registers a new parameter. Normal draws use N(0, stddev^2).
    Tensor add(std::string name, Shape shape, Init init, Rng& rng, double stddev = 0.02);
    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);
    bool contains(std::string_view name) const;

    std::size_t size() const { return entries_.size(); }
    Index scalar_count() const;
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    void zero_grad();
    /// Redraws every entry from N(0, stddev^2); used by gradient tests so
    /// that zero-initialized projections still carry signal.
    void randomize(Rng& rng, double stddev);
    bool all_finite() const;

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Writes little-endian float32 values back to back, plus a text manifest
/// with one line per parameter: `<name> <shape> <byte offset>`.
void save_parameters(const ParameterStore& store, const std::filesystem::path& binary,
                     const std::filesystem::path& manifest);

/// Loads into an already-constructed store. Every name and shape must agree
/// with the manifest; any disagreement raises DimensionError.
void load_parameters(ParameterStore& store, const std::filesystem::path& binary,
                     const std::filesystem::path& manifest);

}  // namespace polydiff::core
