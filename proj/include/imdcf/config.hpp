#pragma once

#include <cstddef>
#include <cstdint>

#include "imdcf/opcode_codec.hpp"

namespace imdcf {

// Training and classification hyperparameters, persisted with every registry.
struct RunConfig {
    std::size_t n_states = 2;
    std::size_t ensemble_size = 5;
    std::size_t subset_size = 20;
    std::size_t max_iters = 200;
    std::size_t window_len = 100;
    double threshold_percentile = 0.05;
    std::uint64_t seed = 0;
    std::size_t top_k = kDefaultTopK;
    std::size_t max_extension = 2000;
    // Per-family stratified split of the corpus; test gets the remainder.
    double train_fraction = 0.6;
    double validation_fraction = 0.2;

    // Throws PreconditionError for zero counts or out-of-range fractions.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace imdcf
