#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "imdcf/opcode_codec.hpp"

namespace imdcf {

inline constexpr double kStochasticTolerance = 1e-9;
inline constexpr double kEmissionFloor = 1e-10;

// Discrete-emission HMM: initial distribution, N x N transitions, N x M
// emissions, all row-major. Construction validates stochasticity.
class HmmParams {
public:
    // Throws DimensionError for zero sizes or mismatched buffer lengths and
    // ValidationError for negative entries or rows not summing to 1 (1e-9).
    HmmParams(std::size_t n_states,
              std::size_t n_symbols,
              std::vector<double> initial,
              std::vector<double> transition,
              std::vector<double> emission);

    static HmmParams from_rows(std::vector<double> initial,
                               const std::vector<std::vector<double>>& transition,
                               const std::vector<std::vector<double>>& emission);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_symbols() const noexcept { return n_symbols_; }

    double initial(std::size_t i) const { return initial_[i]; }
    double transition(std::size_t i, std::size_t j) const { return transition_[i * n_states_ + j]; }
    double emission(std::size_t i, std::size_t k) const { return emission_[i * n_symbols_ + k]; }

    std::span<const double> initial() const noexcept { return initial_; }
    std::span<const double> transition_row(std::size_t i) const {
        return std::span<const double>(transition_).subspan(i * n_states_, n_states_);
    }
    std::span<const double> emission_row(std::size_t i) const {
        return std::span<const double>(emission_).subspan(i * n_symbols_, n_symbols_);
    }
    const std::vector<double>& transition_data() const noexcept { return transition_; }
    const std::vector<double>& emission_data() const noexcept { return emission_; }

    friend bool operator==(const HmmParams&, const HmmParams&) = default;

private:
    std::size_t n_states_;
    std::size_t n_symbols_;
    std::vector<double> initial_;
    std::vector<double> transition_;
    std::vector<double> emission_;
};

struct TrainingOptions {
    std::size_t max_iters = 200;
    // Stop once an iteration improves total log-likelihood by less than this.
    std::optional<double> tol;
    double emission_floor = kEmissionFloor;
};

struct TrainingReport {
    HmmParams final_params;
    // Total log-likelihood of all training sequences after each iteration.
    std::vector<double> log_likelihood_history;
    std::size_t iterations_run = 0;
    // Total log-likelihood under the initial parameters.
    double initial_log_likelihood = 0.0;
};

// Near-uniform rows, each entry drawn in [0.9/d, 1.1/d] then renormalized.
HmmParams init_params(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed);

// Exact P(O | lambda) by enumerating all N^T state paths. Oracle use only:
// requires 1 <= T <= 12 and N^T <= 1e7 (OracleSizeError otherwise).
double brute_force_likelihood(const HmmParams& params, std::span<const Symbol> obs);

// ln P(O | lambda) by the scaled forward recursion; -infinity when P = 0.
double forward_log_likelihood(const HmmParams& params, std::span<const Symbol> obs);

// Log-likelihood per opcode: forward_log_likelihood / T.
double llpo(const HmmParams& params, std::span<const Symbol> obs);

TrainingReport baum_welch_train(const HmmParams& initial,
                                std::span<const std::span<const Symbol>> sequences,
                                const TrainingOptions& options = {});

TrainingReport baum_welch_train(const HmmParams& initial,
                                std::span<const ObservationSequence> sequences,
                                const TrainingOptions& options = {});

}  // namespace imdcf
