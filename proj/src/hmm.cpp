#include "imdcf/hmm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "imdcf/error.hpp"
#include "imdcf/random.hpp"

namespace imdcf {

namespace {

void check_stochastic(std::span<const double> row, const char* what, std::size_t index) {
    double sum = 0.0;
    for (double v : row) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string(what) + " row " + std::to_string(index) +
                                  " has a negative or non-finite entry");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
        throw ValidationError(std::string(what) + " row " + std::to_string(index) +
                              " sums to " + std::to_string(sum) + ", not 1");
    }
}

void check_symbols(const HmmParams& params, std::span<const Symbol> obs) {
    for (Symbol s : obs) {
        if (s.index >= params.n_symbols()) {
            throw SymbolRangeError("symbol " + std::to_string(s.index) +
                                   " outside alphabet of size " +
                                   std::to_string(params.n_symbols()));
        }
    }
}

// Sums log scale factors. Factors are multiplied together until the running
// product gets small, which keeps std::log off the per-symbol path.
class LogScaleSum {
public:
    void add(double c) {
        if (c < kSmall) {
            log_ += std::log(c);
            return;
        }
        product_ *= c;
        if (product_ < kSmall) {
            log_ += std::log(product_);
            product_ = 1.0;
        }
    }
    double value() const { return log_ + std::log(product_); }

private:
    static constexpr double kSmall = 1e-150;
    double log_ = 0.0;
    double product_ = 1.0;
};

// Normalized row of `counts` maximizing sum_k counts[k] * log(b[k]) subject to
// b[k] >= floor. Entries whose unconstrained share falls below the floor are
// pinned to it and the remaining mass is split proportionally.
void floored_row(std::span<const double> counts, double floor, std::span<double> out) {
    const std::size_t m = counts.size();
    if (floor * static_cast<double>(m) >= 1.0) {
        for (double& v : out) v = 1.0 / static_cast<double>(m);
        return;
    }
    std::vector<bool> pinned(m, false);
    std::size_t n_pinned = 0;
    for (;;) {
        double free_counts = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (!pinned[k]) free_counts += counts[k];
        }
        const double free_mass = 1.0 - static_cast<double>(n_pinned) * floor;
        bool changed = false;
        for (std::size_t k = 0; k < m; ++k) {
            if (pinned[k]) continue;
            const double v = free_counts > 0.0 ? free_mass * counts[k] / free_counts : 0.0;
            if (v < floor) {
                pinned[k] = true;
                ++n_pinned;
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t k = 0; k < m; ++k) {
                out[k] = pinned[k] ? floor : free_mass * counts[k] / free_counts;
            }
            return;
        }
    }
}

struct Accumulators {
    std::vector<double> initial;
    std::vector<double> transition;
    std::vector<double> emission;
    double log_likelihood = 0.0;

    Accumulators(std::size_t n, std::size_t m)
        : initial(n, 0.0), transition(n * n, 0.0), emission(n * m, 0.0) {}
};

struct Workspace {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> scale;
};

// One forward-backward pass over `obs`, adding expected counts into `acc`.
// Returns ln P(obs); sequences with zero probability contribute no counts.
double accumulate_sequence(const HmmParams& p, std::span<const Symbol> obs,
                           Accumulators& acc, Workspace& ws) {
    const std::size_t n = p.n_states();
    const std::size_t t_len = obs.size();
    ws.alpha.assign(t_len * n, 0.0);
    ws.beta.assign(t_len * n, 0.0);
    ws.scale.assign(t_len, 0.0);
    double* alpha = ws.alpha.data();
    double* beta = ws.beta.data();
    double* scale = ws.scale.data();

    LogScaleSum log_sum;
    for (std::size_t t = 0; t < t_len; ++t) {
        const std::size_t o = obs[t].index;
        double* a_t = alpha + t * n;
        double c = 0.0;
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                a_t[i] = p.initial(i) * p.emission(i, o);
                c += a_t[i];
            }
        } else {
            const double* a_prev = alpha + (t - 1) * n;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += a_prev[i] * p.transition(i, j);
                a_t[j] = s * p.emission(j, o);
                c += a_t[j];
            }
        }
        if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
        const double inv = 1.0 / c;
        for (std::size_t i = 0; i < n; ++i) a_t[i] *= inv;
        scale[t] = c;
        log_sum.add(c);
    }

    double* b_last = beta + (t_len - 1) * n;
    for (std::size_t i = 0; i < n; ++i) b_last[i] = 1.0;
    for (std::size_t t = t_len - 1; t-- > 0;) {
        const std::size_t o_next = obs[t + 1].index;
        const double* b_next = beta + (t + 1) * n;
        double* b_t = beta + t * n;
        const double inv = 1.0 / scale[t + 1];
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                s += p.transition(i, j) * p.emission(j, o_next) * b_next[j];
            }
            b_t[i] = s * inv;
        }
    }

    const std::size_t m = p.n_symbols();
    for (std::size_t t = 0; t < t_len; ++t) {
        const std::size_t o = obs[t].index;
        const double* a_t = alpha + t * n;
        const double* b_t = beta + t * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double gamma = a_t[i] * b_t[i];
            acc.emission[i * m + o] += gamma;
            if (t == 0) acc.initial[i] += gamma;
        }
        if (t + 1 < t_len) {
            const std::size_t o_next = obs[t + 1].index;
            const double* b_next = beta + (t + 1) * n;
            const double inv = 1.0 / scale[t + 1];
            for (std::size_t i = 0; i < n; ++i) {
                const double ai = a_t[i] * inv;
                for (std::size_t j = 0; j < n; ++j) {
                    acc.transition[i * n + j] +=
                        ai * p.transition(i, j) * p.emission(j, o_next) * b_next[j];
                }
            }
        }
    }
    return log_sum.value();
}

Accumulators expectation_step(const HmmParams& p,
                              std::span<const std::span<const Symbol>> sequences,
                              Workspace& ws) {
    Accumulators acc(p.n_states(), p.n_symbols());
    for (const auto& seq : sequences) {
        acc.log_likelihood += accumulate_sequence(p, seq, acc, ws);
    }
    return acc;
}

// Rows with zero expected occupancy keep their previous values.
HmmParams maximization_step(const HmmParams& p, const Accumulators& acc, double emission_floor) {
    const std::size_t n = p.n_states();
    const std::size_t m = p.n_symbols();

    std::vector<double> initial(p.initial().begin(), p.initial().end());
    double init_total = 0.0;
    for (double v : acc.initial) init_total += v;
    if (init_total > 0.0) {
        for (std::size_t i = 0; i < n; ++i) initial[i] = acc.initial[i] / init_total;
    }

    std::vector<double> transition = p.transition_data();
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += acc.transition[i * n + j];
        if (!(total > 0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) transition[i * n + j] = acc.transition[i * n + j] / total;
    }

    std::vector<double> emission = p.emission_data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> counts(acc.emission.data() + i * m, m);
        double total = 0.0;
        for (double v : counts) total += v;
        if (!(total > 0.0)) continue;
        floored_row(counts, emission_floor, std::span<double>(emission.data() + i * m, m));
    }

    return HmmParams(n, m, std::move(initial), std::move(transition), std::move(emission));
}

}  // namespace

HmmParams::HmmParams(std::size_t n_states,
                     std::size_t n_symbols,
                     std::vector<double> initial,
                     std::vector<double> transition,
                     std::vector<double> emission)
    : n_states_(n_states),
      n_symbols_(n_symbols),
      initial_(std::move(initial)),
      transition_(std::move(transition)),
      emission_(std::move(emission)) {
    if (n_states_ == 0 || n_symbols_ == 0) {
        throw DimensionError("HMM needs at least one state and one symbol");
    }
    if (initial_.size() != n_states_ || transition_.size() != n_states_ * n_states_ ||
        emission_.size() != n_states_ * n_symbols_) {
        throw DimensionError("HMM parameter buffers do not match N=" + std::to_string(n_states_) +
                             ", M=" + std::to_string(n_symbols_));
    }
    check_stochastic(initial_, "initial", 0);
    for (std::size_t i = 0; i < n_states_; ++i) {
        check_stochastic(transition_row(i), "transition", i);
        check_stochastic(emission_row(i), "emission", i);
    }
}

HmmParams HmmParams::from_rows(std::vector<double> initial,
                               const std::vector<std::vector<double>>& transition,
                               const std::vector<std::vector<double>>& emission) {
    const std::size_t n = initial.size();
    if (transition.size() != n || emission.size() != n || n == 0) {
        throw DimensionError("HMM row counts disagree with the initial distribution");
    }
    const std::size_t m = emission.front().size();
    std::vector<double> a;
    std::vector<double> b;
    a.reserve(n * n);
    b.reserve(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        if (transition[i].size() != n || emission[i].size() != m) {
            throw DimensionError("ragged HMM matrix at row " + std::to_string(i));
        }
        a.insert(a.end(), transition[i].begin(), transition[i].end());
        b.insert(b.end(), emission[i].begin(), emission[i].end());
    }
    return HmmParams(n, m, std::move(initial), std::move(a), std::move(b));
}

HmmParams init_params(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed) {
    if (n_states == 0 || n_symbols == 0) {
        throw DimensionError("init_params needs n_states >= 1 and n_symbols >= 1");
    }
    rng::Engine engine(seed);
    auto draw_row = [&](std::size_t d) {
        std::vector<double> row(d);
        const double base = 1.0 / static_cast<double>(d);
        double sum = 0.0;
        for (double& v : row) {
            v = base + (2.0 * rng::unit_uniform(engine) - 1.0) * 0.1 * base;
            sum += v;
        }
        for (double& v : row) v /= sum;
        return row;
    };

    std::vector<double> initial = draw_row(n_states);
    std::vector<double> transition;
    std::vector<double> emission;
    transition.reserve(n_states * n_states);
    emission.reserve(n_states * n_symbols);
    for (std::size_t i = 0; i < n_states; ++i) {
        const auto row = draw_row(n_states);
        transition.insert(transition.end(), row.begin(), row.end());
    }
    for (std::size_t i = 0; i < n_states; ++i) {
        const auto row = draw_row(n_symbols);
        emission.insert(emission.end(), row.begin(), row.end());
    }
    return HmmParams(n_states, n_symbols, std::move(initial), std::move(transition),
                     std::move(emission));
}

double brute_force_likelihood(const HmmParams& params, std::span<const Symbol> obs) {
    constexpr std::size_t kMaxLength = 12;
    constexpr double kMaxPaths = 1e7;
    if (obs.empty() || obs.size() > kMaxLength) {
        throw OracleSizeError("brute-force oracle needs 1 <= T <= 12, got T=" +
                              std::to_string(obs.size()));
    }
    const std::size_t n = params.n_states();
    if (std::pow(static_cast<double>(n), static_cast<double>(obs.size())) > kMaxPaths) {
        throw OracleSizeError("brute-force oracle limited to 1e7 state paths");
    }
    check_symbols(params, obs);

    const std::size_t t_len = obs.size();
    std::vector<std::size_t> path(t_len, 0);
    double total = 0.0;
    for (;;) {
        double prob = params.initial(path[0]) * params.emission(path[0], obs[0].index);
        for (std::size_t t = 1; t < t_len; ++t) {
            prob *= params.transition(path[t - 1], path[t]) * params.emission(path[t], obs[t].index);
        }
        total += prob;

        std::size_t pos = t_len;
        while (pos > 0) {
            --pos;
            if (++path[pos] < n) break;
            path[pos] = 0;
            if (pos == 0) return total;
        }
    }
}

double forward_log_likelihood(const HmmParams& params, std::span<const Symbol> obs) {
    if (obs.empty()) throw EmptySequenceError("cannot score an empty observation sequence");
    check_symbols(params, obs);

    const std::size_t n = params.n_states();
    std::vector<double> alpha(n);
    std::vector<double> next(n);
    LogScaleSum log_sum;

    for (std::size_t t = 0; t < obs.size(); ++t) {
        const std::size_t o = obs[t].index;
        double c = 0.0;
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                next[i] = params.initial(i) * params.emission(i, o);
                c += next[i];
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += alpha[i] * params.transition(i, j);
                next[j] = s * params.emission(j, o);
                c += next[j];
            }
        }
        if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
        const double inv = 1.0 / c;
        for (std::size_t i = 0; i < n; ++i) alpha[i] = next[i] * inv;
        log_sum.add(c);
    }
    return log_sum.value();
}

double llpo(const HmmParams& params, std::span<const Symbol> obs) {
    const double ll = forward_log_likelihood(params, obs);
    return ll / static_cast<double>(obs.size());
}

TrainingReport baum_welch_train(const HmmParams& initial,
                                std::span<const std::span<const Symbol>> sequences,
                                const TrainingOptions& options) {
    if (sequences.empty()) throw EmptyCorpusError("Baum-Welch needs at least one sequence");
    for (const auto& seq : sequences) {
        if (seq.empty()) throw EmptySequenceError("Baum-Welch training sequence is empty");
        check_symbols(initial, seq);
    }

    Workspace ws;
    HmmParams current = initial;
    Accumulators acc = expectation_step(current, sequences, ws);
    TrainingReport report{current, {}, 0, acc.log_likelihood};
    report.log_likelihood_history.reserve(options.max_iters);

    double previous = acc.log_likelihood;
    for (std::size_t it = 0; it < options.max_iters; ++it) {
        current = maximization_step(current, acc, options.emission_floor);
        acc = expectation_step(current, sequences, ws);
        report.log_likelihood_history.push_back(acc.log_likelihood);
        ++report.iterations_run;
        if (options.tol && acc.log_likelihood - previous < *options.tol) break;
        previous = acc.log_likelihood;
    }
    report.final_params = std::move(current);
    return report;
}

TrainingReport baum_welch_train(const HmmParams& initial,
                                std::span<const ObservationSequence> sequences,
                                const TrainingOptions& options) {
    std::vector<std::span<const Symbol>> views;
    views.reserve(sequences.size());
    for (const auto& seq : sequences) views.emplace_back(seq.symbols);
    return baum_welch_train(initial, std::span<const std::span<const Symbol>>(views), options);
}

}  // namespace imdcf
