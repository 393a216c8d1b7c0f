#include "imdcf/family_ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "imdcf/error.hpp"
#include "imdcf/random.hpp"

namespace imdcf {

std::size_t subset_cap(std::size_t family_size) noexcept {
    return std::max<std::size_t>(1, (3 * family_size + 9) / 10);
}

const FamilyModel& ModelRegistry::family(const std::string& name) const {
    const auto it = families.find(name);
    if (it == families.end()) throw UnknownFamilyError("no family named '" + name + "' in registry");
    return it->second;
}

std::vector<std::string> ModelRegistry::family_names() const {
    std::vector<std::string> names;
    names.reserve(families.size());
    for (const auto& [name, model] : families) names.push_back(name);
    return names;
}

void ModelRegistry::validate() const {
    if (families.empty()) throw ValidationError("registry holds no families");
    for (const auto& [name, model] : families) {
        if (name != model.name) {
            throw ValidationError("registry key '" + name + "' does not match family '" + model.name + "'");
        }
        if (model.members.empty()) throw ValidationError("family '" + name + "' has no members");
        if (!std::isfinite(model.threshold)) {
            throw ValidationError("family '" + name + "' has no finite threshold");
        }
        for (const auto& member : model.members) {
            if (member.n_symbols() != encoding.alphabet_size()) {
                throw ValidationError("family '" + name + "' member alphabet differs from the encoding");
            }
        }
        std::set<std::string> seen;
        for (const auto& subset : model.subset_manifest) {
            for (const auto& id : subset) {
                if (!seen.insert(id).second) {
                    throw ValidationError("family '" + name + "' reuses source '" + id + "' across members");
                }
            }
        }
    }
}

FamilyModel train_family(std::string name,
                         std::span<const ObservationSequence> sequences,
                         std::size_t ensemble_size,
                         std::size_t subset_size,
                         const HmmConfig& hmm_config,
                         std::size_t n_symbols) {
    if (ensemble_size == 0 || subset_size == 0) {
        throw PreconditionError("ensemble_size and subset_size must be at least 1");
    }
    const std::size_t total = sequences.size();
    if (subset_size > subset_cap(total)) {
        throw CapViolationError("family '" + name + "': subset of " + std::to_string(subset_size) +
                                " exceeds 30% of " + std::to_string(total) + " files");
    }
    if (ensemble_size * subset_size > total) {
        throw SubsetExhaustedError("family '" + name + "': " + std::to_string(ensemble_size) +
                                   " members x " + std::to_string(subset_size) +
                                   " files needs more than " + std::to_string(total) + " files");
    }

    std::vector<std::string> ids(total);
    std::set<std::string> unique_ids;
    for (std::size_t i = 0; i < total; ++i) {
        ids[i] = sequences[i].source_id.empty() ? "#" + std::to_string(i) : sequences[i].source_id;
        if (!unique_ids.insert(ids[i]).second) {
            throw PreconditionError("family '" + name + "': duplicate source id '" + ids[i] + "'");
        }
    }

    rng::Engine engine(rng::derive_seed(hmm_config.seed, 0));
    const std::vector<std::size_t> order = rng::shuffled_indices(total, engine);

    FamilyModel model;
    model.name = std::move(name);
    TrainingOptions options;
    options.max_iters = hmm_config.max_iters;

    for (std::size_t member = 0; member < ensemble_size; ++member) {
        std::vector<std::span<const Symbol>> subset;
        std::vector<std::string> manifest;
        std::size_t symbol_count = 0;
        for (std::size_t k = member * subset_size; k < (member + 1) * subset_size; ++k) {
            const auto& seq = sequences[order[k]];
            subset.emplace_back(seq.symbols);
            manifest.push_back(ids[order[k]]);
            symbol_count += seq.size();
        }
        const HmmParams start =
            init_params(hmm_config.n_states, n_symbols, rng::derive_seed(hmm_config.seed, member + 1));
        TrainingReport report =
            baum_welch_train(start, std::span<const std::span<const Symbol>>(subset), options);
        const double final_ll = report.log_likelihood_history.empty()
                                    ? report.initial_log_likelihood
                                    : report.log_likelihood_history.back();
        model.members.push_back(std::move(report.final_params));
        model.subset_manifest.push_back(std::move(manifest));
        model.member_train_llpo.push_back(final_ll / static_cast<double>(symbol_count));
    }
    return model;
}

std::vector<double> member_votes(const FamilyModel& model, std::span<const Symbol> obs) {
    std::vector<double> scores;
    scores.reserve(model.members.size());
    for (const auto& member : model.members) scores.push_back(llpo(member, obs));
    return scores;
}

double score_family(const FamilyModel& model, std::span<const Symbol> obs) {
    const auto scores = member_votes(model, obs);
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

double interpolated_quantile(std::vector<double> values, double fraction) {
    if (values.empty()) throw EmptyCorpusError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = fraction * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = h - static_cast<double>(lo);
    if (w == 0.0) return values[lo];
    return values[lo] + w * (values[hi] - values[lo]);
}

FamilyModel calibrate_threshold(FamilyModel model,
                                std::span<const ObservationSequence> validation,
                                double percentile) {
    if (validation.empty()) {
        throw EmptyCorpusError("family '" + model.name + "': no validation sequences to calibrate on");
    }
    if (!(percentile >= 0.0 && percentile < 1.0)) {
        throw PreconditionError("threshold percentile must lie in [0, 1)");
    }
    std::vector<double> scores;
    scores.reserve(validation.size());
    for (const auto& seq : validation) scores.push_back(score_family(model, seq.symbols));
    const double threshold = interpolated_quantile(std::move(scores), percentile);
    if (!std::isfinite(threshold)) {
        throw ValidationError("family '" + model.name + "': calibrated threshold is not finite");
    }
    model.threshold = threshold;
    return model;
}

}  // namespace imdcf
