#include "imdcf/stream_classifier.hpp"

#include <algorithm>
#include <limits>

#include "imdcf/error.hpp"

namespace imdcf {

namespace {

std::size_t model_alphabet(const ModelRegistry& registry) {
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& [name, model] : registry.families) {
        for (const auto& member : model.members) m = std::min(m, member.n_symbols());
    }
    return m;
}

void check_range(Symbol s, std::size_t alphabet) {
    if (s.index >= alphabet) {
        throw SymbolRangeError("symbol " + std::to_string(s.index) + " outside alphabet of size " +
                               std::to_string(alphabet));
    }
}

// Highest-scoring family among `candidates`; ties go to the first name.
std::string best_of(const std::set<std::string>& candidates, const std::map<std::string, double>& scores) {
    std::string best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& name : candidates) {
        const double s = scores.at(name);
        if (best.empty() || s > best_score) {
            best = name;
            best_score = s;
        }
    }
    return best;
}

double margin_over_runner_up(const std::string& winner, const std::map<std::string, double>& scores) {
    double runner_up = -std::numeric_limits<double>::infinity();
    for (const auto& [name, s] : scores) {
        if (name != winner) runner_up = std::max(runner_up, s);
    }
    return scores.at(winner) - runner_up;
}

std::string step_vote(const StepDecision& d) {
    switch (d.verdict) {
        case Verdict::assigned: return *d.family;
        case Verdict::new_family: return kNewFamily;
        case Verdict::pending:
            return d.resolution ? *d.resolution : best_of(d.accepting_families, d.per_family_scores);
        case Verdict::warmup: break;
    }
    return {};
}

}  // namespace

const char* verdict_name(Verdict v) noexcept {
    switch (v) {
        case Verdict::warmup: return "warmup";
        case Verdict::pending: return "pending";
        case Verdict::assigned: return "assigned";
        case Verdict::new_family: return "new_family";
    }
    return "unknown";
}

StreamState::StreamState(const ModelRegistry& registry, std::size_t window_len, SeedWindows seeds)
    : registry_(&registry), window_len_(window_len), seeds_(std::move(seeds)) {
    if (window_len_ == 0) throw PreconditionError("window_len must be at least 1");
    if (registry.families.empty()) throw PreconditionError("registry holds no families");
    const std::size_t alphabet = model_alphabet(registry);

    for (const auto& [name, seed] : seeds_) {
        if (!registry.families.contains(name)) {
            throw UnknownFamilyError("seed window for unknown family '" + name + "'");
        }
        if (!seed.empty() && seed.size() != window_len_ - 1) {
            throw PreconditionError("seed window for '" + name + "' must hold window_len - 1 = " +
                                    std::to_string(window_len_ - 1) + " symbols");
        }
        for (Symbol s : seed) check_range(s, alphabet);
    }
    for (const auto& [name, model] : registry.families) {
        const auto it = seeds_.find(name);
        auto& window = windows_[name];
        if (it != seeds_.end() && !it->second.empty()) {
            window = it->second;
            last_scores_[name] = score_family(model, window);
        }
    }
}

const StepDecision& StreamState::push_symbol(Symbol sym) {
    check_range(sym, model_alphabet(*registry_));
    live_buffer_.push_back(sym);

    StepDecision d;
    bool all_full = true;
    for (const auto& [name, model] : registry_->families) {
        auto& window = windows_[name];
        if (window.size() == window_len_) window.erase(window.begin());
        window.push_back(sym);

        const double score = score_family(model, window);
        const auto prev = last_scores_.find(name);
        d.delta[name] = prev == last_scores_.end() ? 0.0 : score - prev->second;
        last_scores_[name] = score;
        d.per_family_scores[name] = score;
        if (score >= model.threshold) d.accepting_families.insert(name);
        if (window.size() < window_len_) all_full = false;
    }

    if (!all_full) {
        d.verdict = Verdict::warmup;
    } else if (d.accepting_families.empty()) {
        d.verdict = Verdict::new_family;
    } else if (d.accepting_families.size() == 1) {
        d.verdict = Verdict::assigned;
        d.family = *d.accepting_families.begin();
    } else {
        d.verdict = Verdict::pending;
    }
    decision_log_.push_back(std::move(d));
    return decision_log_.back();
}

std::size_t StreamState::history_size(const std::string& family) const {
    const auto it = seeds_.find(family);
    return (it == seeds_.end() ? 0 : it->second.size()) + live_buffer_.size();
}

std::vector<Symbol> StreamState::history_tail(const std::string& family, std::size_t length) const {
    std::vector<Symbol> out;
    out.reserve(length);
    const std::size_t from_live = std::min(length, live_buffer_.size());
    const std::size_t from_seed = length - from_live;
    if (from_seed > 0) {
        const auto& seed = seeds_.at(family);
        out.insert(out.end(), seed.end() - static_cast<std::ptrdiff_t>(from_seed), seed.end());
    }
    out.insert(out.end(), live_buffer_.end() - static_cast<std::ptrdiff_t>(from_live), live_buffer_.end());
    return out;
}

double StreamState::new_family_margin(const std::map<std::string, double>& scores) const {
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& [name, s] : scores) {
        margin = std::min(margin, registry_->family(name).threshold - s);
    }
    return margin;
}

ClassificationDecision StreamState::resolve_tie(std::size_t max_extension) {
    if (decision_log_.empty() || decision_log_.back().verdict != Verdict::pending) {
        throw StateError("resolve_tie requires the latest verdict to be Pending");
    }
    StepDecision& step = decision_log_.back();

    std::set<std::string> contenders = step.accepting_families;
    std::map<std::string, double> round_scores;
    for (const auto& name : contenders) round_scores[name] = step.per_family_scores.at(name);

    std::size_t length = window_len_;
    std::size_t rounds = 0;
    while (contenders.size() > 1) {
        const std::size_t target = std::min(length * 2, max_extension);
        bool grows = false;
        for (const auto& name : contenders) {
            const std::size_t avail = history_size(name);
            if (std::min(target, avail) > std::min(length, avail)) grows = true;
        }
        if (!grows) break;
        length = target;
        ++rounds;

        std::set<std::string> remaining;
        round_scores.clear();
        for (const auto& name : contenders) {
            const FamilyModel& model = registry_->family(name);
            const auto extended = history_tail(name, std::min(length, history_size(name)));
            const auto votes = member_votes(model, extended);
            std::size_t accepts = 0;
            double sum = 0.0;
            for (double v : votes) {
                sum += v;
                if (v >= model.threshold) ++accepts;
            }
            round_scores[name] = sum / static_cast<double>(votes.size());
            if (2 * accepts > votes.size()) remaining.insert(name);
        }
        contenders = std::move(remaining);
        if (length >= max_extension) break;
    }

    ClassificationDecision out;
    if (contenders.empty()) {
        out.final_family = kNewFamily;
        out.confidence = new_family_margin(round_scores);
    } else {
        out.final_family = best_of(contenders, round_scores);
        out.confidence = margin_over_runner_up(out.final_family, round_scores);
    }
    out.symbols_consumed = live_buffer_.size();
    out.tie_rounds = rounds;
    step.resolution = out.final_family;
    tie_rounds_ += rounds;
    return out;
}

ClassificationDecision StreamState::conclude() const {
    if (live_buffer_.empty()) throw EmptySequenceError("no symbols have been pushed");

    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::size_t> last_seen;
    for (std::size_t i = 0; i < decision_log_.size(); ++i) {
        const std::string vote = step_vote(decision_log_[i]);
        if (vote.empty()) continue;
        ++counts[vote];
        last_seen[vote] = i;
    }

    const StepDecision& last = decision_log_.back();
    ClassificationDecision out;
    if (counts.empty()) {
        // Never left warmup: judge the partial windows as they stand.
        if (last.accepting_families.empty()) {
            out.final_family = kNewFamily;
        } else {
            out.final_family = best_of(last.accepting_families, last.per_family_scores);
        }
    } else {
        std::size_t best_count = 0;
        for (const auto& [label, count] : counts) {
            if (count > best_count ||
                (count == best_count && last_seen.at(label) > last_seen.at(out.final_family))) {
                out.final_family = label;
                best_count = count;
            }
        }
    }

    if (out.final_family == kNewFamily) {
        out.confidence = new_family_margin(last.per_family_scores);
    } else if (last.per_family_scores.size() > 1) {
        out.confidence = margin_over_runner_up(out.final_family, last.per_family_scores);
    } else {
        out.confidence = last.per_family_scores.at(out.final_family) -
                         registry_->family(out.final_family).threshold;
    }
    out.symbols_consumed = live_buffer_.size();
    out.tie_rounds = tie_rounds_;
    return out;
}

ClassificationDecision classify_sequence(const ModelRegistry& registry,
                                         std::span<const Symbol> obs,
                                         std::size_t window_len,
                                         std::size_t max_extension) {
    if (obs.empty()) throw EmptySequenceError("cannot classify an empty sequence");
    StreamState state(registry, window_len);
    for (Symbol s : obs) {
        if (state.push_symbol(s).verdict == Verdict::pending) state.resolve_tie(max_extension);
    }
    return state.conclude();
}

const char* detection_name(DetectionVerdict v) noexcept {
    return v == DetectionVerdict::benign ? "benign" : "malware";
}

DetectionVerdict detection_of(const ClassificationDecision& decision) noexcept {
    return decision.final_family == kBenignFamily ? DetectionVerdict::benign : DetectionVerdict::malware;
}

DetectionVerdict detect(const ModelRegistry& registry,
                        std::span<const Symbol> obs,
                        std::size_t window_len,
                        std::size_t max_extension) {
    if (!registry.families.contains(kBenignFamily)) {
        throw UnknownFamilyError("detection needs a family named '" + kBenignFamily + "'");
    }
    return detection_of(classify_sequence(registry, obs, window_len, max_extension));
}

}  // namespace imdcf
