#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "imdcf/family_ensemble.hpp"
#include "imdcf/opcode_codec.hpp"

namespace imdcf {

inline const std::string kNewFamily = "NEW_FAMILY";
inline constexpr std::size_t kDefaultWindowLen = 100;
inline constexpr std::size_t kDefaultMaxExtension = 2000;

enum class Verdict { warmup, pending, assigned, new_family };

const char* verdict_name(Verdict v) noexcept;

struct StepDecision {
    Verdict verdict = Verdict::warmup;
    std::optional<std::string> family;  // set for Verdict::assigned
    std::map<std::string, double> per_family_scores;
    std::set<std::string> accepting_families;
    // Current window LLPO minus previous window LLPO; 0 on the first push.
    std::map<std::string, double> delta;
    // Outcome of resolve_tie for a pending step.
    std::optional<std::string> resolution;
};

struct ClassificationDecision {
    std::string final_family;  // family name or kNewFamily
    // Winner LLPO minus runner-up LLPO. For kNewFamily: how far the closest
    // family sits below its threshold (negative if some family scored above).
    double confidence = 0.0;
    std::size_t symbols_consumed = 0;
    std::size_t tie_rounds = 0;

    bool is_new_family() const noexcept { return final_family == kNewFamily; }
    friend bool operator==(const ClassificationDecision&, const ClassificationDecision&) = default;
};

using SeedWindows = std::map<std::string, std::vector<Symbol>>;

// Incremental classification state for one sample. Each family keeps a
// sliding window of the most recent window_len symbols; until every window is
// full the verdict is Warmup. The registry must outlive the state.
class StreamState {
public:
    // Seeds must be empty or exactly window_len - 1 symbols long.
    // Throws UnknownFamilyError, SymbolRangeError, PreconditionError.
    StreamState(const ModelRegistry& registry, std::size_t window_len, SeedWindows seeds = {});

    // Slides every family window by one symbol, rescores, and applies the
    // threshold rules: none accepting -> NewFamily, one -> Assigned, several
    // -> Pending. Throws SymbolRangeError.
    const StepDecision& push_symbol(Symbol sym);

    // Breaks a Pending tie by scoring longer windows drawn from the symbols
    // already seen (doubling per round, capped at max_extension). Each round a
    // family stays in contention when a strict majority of its members accept.
    // Throws StateError unless the latest verdict is Pending.
    ClassificationDecision resolve_tie(std::size_t max_extension = kDefaultMaxExtension);

    // Final decision for everything pushed so far: majority over decisive
    // step verdicts (a pending step counts as its resolution, or as its
    // highest-scoring accepting family when unresolved). With no decisive
    // step yet, the partial windows are judged directly.
    // Throws EmptySequenceError when nothing was pushed.
    ClassificationDecision conclude() const;

    std::size_t window_len() const noexcept { return window_len_; }
    const std::map<std::string, std::vector<Symbol>>& windows() const noexcept { return windows_; }
    const std::vector<Symbol>& live_buffer() const noexcept { return live_buffer_; }
    const std::map<std::string, double>& last_scores() const noexcept { return last_scores_; }
    const std::vector<StepDecision>& decision_log() const noexcept { return decision_log_; }
    const ModelRegistry& registry() const noexcept { return *registry_; }

private:
    std::vector<Symbol> history_tail(const std::string& family, std::size_t length) const;
    std::size_t history_size(const std::string& family) const;
    double new_family_margin(const std::map<std::string, double>& scores) const;

    const ModelRegistry* registry_;
    std::size_t window_len_;
    SeedWindows seeds_;
    std::map<std::string, std::vector<Symbol>> windows_;
    std::vector<Symbol> live_buffer_;
    std::map<std::string, double> last_scores_;
    std::vector<StepDecision> decision_log_;
    std::size_t tie_rounds_ = 0;
};

// Feeds obs through a fresh StreamState, resolving every Pending step, and
// returns conclude(). Throws EmptySequenceError on empty input.
ClassificationDecision classify_sequence(const ModelRegistry& registry,
                                         std::span<const Symbol> obs,
                                         std::size_t window_len = kDefaultWindowLen,
                                         std::size_t max_extension = kDefaultMaxExtension);

enum class DetectionVerdict { benign, malware };

const char* detection_name(DetectionVerdict v) noexcept;

// Assigned("benign") -> benign; any other family or NewFamily -> malware.
DetectionVerdict detection_of(const ClassificationDecision& decision) noexcept;

// Throws UnknownFamilyError when the registry has no "benign" family.
DetectionVerdict detect(const ModelRegistry& registry,
                        std::span<const Symbol> obs,
                        std::size_t window_len = kDefaultWindowLen,
                        std::size_t max_extension = kDefaultMaxExtension);

}  // namespace imdcf
