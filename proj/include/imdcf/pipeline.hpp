#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imdcf/config.hpp"
#include "imdcf/eval_harness.hpp"
#include "imdcf/family_ensemble.hpp"
#include "imdcf/hmm.hpp"
#include "imdcf/opcode_codec.hpp"

namespace imdcf {

// Traces grouped by family label. On disk: one subdirectory per family, one
// trace file per sample.
struct Corpus {
    std::map<std::string, std::vector<OpcodeTrace>> families;

    std::size_t size() const;
};

// Reads every regular, non-hidden file of every subdirectory, in name order.
// Source ids are "<family>/<file name>". Throws LayoutError when `dir` is not a
// directory or a family directory is empty; ParseError for bad traces.
Corpus load_corpus(const std::filesystem::path& dir);

// Encodes the whole corpus with `table` and applies the configured stratified
// split. Sequence order: families by name, then traces in corpus order.
LabeledDataset encode_corpus(const Corpus& corpus, const EncodingTable& table, const RunConfig& config);

// Non-overlapping window_len chunks of each sequence (remainder dropped);
// sequences shorter than window_len are kept whole.
std::vector<ObservationSequence> window_chunks(std::span<const ObservationSequence> sequences,
                                               std::size_t window_len);

struct FamilyTrainingSummary {
    std::string name;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::size_t n_test = 0;
    std::vector<double> member_train_llpo;
    double threshold = 0.0;
};

struct TrainingOutcome {
    ModelRegistry registry;
    std::vector<FamilyTrainingSummary> summary;
};

// Splits each family, builds the alphabet from the pooled training split,
// trains every family ensemble, and calibrates each threshold on window-length
// chunks of the family's validation split. Throws LayoutError for fewer than
// two families (or no "benign" family when require_benign is set).
TrainingOutcome train_registry(const Corpus& corpus, const RunConfig& config, bool require_benign = false);

// Fixed 27-mnemonic vocabulary used for synthetic traces.
const std::array<std::string_view, 27>& synthetic_vocabulary();

OpcodeTrace to_trace(const ObservationSequence& seq);

struct SynthFamilySpec {
    std::string name;
    HmmParams generator;
    std::size_t n_sequences = 0;
    std::size_t length = 0;
};

// JSON: {"families": [{"name", "n_sequences", "length", "initial",
// "transition", "emission"}, ...]}. Throws ParseError for malformed JSON and
// ValidationError for invalid generators.
std::vector<SynthFamilySpec> parse_synth_spec(std::string_view text);

// The benchmark generators (held-out family excluded) as a synth spec.
std::vector<SynthFamilySpec> benchmark_synth_spec(std::size_t n_sequences, std::size_t length);

// In-memory corpus sampled from the specs.
Corpus synthesize_corpus(std::span<const SynthFamilySpec> specs, std::uint64_t seed);

// Writes <out_dir>/<family>/<family>_<index>.trace, one mnemonic per line.
// Returns the number of files written. Throws IoError.
std::size_t write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir);

}  // namespace imdcf
