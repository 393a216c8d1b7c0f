#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imdcf/family_ensemble.hpp"
#include "imdcf/hmm.hpp"
#include "imdcf/opcode_codec.hpp"
#include "imdcf/stream_classifier.hpp"

namespace imdcf {

enum class Split { train, validation, test };

struct SplitFractions {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct LabeledDataset {
    std::vector<ObservationSequence> sequences;  // every sequence carries a label
    std::map<Split, std::vector<std::size_t>> split;

    std::vector<ObservationSequence> part(Split which) const;
};

// Stratified per-label split of `labels`. Per label: train gets
// round(n * train), validation round(n * validation), test the rest; indices
// are listed in ascending order. Throws PreconditionError for bad fractions and
// StratificationError for a label with fewer than 3 samples.
std::map<Split, std::vector<std::size_t>> split_indices(std::span<const std::string> labels,
                                                        const SplitFractions& fractions,
                                                        std::uint64_t seed);

LabeledDataset split_dataset(LabeledDataset data, const SplitFractions& fractions, std::uint64_t seed);

// Samples sequences from the generator's joint distribution.
std::vector<ObservationSequence> synth_generate(const HmmParams& generator,
                                                std::size_t n_sequences,
                                                std::size_t length,
                                                std::uint64_t seed,
                                                const std::string& label);

// Ground-truth generators for the synthetic benchmark: two hidden states
// over 27 symbols, each family concentrating emission mass on its own block
// of signature symbols. Index 0 is "benign"; 1 and 2 are malware families;
// 3 is a family held out from training.
std::vector<std::pair<std::string, HmmParams>> benchmark_generators();

// Smallest total-variation distance between any emission row of `a` and any
// emission row of `b`.
double min_emission_tv(const HmmParams& a, const HmmParams& b);

enum class Task { detect, classify };

struct SampleResult {
    std::size_t sample_index = 0;
    std::string true_label;
    std::string predicted;         // task label: family name, NEW_FAMILY, benign, malware
    std::string predicted_family;  // always the family-level decision
    std::vector<double> llpo;      // score_family of the full sequence, by family name order
};

struct EvaluationReport {
    Task task = Task::classify;
    std::vector<std::string> families;       // registry order, matches SampleResult::llpo
    std::vector<std::string> row_labels;     // true labels
    std::vector<std::string> column_labels;  // predicted labels
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<SampleResult> per_sample;
    double accuracy = 0.0;
    double detection_accuracy = 0.0;
    double classification_accuracy = 0.0;
    // Mean of detection and classification accuracy over the same samples.
    double combined_accuracy = 0.0;
    std::optional<double> false_positive_rate;  // detection only
    std::optional<double> false_negative_rate;  // detection only
};

struct SweepResult {
    std::vector<std::size_t> lengths;
    std::vector<double> accuracy_at;       // NaN where no sequence is long enough
    std::vector<std::size_t> sample_count;
};

// Classification uses the registry's max_extension for tie breaking.
// Throws EmptyCorpusError on an empty test set.
EvaluationReport evaluate_detection(const ModelRegistry& registry,
                                    std::span<const ObservationSequence> test,
                                    std::size_t window_len = kDefaultWindowLen);

EvaluationReport evaluate_classification(const ModelRegistry& registry,
                                         std::span<const ObservationSequence> test,
                                         std::size_t window_len = kDefaultWindowLen);

// Accuracy after truncating every test sequence to its first L symbols.
// Throws PreconditionError for unsorted or zero lengths and EmptyCorpusError
// when every sequence is shorter than the smallest length.
SweepResult length_sweep(const ModelRegistry& registry,
                         std::span<const ObservationSequence> test,
                         std::span<const std::size_t> lengths,
                         std::size_t window_len = kDefaultWindowLen);

// Writes per_sample.csv, summary.csv, and confusion.csv. Throws IoError.
void export_report(const EvaluationReport& report, const std::filesystem::path& out_dir);

// Writes sweep.csv. Throws IoError.
void export_report(const SweepResult& sweep, const std::filesystem::path& out_dir);

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string format_double(double v);

}  // namespace imdcf
