#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "imdcf/config.hpp"
#include "imdcf/hmm.hpp"
#include "imdcf/opcode_codec.hpp"

namespace imdcf {

inline const std::string kBenignFamily = "benign";

// Largest subset a member may train on: ceil(0.30 * family size).
std::size_t subset_cap(std::size_t family_size) noexcept;

// One-class ensemble for a single family. Members train on pairwise disjoint
// subsets; the family score of a sequence is the mean member LLPO.
struct FamilyModel {
    std::string name;
    std::vector<HmmParams> members;
    double threshold = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::string>> subset_manifest;
    // Final training log-likelihood per symbol, one entry per member.
    std::vector<double> member_train_llpo;

    friend bool operator==(const FamilyModel&, const FamilyModel&) = default;
};

struct ModelRegistry {
    std::map<std::string, FamilyModel> families;
    EncodingTable encoding;
    RunConfig config;

    const FamilyModel& family(const std::string& name) const;  // UnknownFamilyError
    std::vector<std::string> family_names() const;

    // Checks family names, member alphabets, and threshold finiteness.
    void validate() const;

    friend bool operator==(const ModelRegistry&, const ModelRegistry&) = default;
};

struct HmmConfig {
    std::size_t n_states = 2;
    std::size_t max_iters = 200;
    std::uint64_t seed = 0;
};

// Shuffles `sequences` by seed and trains member i on the slice
// [i * subset_size, (i + 1) * subset_size). Threshold stays -inf until
// calibrate_threshold runs.
FamilyModel train_family(std::string name,
                         std::span<const ObservationSequence> sequences,
                         std::size_t ensemble_size,
                         std::size_t subset_size,
                         const HmmConfig& hmm_config,
                         std::size_t n_symbols);

std::vector<double> member_votes(const FamilyModel& model, std::span<const Symbol> obs);

// Mean of member_votes, summed left to right over members.
double score_family(const FamilyModel& model, std::span<const Symbol> obs);

// Linear-interpolation quantile of score_family over in-family validation
// sequences.
FamilyModel calibrate_threshold(FamilyModel model,
                                std::span<const ObservationSequence> validation,
                                double percentile = 0.05);

// Quantile with linear interpolation between order statistics.
double interpolated_quantile(std::vector<double> values, double fraction);

}  // namespace imdcf
