#include "imdcf/eval_harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "imdcf/error.hpp"
#include "imdcf/random.hpp"

namespace imdcf {

namespace {

std::size_t sample_categorical(std::span<const double> probs, rng::Engine& engine) {
    const double u = rng::unit_uniform(engine);
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] > 0.0) last_positive = k;
        cumulative += probs[k];
        if (u < cumulative) return k;
    }
    return last_positive;
}

bool is_correct_family(const ModelRegistry& registry, const std::string& truth,
                       const std::string& predicted) {
    if (registry.families.contains(truth)) return predicted == truth;
    return predicted == kNewFamily;  // held-out family
}

const std::string& label_of(const ObservationSequence& seq) {
    if (!seq.label) throw PreconditionError("evaluation sequence '" + seq.source_id + "' has no label");
    return *seq.label;
}

std::vector<SampleResult> run_samples(const ModelRegistry& registry,
                                      std::span<const ObservationSequence> test,
                                      std::size_t window_len) {
    if (test.empty()) throw EmptyCorpusError("evaluation needs at least one test sequence");
    std::vector<SampleResult> results;
    results.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& seq = test[i];
        SampleResult r;
        r.sample_index = i;
        r.true_label = label_of(seq);
        r.predicted_family = classify_sequence(registry, seq.symbols, window_len, registry.config.max_extension)
                                 .final_family;
        for (const auto& [name, model] : registry.families) {
            r.llpo.push_back(score_family(model, seq.symbols));
        }
        results.push_back(std::move(r));
    }
    return results;
}

EvaluationReport build_report(const ModelRegistry& registry, std::vector<SampleResult> samples,
                              Task task) {
    EvaluationReport report;
    report.task = task;
    report.families = registry.family_names();

    std::size_t det_correct = 0;
    std::size_t cls_correct = 0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (auto& s : samples) {
        const bool truth_benign = s.true_label == kBenignFamily;
        const bool pred_benign = s.predicted_family == kBenignFamily;
        if (truth_benign == pred_benign) ++det_correct;
        if (truth_benign) {
            pred_benign ? ++tn : ++fp;
        } else {
            pred_benign ? ++fn : ++tp;
        }
        if (is_correct_family(registry, s.true_label, s.predicted_family)) ++cls_correct;
        s.predicted = task == Task::detect ? (pred_benign ? "benign" : "malware") : s.predicted_family;
    }

    const auto total = static_cast<double>(samples.size());
    report.detection_accuracy = static_cast<double>(det_correct) / total;
    report.classification_accuracy = static_cast<double>(cls_correct) / total;
    report.combined_accuracy = (report.detection_accuracy + report.classification_accuracy) / 2.0;

    if (task == Task::detect) {
        report.accuracy = report.detection_accuracy;
        report.row_labels = {"benign", "malware"};
        report.column_labels = {"benign", "malware"};
        report.confusion = {{tn, fp}, {fn, tp}};
        if (tn + fp > 0) report.false_positive_rate = static_cast<double>(fp) / static_cast<double>(tn + fp);
        if (tp + fn > 0) report.false_negative_rate = static_cast<double>(fn) / static_cast<double>(tp + fn);
    } else {
        report.accuracy = report.classification_accuracy;
        std::set<std::string> truths;
        for (const auto& s : samples) truths.insert(s.true_label);
        report.row_labels.assign(truths.begin(), truths.end());
        report.column_labels = report.families;
        report.column_labels.push_back(kNewFamily);
        report.confusion.assign(report.row_labels.size(),
                                std::vector<std::size_t>(report.column_labels.size(), 0));
        for (const auto& s : samples) {
            const auto row = std::lower_bound(report.row_labels.begin(), report.row_labels.end(),
                                              s.true_label) - report.row_labels.begin();
            const auto col = std::find(report.column_labels.begin(), report.column_labels.end(),
                                       s.predicted_family) - report.column_labels.begin();
            ++report.confusion[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
        }
    }
    report.per_sample = std::move(samples);
    return report;
}

std::ofstream open_output(const std::filesystem::path& out_dir, const char* name) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::vector<ObservationSequence> LabeledDataset::part(Split which) const {
    std::vector<ObservationSequence> out;
    const auto it = split.find(which);
    if (it == split.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t i : it->second) out.push_back(sequences.at(i));
    return out;
}

std::map<Split, std::vector<std::size_t>> split_indices(std::span<const std::string> labels,
                                                        const SplitFractions& fractions,
                                                        std::uint64_t seed) {
    const double sum = fractions.train + fractions.validation + fractions.test;
    if (!(fractions.train > 0.0 && fractions.validation > 0.0 && fractions.test > 0.0) ||
        std::abs(sum - 1.0) > 1e-9) {
        throw PreconditionError("split fractions must be positive and sum to 1");
    }

    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

    std::map<Split, std::vector<std::size_t>> out{{Split::train, {}}, {Split::validation, {}}, {Split::test, {}}};
    for (const auto& [label, members] : by_label) {
        const std::size_t n = members.size();
        if (n < 3) {
            throw StratificationError("label '" + label + "' has " + std::to_string(n) +
                                      " samples; stratified splitting needs at least 3");
        }
        auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.train));
        auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.validation));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1 - n_train);

        rng::Engine engine(rng::derive_seed(seed, rng::hash_name(label)));
        const auto order = rng::shuffled_indices(n, engine);
        for (std::size_t k = 0; k < n; ++k) {
            const Split which = k < n_train ? Split::train
                                : k < n_train + n_val ? Split::validation
                                                      : Split::test;
            out[which].push_back(members[order[k]]);
        }
    }
    for (auto& [which, idx] : out) std::sort(idx.begin(), idx.end());
    return out;
}

LabeledDataset split_dataset(LabeledDataset data, const SplitFractions& fractions, std::uint64_t seed) {
    std::vector<std::string> labels;
    labels.reserve(data.sequences.size());
    for (const auto& seq : data.sequences) labels.push_back(label_of(seq));
    data.split = split_indices(labels, fractions, seed);
    return data;
}

std::vector<ObservationSequence> synth_generate(const HmmParams& generator,
                                                std::size_t n_sequences,
                                                std::size_t length,
                                                std::uint64_t seed,
                                                const std::string& label) {
    if (length == 0) throw PreconditionError("synthetic sequences need length >= 1");
    std::vector<ObservationSequence> out;
    out.reserve(n_sequences);
    for (std::size_t s = 0; s < n_sequences; ++s) {
        rng::Engine engine(rng::derive_seed(seed, s));
        ObservationSequence seq;
        seq.label = label;
        seq.source_id = label + "/" + std::to_string(s);
        seq.symbols.reserve(length);
        std::size_t state = sample_categorical(generator.initial(), engine);
        for (std::size_t t = 0; t < length; ++t) {
            const auto sym = sample_categorical(generator.emission_row(state), engine);
            seq.symbols.push_back(Symbol{static_cast<std::uint16_t>(sym)});
            state = sample_categorical(generator.transition_row(state), engine);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<std::pair<std::string, HmmParams>> benchmark_generators() {
    constexpr std::size_t kSymbols = 27;
    constexpr std::size_t kBlock = 6;
    constexpr double kSignatureMass = 0.6;
    constexpr double kWeights[3] = {0.5, 0.3, 0.2};

    const std::vector<std::string> names = {"benign", "family_a", "family_b", "family_unseen"};
    const std::vector<std::vector<std::vector<double>>> transitions = {
        {{0.90, 0.10}, {0.15, 0.85}},
        {{0.80, 0.20}, {0.30, 0.70}},
        {{0.95, 0.05}, {0.10, 0.90}},
        {{0.85, 0.15}, {0.20, 0.80}},
    };

    std::vector<std::pair<std::string, HmmParams>> out;
    for (std::size_t f = 0; f < names.size(); ++f) {
        std::vector<std::vector<double>> emission(2, std::vector<double>(kSymbols, (1.0 - kSignatureMass) / kSymbols));
        for (std::size_t state = 0; state < 2; ++state) {
            for (std::size_t k = 0; k < 3; ++k) {
                emission[state][f * kBlock + state * 3 + k] += kSignatureMass * kWeights[k];
            }
        }
        out.emplace_back(names[f], HmmParams::from_rows({0.5, 0.5}, transitions[f], emission));
    }
    return out;
}

double min_emission_tv(const HmmParams& a, const HmmParams& b) {
    if (a.n_symbols() != b.n_symbols()) throw DimensionError("generators use different alphabets");
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.n_states(); ++i) {
        for (std::size_t j = 0; j < b.n_states(); ++j) {
            double tv = 0.0;
            for (std::size_t k = 0; k < a.n_symbols(); ++k) tv += std::abs(a.emission(i, k) - b.emission(j, k));
            smallest = std::min(smallest, tv / 2.0);
        }
    }
    return smallest;
}

EvaluationReport evaluate_detection(const ModelRegistry& registry,
                                    std::span<const ObservationSequence> test,
                                    std::size_t window_len) {
    if (!registry.families.contains(kBenignFamily)) {
        throw UnknownFamilyError("detection needs a family named '" + kBenignFamily + "'");
    }
    return build_report(registry, run_samples(registry, test, window_len), Task::detect);
}

EvaluationReport evaluate_classification(const ModelRegistry& registry,
                                         std::span<const ObservationSequence> test,
                                         std::size_t window_len) {
    return build_report(registry, run_samples(registry, test, window_len), Task::classify);
}

SweepResult length_sweep(const ModelRegistry& registry,
                         std::span<const ObservationSequence> test,
                         std::span<const std::size_t> lengths,
                         std::size_t window_len) {
    if (lengths.empty()) throw PreconditionError("length sweep needs at least one length");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] == 0 || (i > 0 && lengths[i] < lengths[i - 1])) {
            throw PreconditionError("sweep lengths must be >= 1 and sorted ascending");
        }
    }
    const bool any_long_enough = std::any_of(test.begin(), test.end(), [&](const ObservationSequence& s) {
        return s.size() >= lengths.front();
    });
    if (!any_long_enough) {
        throw EmptyCorpusError("every test sequence is shorter than " + std::to_string(lengths.front()));
    }

    SweepResult result;
    for (std::size_t length : lengths) {
        std::size_t eligible = 0;
        std::size_t correct = 0;
        for (const auto& seq : test) {
            if (seq.size() < length) continue;
            ++eligible;
            const std::span<const Symbol> prefix(seq.symbols.data(), length);
            const auto decision = classify_sequence(registry, prefix, window_len, registry.config.max_extension);
            if (is_correct_family(registry, label_of(seq), decision.final_family)) ++correct;
        }
        result.lengths.push_back(length);
        result.sample_count.push_back(eligible);
        result.accuracy_at.push_back(eligible == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                   : static_cast<double>(correct) /
                                                         static_cast<double>(eligible));
    }
    return result;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void export_report(const EvaluationReport& report, const std::filesystem::path& out_dir) {
    {
        auto out = open_output(out_dir, "per_sample.csv");
        out << "sample_index,true_label,predicted";
        for (const auto& f : report.families) out << ",llpo_" << f;
        out << '\n';
        for (const auto& s : report.per_sample) {
            out << s.sample_index << ',' << s.true_label << ',' << s.predicted;
            for (double v : s.llpo) out << ',' << format_double(v);
            out << '\n';
        }
        finish(out, out_dir / "per_sample.csv");
    }
    {
        auto out = open_output(out_dir, "summary.csv");
        out << "metric,value\n";
        out << "task," << (report.task == Task::detect ? "detect" : "classify") << '\n';
        out << "n_samples," << report.per_sample.size() << '\n';
        out << "accuracy," << format_double(report.accuracy) << '\n';
        out << "detection_accuracy," << format_double(report.detection_accuracy) << '\n';
        out << "classification_accuracy," << format_double(report.classification_accuracy) << '\n';
        out << "combined_accuracy," << format_double(report.combined_accuracy) << '\n';
        if (report.false_positive_rate) {
            out << "false_positive_rate," << format_double(*report.false_positive_rate) << '\n';
        }
        if (report.false_negative_rate) {
            out << "false_negative_rate," << format_double(*report.false_negative_rate) << '\n';
        }
        finish(out, out_dir / "summary.csv");
    }
    {
        auto out = open_output(out_dir, "confusion.csv");
        out << "true_label";
        for (const auto& c : report.column_labels) out << ',' << c;
        out << '\n';
        for (std::size_t r = 0; r < report.row_labels.size(); ++r) {
            out << report.row_labels[r];
            for (std::size_t count : report.confusion[r]) out << ',' << count;
            out << '\n';
        }
        finish(out, out_dir / "confusion.csv");
    }
}

void export_report(const SweepResult& sweep, const std::filesystem::path& out_dir) {
    auto out = open_output(out_dir, "sweep.csv");
    out << "length,accuracy,n_samples\n";
    for (std::size_t i = 0; i < sweep.lengths.size(); ++i) {
        out << sweep.lengths[i] << ',' << format_double(sweep.accuracy_at[i]) << ','
            << sweep.sample_count[i] << '\n';
    }
    finish(out, out_dir / "sweep.csv");
}

}  // namespace imdcf
