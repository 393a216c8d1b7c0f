#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "imdcf/error.hpp"
#include "imdcf/eval_harness.hpp"
#include "support.hpp"

using namespace imdcf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::size_t columns(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("imdcf_eval_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<ObservationSequence> mixed_test_set(std::size_t per_family, std::size_t length, std::uint64_t seed) {
    std::vector<ObservationSequence> out;
    const auto gens = benchmark_generators();
    for (std::size_t f = 0; f < 3; ++f) {
        auto seqs = synth_generate(gens[f].second, per_family, length, seed + f, gens[f].first);
        out.insert(out.end(), seqs.begin(), seqs.end());
    }
    return out;
}

}  // namespace

TEST_CASE("split_indices arithmetic and stratification") {
    std::vector<std::string> labels;
    for (int i = 0; i < 100; ++i) labels.push_back("a");
    for (int i = 0; i < 100; ++i) labels.push_back("b");
    const auto split = split_indices(labels, {0.6, 0.2, 0.2}, 5);
    CHECK(split.at(Split::train).size() == 120);
    CHECK(split.at(Split::validation).size() == 40);
    CHECK(split.at(Split::test).size() == 40);
    for (Split s : {Split::train, Split::validation, Split::test}) {
        const auto& idx = split.at(s);
        const auto in_a = std::count_if(idx.begin(), idx.end(), [](std::size_t i) { return i < 100; });
        CHECK(static_cast<std::size_t>(in_a) * 2 == idx.size());
        CHECK(std::is_sorted(idx.begin(), idx.end()));
    }
    std::vector<std::size_t> all;
    for (const auto& [s, idx] : split) all.insert(all.end(), idx.begin(), idx.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

    CHECK(split_indices(labels, {0.6, 0.2, 0.2}, 5) == split);
    CHECK_FALSE(split_indices(labels, {0.6, 0.2, 0.2}, 6) == split);
}

TEST_CASE("split_indices errors") {
    const std::vector<std::string> labels{"a", "a", "a", "b", "b"};
    CHECK_THROWS_AS(split_indices(labels, {0.6, 0.2, 0.2}, 1), StratificationError);
    const std::vector<std::string> ok{"a", "a", "a"};
    CHECK_THROWS_AS(split_indices(ok, {0.5, 0.5, 0.5}, 1), PreconditionError);
    CHECK_THROWS_AS(split_indices(ok, {1.0, 0.0, 0.0}, 1), PreconditionError);
    const auto tiny = split_indices(ok, {0.6, 0.2, 0.2}, 1);
    for (const auto& [s, idx] : tiny) CHECK(idx.size() == 1);
}

TEST_CASE("split_dataset fills the split map") {
    LabeledDataset data;
    for (int i = 0; i < 10; ++i) {
        ObservationSequence s;
        s.label = i < 5 ? "x" : "y";
        s.symbols = {Symbol{0}};
        data.sequences.push_back(s);
    }
    const auto split = split_dataset(data, {0.6, 0.2, 0.2}, 3);
    CHECK(split.part(Split::train).size() == 6);
    CHECK(split.part(Split::validation).size() == 2);
    CHECK(split.part(Split::test).size() == 2);
}

TEST_CASE("synth_generate basics") {
    const auto det = HmmParams::from_rows({1.0}, {{1.0}}, {{1.0, 0.0}});
    for (const auto& s : synth_generate(det, 3, 20, 1, "d")) {
        CHECK(s.size() == 20);
        CHECK(s.label == "d");
        for (Symbol x : s.symbols) CHECK(x.index == 0);
    }
    const auto gen = benchmark_generators()[1].second;
    const auto a = synth_generate(gen, 4, 100, 9, "a");
    const auto b = synth_generate(gen, 4, 100, 9, "a");
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].symbols == b[i].symbols);
    CHECK_FALSE(synth_generate(gen, 1, 100, 10, "a")[0].symbols == a[0].symbols);
    CHECK_THROWS_AS(synth_generate(gen, 1, 0, 1, "a"), PreconditionError);
}

TEST_CASE("synth_generate matches the stationary emission distribution") {
    const auto gen = benchmark_generators()[0].second;
    // Two-state stationary distribution of A.
    const double a01 = gen.transition(0, 1);
    const double a10 = gen.transition(1, 0);
    const double pi0 = a10 / (a01 + a10);
    const double pi1 = 1.0 - pi0;

    const auto seqs = synth_generate(gen, 100, 1000, 4, "benign");
    std::vector<double> freq(27, 0.0);
    double total = 0.0;
    for (const auto& s : seqs) {
        for (Symbol x : s.symbols) freq[x.index] += 1.0;
        total += static_cast<double>(s.size());
    }
    CHECK(total == 100000.0);
    for (std::size_t k = 0; k < 27; ++k) {
        const double expected = pi0 * gen.emission(0, k) + pi1 * gen.emission(1, k);
        CHECK(std::abs(freq[k] / total - expected) <= 0.01);
    }
}

TEST_CASE("short-sequence frequencies converge to the brute-force likelihood") {
    const auto gen = HmmParams::from_rows({0.3, 0.7}, {{0.6, 0.4}, {0.25, 0.75}}, {{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}});
    const std::size_t n = 40000;
    for (std::size_t len : {1u, 2u, 3u}) {
        const auto seqs = synth_generate(gen, n, len, 100 + len, "g");
        std::map<std::vector<Symbol>, std::size_t> counts;
        for (const auto& s : seqs) ++counts[s.symbols];
        std::vector<Symbol> word(len, Symbol{0});
        std::size_t words = 1;
        for (std::size_t i = 0; i < len; ++i) words *= 3;
        for (std::size_t w = 0; w < words; ++w) {
            std::size_t code = w;
            for (std::size_t i = 0; i < len; ++i) {
                word[i].index = static_cast<std::uint16_t>(code % 3);
                code /= 3;
            }
            const double p = brute_force_likelihood(gen, word);
            const double observed = static_cast<double>(counts[word]) / static_cast<double>(n);
            const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
            CHECK(std::abs(observed - p) <= 3.0 * se);
        }
    }
}

TEST_CASE("benchmark generators are well separated") {
    const auto gens = benchmark_generators();
    REQUIRE(gens.size() == 4);
    CHECK(gens[0].first == "benign");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        CHECK(gens[i].second.n_symbols() == 27);
        for (std::size_t j = i + 1; j < gens.size(); ++j) {
            CHECK(min_emission_tv(gens[i].second, gens[j].second) >= 0.4);
        }
    }
}

TEST_CASE("classification report bookkeeping") {
    const auto& reg = test::trained_registry();
    auto test_set = mixed_test_set(6, 800, 70);
    // One held-out sample.
    auto unseen = synth_generate(benchmark_generators()[3].second, 2, 800, 71, "family_unseen");
    test_set.insert(test_set.end(), unseen.begin(), unseen.end());

    const auto report = evaluate_classification(reg, test_set, 100);
    CHECK(report.task == Task::classify);
    CHECK(report.families == std::vector<std::string>{"benign", "family_a", "family_b"});
    CHECK(report.column_labels.back() == kNewFamily);
    CHECK(report.per_sample.size() == test_set.size());

    std::map<std::string, std::size_t> per_class;
    for (const auto& s : test_set) ++per_class[*s.label];
    std::size_t correct = 0;
    for (std::size_t r = 0; r < report.row_labels.size(); ++r) {
        std::size_t row_sum = 0;
        for (std::size_t c : report.confusion[r]) row_sum += c;
        CHECK(row_sum == per_class.at(report.row_labels[r]));
        const auto& truth = report.row_labels[r];
        const std::string expected_col = reg.families.contains(truth) ? truth : kNewFamily;
        const auto col = std::find(report.column_labels.begin(), report.column_labels.end(), expected_col) -
                         report.column_labels.begin();
        correct += report.confusion[r][static_cast<std::size_t>(col)];
    }
    CHECK(report.accuracy == doctest::Approx(static_cast<double>(correct) / test_set.size()).epsilon(1e-15));
    CHECK(report.classification_accuracy == report.accuracy);
    CHECK(report.combined_accuracy ==
          doctest::Approx((report.detection_accuracy + report.classification_accuracy) / 2));
    CHECK_FALSE(report.false_positive_rate);

    for (const auto& s : report.per_sample) {
        REQUIRE(s.llpo.size() == 3);
        CHECK(s.llpo[0] == score_family(reg.family("benign"), test_set[s.sample_index].symbols));
        CHECK(s.predicted == s.predicted_family);
    }
}

TEST_CASE("detection report matches an independent confusion count") {
    const auto& reg = test::trained_registry();
    const auto test_set = mixed_test_set(6, 800, 80);
    const auto report = evaluate_detection(reg, test_set, 100);
    CHECK(report.task == Task::detect);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (const auto& s : report.per_sample) {
        const bool truth = s.true_label == "benign";
        const bool pred = s.predicted == "benign";
        CHECK(pred == (s.predicted_family == "benign"));
        if (truth && pred) ++tn;
        if (truth && !pred) ++fp;
        if (!truth && pred) ++fn;
        if (!truth && !pred) ++tp;
    }
    CHECK(report.confusion == std::vector<std::vector<std::size_t>>{{tn, fp}, {fn, tp}});
    CHECK(report.accuracy == doctest::Approx(static_cast<double>(tp + tn) / test_set.size()).epsilon(1e-15));
    REQUIRE(report.false_positive_rate);
    CHECK(*report.false_positive_rate == doctest::Approx(static_cast<double>(fp) / (fp + tn)));
    CHECK(*report.false_negative_rate == doctest::Approx(static_cast<double>(fn) / (fn + tp)));
}

TEST_CASE("all-benign detection: FPR is one minus accuracy") {
    const auto& reg = test::trained_registry();
    const auto benign = synth_generate(benchmark_generators()[0].second, 10, 400, 90, "benign");
    const auto report = evaluate_detection(reg, benign, 100);
    REQUIRE(report.false_positive_rate);
    CHECK(*report.false_positive_rate == doctest::Approx(1.0 - report.accuracy).epsilon(1e-15));
    CHECK_FALSE(report.false_negative_rate);
}

TEST_CASE("accuracy is invariant under permutation of the test set") {
    const auto& reg = test::trained_registry();
    auto test_set = mixed_test_set(4, 600, 60);
    const double base = evaluate_classification(reg, test_set, 100).accuracy;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 3; ++i) {
        std::shuffle(test_set.begin(), test_set.end(), rng);
        CHECK(evaluate_classification(reg, test_set, 100).accuracy == base);
    }
}

TEST_CASE("identical family models confuse only with each other") {
    auto reg = test::trained_registry();
    auto clone = reg.families.at("family_a");
    clone.name = "family_a2";
    reg.families.emplace("family_a2", clone);
    const auto a = synth_generate(benchmark_generators()[1].second, 8, 800, 61, "family_a");
    const auto report = evaluate_classification(reg, a, 100);
    for (const auto& s : report.per_sample) {
        CHECK((s.predicted == "family_a" || s.predicted == "family_a2" || s.predicted == kNewFamily));
    }
}

TEST_CASE("evaluation errors") {
    const auto& reg = test::trained_registry();
    CHECK_THROWS_AS(evaluate_classification(reg, std::vector<ObservationSequence>{}, 100), EmptyCorpusError);
    CHECK_THROWS_AS(evaluate_detection(reg, std::vector<ObservationSequence>{}, 100), EmptyCorpusError);
    auto no_benign = reg;
    no_benign.families.erase("benign");
    CHECK_THROWS_AS(evaluate_detection(no_benign, mixed_test_set(1, 50, 1), 100), UnknownFamilyError);
}

TEST_CASE("length_sweep") {
    const auto& reg = test::trained_registry();
    auto test_set = mixed_test_set(4, 500, 50);
    test_set[0].symbols.resize(60);

    const std::vector<std::size_t> lengths{1, 10, 50, 100, 200, 500};
    const auto sweep = length_sweep(reg, test_set, lengths, 100);
    CHECK(sweep.lengths == lengths);
    CHECK(sweep.accuracy_at.size() == lengths.size());
    CHECK(sweep.sample_count == std::vector<std::size_t>{12, 12, 12, 11, 11, 11});

    // Full length matches evaluate_classification on the same sequences.
    std::vector<ObservationSequence> full(test_set.begin() + 1, test_set.end());
    CHECK(sweep.accuracy_at.back() == evaluate_classification(reg, full, 100).accuracy);

    // L = 1 is the single-opcode regime: one symbol judged against each family.
    std::size_t correct = 0;
    for (const auto& s : test_set) {
        correct += classify_sequence(reg, std::span(s.symbols.data(), 1), 100).final_family == *s.label;
    }
    CHECK(sweep.accuracy_at[0] == static_cast<double>(correct) / 12.0);

    const std::vector<std::size_t> too_long{1000};
    CHECK_THROWS_AS(length_sweep(reg, test_set, too_long, 100), EmptyCorpusError);
    const std::vector<std::size_t> unsorted{10, 1};
    CHECK_THROWS_AS(length_sweep(reg, test_set, unsorted, 100), PreconditionError);
    const std::vector<std::size_t> zero{0, 1};
    CHECK_THROWS_AS(length_sweep(reg, test_set, zero, 100), PreconditionError);

    const std::vector<std::size_t> partly{100, 600};
    const auto partial = length_sweep(reg, test_set, partly, 100);
    CHECK(std::isnan(partial.accuracy_at[1]));
    CHECK(partial.sample_count[1] == 0);
}

TEST_CASE("CSV export schema and determinism") {
    const auto& reg = test::trained_registry();
    auto two = reg;
    two.families.erase("family_b");
    auto test_set = mixed_test_set(3, 300, 40);
    test_set.erase(std::remove_if(test_set.begin(), test_set.end(),
                                  [](const auto& s) { return s.label == "family_b"; }),
                   test_set.end());
    const auto report = evaluate_detection(two, test_set, 100);

    const auto dir = scratch_dir("csv");
    export_report(report, dir);
    const auto per_sample = lines_of(dir / "per_sample.csv");
    REQUIRE(per_sample.size() == 1 + test_set.size());
    CHECK(per_sample[0] == "sample_index,true_label,predicted,llpo_benign,llpo_family_a");
    for (const auto& line : per_sample) CHECK(columns(line) == 3 + 2);

    const auto summary = lines_of(dir / "summary.csv");
    CHECK(summary[0] == "metric,value");
    CHECK(std::find(summary.begin(), summary.end(), "task,detect") != summary.end());
    CHECK(std::any_of(summary.begin(), summary.end(),
                      [](const std::string& l) { return l.rfind("false_positive_rate,", 0) == 0; }));

    // Values round-trip at full precision.
    const auto first = per_sample[1];
    const auto llpo_text = first.substr(first.rfind(',') + 1);
    CHECK(std::stod(llpo_text) == report.per_sample[0].llpo[1]);

    const auto before = slurp(dir / "per_sample.csv") + slurp(dir / "summary.csv") + slurp(dir / "confusion.csv");
    export_report(report, dir);
    const auto after = slurp(dir / "per_sample.csv") + slurp(dir / "summary.csv") + slurp(dir / "confusion.csv");
    CHECK(before == after);

    const std::vector<std::size_t> lengths{1, 10, 50, 100, 200, 300};
    const auto sweep = length_sweep(two, test_set, lengths, 100);
    export_report(sweep, dir);
    const auto sweep_lines = lines_of(dir / "sweep.csv");
    CHECK(sweep_lines.size() == 1 + 6);
    CHECK(sweep_lines[0] == "length,accuracy,n_samples");
    fs::remove_all(dir);
}

TEST_CASE("export to an unwritable location") {
    const auto dir = scratch_dir("blocked");
    fs::create_directories(dir);
    std::ofstream(dir / "file") << "x";
    SweepResult sweep{{1}, {0.5}, {2}};
    CHECK_THROWS_AS(export_report(sweep, dir / "file" / "sub"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("format_double") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.5) == "-2.5");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
    const double x = 1.0 / 3.0;
    CHECK(std::stod(format_double(x)) == x);
}
