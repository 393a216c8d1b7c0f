#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "imdcf/error.hpp"
#include "imdcf/eval_harness.hpp"
#include "imdcf/family_ensemble.hpp"

using namespace imdcf;

namespace {

std::vector<ObservationSequence> random_family(std::size_t count, std::size_t len, std::uint64_t seed,
                                               std::size_t m = 5) {
    std::mt19937_64 rng(seed);
    std::vector<ObservationSequence> out;
    for (std::size_t i = 0; i < count; ++i) {
        ObservationSequence seq;
        seq.label = "fam";
        seq.source_id = "fam/" + std::to_string(i);
        for (std::size_t t = 0; t < len; ++t) seq.symbols.push_back(Symbol{static_cast<std::uint16_t>(rng() % m)});
        out.push_back(std::move(seq));
    }
    return out;
}

// A single-state model whose llpo on an all-zero sequence is ln(p0).
HmmParams iid_model(double p0) {
    return HmmParams::from_rows({1.0}, {{1.0}}, {{p0, 1.0 - p0}});
}

}  // namespace

TEST_CASE("subset_cap rounds 30% up") {
    CHECK(subset_cap(100) == 30);
    CHECK(subset_cap(10) == 3);
    CHECK(subset_cap(11) == 4);
    CHECK(subset_cap(1) == 1);
    CHECK(subset_cap(3) == 1);
    CHECK(subset_cap(4) == 2);
}

TEST_CASE("train_family builds disjoint member subsets") {
    const auto seqs = random_family(100, 30, 1);
    const auto model = train_family("fam", seqs, 5, 20, HmmConfig{2, 5, 42}, 5);
    CHECK(model.name == "fam");
    CHECK(model.members.size() == 5);
    CHECK(model.subset_manifest.size() == 5);
    CHECK(model.member_train_llpo.size() == 5);
    CHECK(std::isinf(model.threshold));
    CHECK(model.threshold < 0);
    std::set<std::string> seen;
    for (const auto& subset : model.subset_manifest) {
        CHECK(subset.size() == 20);
        CHECK(subset.size() <= subset_cap(seqs.size()));
        for (const auto& id : subset) CHECK(seen.insert(id).second);
    }
    for (const auto& m : model.members) {
        CHECK(m.n_states() == 2);
        CHECK(m.n_symbols() == 5);
    }
}

TEST_CASE("train_family cap boundary") {
    const auto seqs = random_family(10, 20, 2);
    const auto model = train_family("fam", seqs, 1, 3, HmmConfig{2, 3, 1}, 5);
    CHECK(model.members.size() == 1);
    CHECK(model.subset_manifest[0].size() == 3);
    CHECK_THROWS_AS(train_family("fam", seqs, 1, 4, HmmConfig{2, 3, 1}, 5), CapViolationError);
}

TEST_CASE("train_family runs out of sequences") {
    const auto seqs = random_family(10, 20, 3);
    CHECK_THROWS_AS(train_family("fam", seqs, 4, 3, HmmConfig{2, 3, 1}, 5), SubsetExhaustedError);
    CHECK_NOTHROW(train_family("fam", seqs, 3, 3, HmmConfig{2, 3, 1}, 5));
}

TEST_CASE("train_family rejects degenerate arguments") {
    const auto seqs = random_family(10, 20, 3);
    CHECK_THROWS_AS(train_family("fam", seqs, 0, 3, HmmConfig{2, 3, 1}, 5), PreconditionError);
    CHECK_THROWS_AS(train_family("fam", seqs, 1, 0, HmmConfig{2, 3, 1}, 5), PreconditionError);
    auto dup = seqs;
    dup[1].source_id = dup[0].source_id;
    CHECK_THROWS_AS(train_family("fam", dup, 3, 3, HmmConfig{2, 3, 1}, 5), PreconditionError);
}

TEST_CASE("train_family is deterministic per seed") {
    const auto seqs = random_family(30, 40, 4);
    const auto a = train_family("fam", seqs, 3, 5, HmmConfig{2, 10, 77}, 5);
    const auto b = train_family("fam", seqs, 3, 5, HmmConfig{2, 10, 77}, 5);
    const auto c = train_family("fam", seqs, 3, 5, HmmConfig{2, 10, 78}, 5);
    CHECK(a == b);
    CHECK_FALSE(a.subset_manifest == c.subset_manifest);
}

TEST_CASE("member_train_llpo is the final per-symbol training log-likelihood") {
    const auto seqs = random_family(20, 25, 5);
    const auto model = train_family("fam", seqs, 2, 6, HmmConfig{2, 8, 9}, 5);
    std::map<std::string, const ObservationSequence*> by_id;
    for (const auto& s : seqs) by_id[s.source_id] = &s;
    for (std::size_t i = 0; i < model.members.size(); ++i) {
        double ll = 0.0;
        std::size_t len = 0;
        for (const auto& id : model.subset_manifest[i]) {
            ll += forward_log_likelihood(model.members[i], by_id.at(id)->symbols);
            len += by_id.at(id)->size();
        }
        CHECK(model.member_train_llpo[i] == doctest::Approx(ll / static_cast<double>(len)).epsilon(1e-12));
    }
}

TEST_CASE("score_family is the mean member llpo") {
    const std::vector<Symbol> zeros(4, Symbol{0});
    FamilyModel one{"x", {iid_model(0.3)}, -1.0, {{"a"}}, {0.0}};
    CHECK(score_family(one, zeros) == llpo(one.members[0], zeros));
    CHECK(member_votes(one, zeros).size() == 1);

    FamilyModel two{"x", {iid_model(std::exp(-2.0)), iid_model(std::exp(-4.0))}, -1.0, {{"a"}, {"b"}}, {0, 0}};
    CHECK(score_family(two, zeros) == doctest::Approx(-3.0).epsilon(1e-14));
}

TEST_CASE("score_family on a five-member ensemble") {
    const auto seqs = random_family(60, 30, 6);
    const auto model = train_family("fam", seqs, 5, 10, HmmConfig{2, 5, 3}, 5);
    const auto obs = random_family(1, 200, 99)[0].symbols;
    double sum = 0.0;
    for (const auto& m : model.members) sum += llpo(m, obs);
    CHECK(std::abs(score_family(model, obs) - sum / 5.0) <= 1e-12);

    const auto votes = member_votes(model, obs);
    REQUIRE(votes.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(votes[i] == llpo(model.members[i], obs));
    double vote_sum = 0.0;
    for (double v : votes) vote_sum += v;
    CHECK(score_family(model, obs) == vote_sum / 5.0);
    CHECK(member_votes(model, obs) == votes);
}

TEST_CASE("interpolated_quantile") {
    CHECK(interpolated_quantile({-3.1}, 0.05) == -3.1);
    CHECK(interpolated_quantile({-1, -2, -3, -4, -5}, 0.0) == -5.0);
    CHECK(interpolated_quantile({-1, -2, -3, -4, -5}, 0.5) == -3.0);
    CHECK(interpolated_quantile({0, 10}, 0.25) == doctest::Approx(2.5));
    CHECK(interpolated_quantile({4, 1, 3, 2}, 1.0 / 3.0) == doctest::Approx(2.0));
}

TEST_CASE("calibrate_threshold examples") {
    FamilyModel model{"x", {iid_model(std::exp(-3.1))}, -std::numeric_limits<double>::infinity(), {{"a"}}, {0}};
    ObservationSequence zero;
    zero.symbols = {Symbol{0}};
    const auto single = calibrate_threshold(model, std::vector{zero}, 0.05);
    CHECK(single.threshold == doctest::Approx(-3.1).epsilon(1e-14));

    // Validation sequences with llpo -1..-5 under a model that scores zeros and ones.
    FamilyModel half{"x", {iid_model(0.5)}, 0.0, {{"a"}}, {0}};
    std::vector<ObservationSequence> val;
    for (int k = 1; k <= 5; ++k) {
        ObservationSequence s;
        s.symbols.assign(static_cast<std::size_t>(k), Symbol{0});
        val.push_back(s);
    }
    const auto min_cal = calibrate_threshold(half, val, 0.0);
    CHECK(min_cal.threshold == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    CHECK_THROWS_AS(calibrate_threshold(model, std::vector<ObservationSequence>{}, 0.05), EmptyCorpusError);
    CHECK_THROWS_AS(calibrate_threshold(model, std::vector{zero}, 1.0), PreconditionError);
    CHECK_THROWS_AS(calibrate_threshold(model, std::vector{zero}, -0.1), PreconditionError);
}

TEST_CASE("calibration coverage on in-family sequences") {
    const auto gen = benchmark_generators()[0].second;
    const auto train = synth_generate(gen, 20, 300, 1, "benign");
    auto model = train_family("benign", train, 2, 6, HmmConfig{2, 20, 5}, gen.n_symbols());
    const auto val = synth_generate(gen, 100, 100, 2, "benign");
    model = calibrate_threshold(std::move(model), val, 0.05);
    CHECK(std::isfinite(model.threshold));
    int above = 0;
    for (const auto& s : val) above += score_family(model, s.symbols) >= model.threshold ? 1 : 0;
    CHECK(above >= 95);
}

TEST_CASE("ModelRegistry lookups and validation") {
    ModelRegistry reg;
    reg.encoding = EncodingTable({"A"}, {{"A", 1}}, 1);
    reg.families.emplace("a", FamilyModel{"a", {init_params(2, 2, 1)}, -1.0, {{"a/1"}}, {-1.0}});
    reg.families.emplace("b", FamilyModel{"b", {init_params(2, 2, 2)}, -1.0, {{"b/1"}}, {-1.0}});
    CHECK_NOTHROW(reg.validate());
    CHECK(reg.family("a").name == "a");
    CHECK_THROWS_AS(reg.family("zzz"), UnknownFamilyError);
    CHECK(reg.family_names() == std::vector<std::string>{"a", "b"});

    auto wrong_alphabet = reg;
    wrong_alphabet.families.at("a").members[0] = init_params(2, 3, 1);
    CHECK_THROWS(wrong_alphabet.validate());
    auto uncalibrated = reg;
    uncalibrated.families.at("b").threshold = -std::numeric_limits<double>::infinity();
    CHECK_THROWS(uncalibrated.validate());
}
