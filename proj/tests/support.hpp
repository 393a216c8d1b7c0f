#pragma once

#include <map>
#include <string>
#include <vector>

#include "imdcf/eval_harness.hpp"
#include "imdcf/family_ensemble.hpp"

namespace imdcf::test {

// Encoding table with top_k ranked placeholder mnemonics.
inline EncodingTable placeholder_table(std::size_t top_k) {
    std::vector<std::string> ranked;
    std::map<std::string, std::uint64_t> counts;
    for (std::size_t i = 0; i < top_k; ++i) {
        ranked.push_back("OP" + std::to_string(10 + i));
        counts[ranked.back()] = 100 - i;
    }
    return EncodingTable(ranked, counts, top_k);
}

// Small registry over the first three benchmark generators, trained on short
// synthetic sequences.
inline const ModelRegistry& trained_registry() {
    static const ModelRegistry reg = [] {
        ModelRegistry r;
        r.encoding = placeholder_table(26);
        const auto gens = benchmark_generators();
        for (std::size_t f = 0; f < 3; ++f) {
            const auto& [name, gen] = gens[f];
            const auto train = synth_generate(gen, 12, 400, 10 + f, name);
            auto model = train_family(name, train, 2, 4, HmmConfig{2, 25, 20 + f}, 27);
            r.families.emplace(name, calibrate_threshold(std::move(model),
                                                         synth_generate(gen, 40, 50, 30 + f, name), 0.05));
        }
        return r;
    }();
    return reg;
}

}  // namespace imdcf::test
