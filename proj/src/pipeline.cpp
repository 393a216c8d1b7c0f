#include "imdcf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "imdcf/error.hpp"
#include "imdcf/random.hpp"

namespace imdcf {

namespace fs = std::filesystem;

std::size_t Corpus::size() const {
    std::size_t n = 0;
    for (const auto& [name, traces] : families) n += traces.size();
    return n;
}

Corpus load_corpus(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw LayoutError("corpus '" + dir.string() + "' is not a directory");

    std::vector<fs::path> family_dirs;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const auto name = entry.path().filename().string();
        if (!name.empty() && name.front() != '.' && entry.is_directory()) family_dirs.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list corpus '" + dir.string() + "': " + ec.message());
    std::sort(family_dirs.begin(), family_dirs.end());

    Corpus corpus;
    for (const auto& family_dir : family_dirs) {
        const std::string family = family_dir.filename().string();
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(family_dir)) {
            const auto name = entry.path().filename().string();
            if (!name.empty() && name.front() != '.' && entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw LayoutError("family directory '" + family_dir.string() + "' holds no traces");

        auto& traces = corpus.families[family];
        for (const auto& file : files) {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw IoError("cannot read trace '" + file.string() + "'");
            std::ostringstream buf;
            buf << in.rdbuf();
            traces.push_back(parse_trace(buf.str(), family + "/" + file.filename().string()));
        }
    }
    return corpus;
}

namespace {

SplitFractions fractions_of(const RunConfig& config) {
    return {config.train_fraction, config.validation_fraction,
            1.0 - config.train_fraction - config.validation_fraction};
}

std::uint64_t split_seed(const RunConfig& config) {
    return rng::derive_seed(config.seed, rng::hash_name("split"));
}

}  // namespace

LabeledDataset encode_corpus(const Corpus& corpus, const EncodingTable& table, const RunConfig& config) {
    LabeledDataset data;
    std::vector<std::string> labels;
    for (const auto& [family, traces] : corpus.families) {
        for (const auto& trace : traces) {
            auto seq = encode_trace(trace, table);
            seq.label = family;
            data.sequences.push_back(std::move(seq));
            labels.push_back(family);
        }
    }
    data.split = split_indices(labels, fractions_of(config), split_seed(config));
    return data;
}

std::vector<ObservationSequence> window_chunks(std::span<const ObservationSequence> sequences,
                                               std::size_t window_len) {
    std::vector<ObservationSequence> out;
    for (const auto& seq : sequences) {
        if (seq.size() <= window_len) {
            if (!seq.empty()) out.push_back(seq);
            continue;
        }
        for (std::size_t start = 0; start + window_len <= seq.size(); start += window_len) {
            ObservationSequence chunk;
            chunk.label = seq.label;
            chunk.source_id = seq.source_id + "@" + std::to_string(start);
            chunk.symbols.assign(seq.symbols.begin() + static_cast<std::ptrdiff_t>(start),
                                 seq.symbols.begin() + static_cast<std::ptrdiff_t>(start + window_len));
            out.push_back(std::move(chunk));
        }
    }
    return out;
}

TrainingOutcome train_registry(const Corpus& corpus, const RunConfig& config, bool require_benign) {
    config.validate();
    if (corpus.families.size() < 2) {
        throw LayoutError("corpus needs at least two family directories, found " +
                          std::to_string(corpus.families.size()));
    }
    if (require_benign && !corpus.families.contains(kBenignFamily)) {
        throw LayoutError("corpus has no '" + kBenignFamily + "' family directory");
    }

    // The alphabet only sees the training split; split on labels first.
    std::vector<std::string> labels;
    std::vector<const OpcodeTrace*> flat;
    for (const auto& [family, traces] : corpus.families) {
        for (const auto& trace : traces) {
            labels.push_back(family);
            flat.push_back(&trace);
        }
    }
    const auto split = split_indices(labels, fractions_of(config), split_seed(config));
    std::vector<OpcodeTrace> training_traces;
    for (std::size_t i : split.at(Split::train)) training_traces.push_back(*flat[i]);

    TrainingOutcome outcome;
    outcome.registry.config = config;
    outcome.registry.encoding = build_alphabet(training_traces, config.top_k);
    const LabeledDataset data = encode_corpus(corpus, outcome.registry.encoding, config);

    const auto train = data.part(Split::train);
    const auto validation = data.part(Split::validation);
    const auto test = data.part(Split::test);
    auto of_family = [](const std::vector<ObservationSequence>& seqs, const std::string& family) {
        std::vector<ObservationSequence> out;
        for (const auto& s : seqs) {
            if (s.label == family) out.push_back(s);
        }
        return out;
    };

    for (const auto& [family, traces] : corpus.families) {
        const auto family_train = of_family(train, family);
        const auto family_validation = of_family(validation, family);
        const HmmConfig hmm{config.n_states, config.max_iters,
                            rng::derive_seed(config.seed, rng::hash_name(family))};
        FamilyModel model = train_family(family, family_train, config.ensemble_size, config.subset_size,
                                         hmm, outcome.registry.encoding.alphabet_size());
        model = calibrate_threshold(std::move(model), window_chunks(family_validation, config.window_len),
                                    config.threshold_percentile);

        FamilyTrainingSummary summary;
        summary.name = family;
        summary.n_train = family_train.size();
        summary.n_validation = family_validation.size();
        summary.n_test = static_cast<std::size_t>(
            std::count_if(test.begin(), test.end(), [&](const auto& s) { return s.label == family; }));
        summary.member_train_llpo = model.member_train_llpo;
        summary.threshold = model.threshold;
        outcome.summary.push_back(std::move(summary));
        outcome.registry.families.emplace(family, std::move(model));
    }
    outcome.registry.validate();
    return outcome;
}

const std::array<std::string_view, 27>& synthetic_vocabulary() {
    static const std::array<std::string_view, 27> vocab = {
        "MOV", "PUSH", "POP",  "ADD", "SUB",   "CALL", "RET", "JMP", "JZ",
        "JNZ", "CMP",  "TEST", "LEA", "XOR",   "AND",  "OR",  "INC", "DEC",
        "SHL", "SHR",  "NOP",  "IMUL", "MOVZX", "SAR", "NEG", "NOT", "XCHG"};
    return vocab;
}

OpcodeTrace to_trace(const ObservationSequence& seq) {
    const auto& vocab = synthetic_vocabulary();
    OpcodeTrace trace;
    trace.source_id = seq.source_id;
    trace.opcodes.reserve(seq.size());
    for (Symbol s : seq.symbols) {
        if (s.index >= vocab.size()) throw SymbolRangeError("symbol outside the synthetic vocabulary");
        trace.opcodes.emplace_back(vocab[s.index]);
    }
    return trace;
}

std::vector<SynthFamilySpec> parse_synth_spec(std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed generator spec: ") + e.what());
    }
    std::vector<SynthFamilySpec> specs;
    try {
        for (const auto& f : doc.at("families")) {
            SynthFamilySpec spec{
                f.at("name").get<std::string>(),
                HmmParams::from_rows(f.at("initial").get<std::vector<double>>(),
                                     f.at("transition").get<std::vector<std::vector<double>>>(),
                                     f.at("emission").get<std::vector<std::vector<double>>>()),
                f.at("n_sequences").get<std::size_t>(),
                f.at("length").get<std::size_t>()};
            if (spec.name.empty() || spec.name.front() == '.' ||
                spec.name.find_first_of("/\\") != std::string::npos) {
                throw ValidationError("family name '" + spec.name + "' is not a valid directory name");
            }
            if (spec.generator.n_symbols() > synthetic_vocabulary().size()) {
                throw ValidationError("family '" + spec.name + "' emits more than 27 symbols");
            }
            if (spec.n_sequences == 0 || spec.length == 0) {
                throw ValidationError("family '" + spec.name + "' needs n_sequences and length >= 1");
            }
            specs.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed generator spec: ") + e.what());
    } catch (const DimensionError& e) {
        throw ValidationError(e.what());
    }
    if (specs.empty()) throw ValidationError("generator spec lists no families");
    return specs;
}

std::vector<SynthFamilySpec> benchmark_synth_spec(std::size_t n_sequences, std::size_t length) {
    std::vector<SynthFamilySpec> specs;
    for (auto& [name, generator] : benchmark_generators()) {
        if (name == "family_unseen") continue;
        specs.push_back({name, generator, n_sequences, length});
    }
    return specs;
}

Corpus synthesize_corpus(std::span<const SynthFamilySpec> specs, std::uint64_t seed) {
    Corpus corpus;
    for (const auto& spec : specs) {
        auto& traces = corpus.families[spec.name];
        if (!traces.empty()) throw ValidationError("duplicate family '" + spec.name + "' in generator spec");
        const auto seqs = synth_generate(spec.generator, spec.n_sequences, spec.length,
                                         rng::derive_seed(seed, rng::hash_name(spec.name)), spec.name);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            OpcodeTrace trace = to_trace(seqs[i]);
            char file[64];
            std::snprintf(file, sizeof(file), "_%05zu.trace", i);
            trace.source_id = spec.name + "/" + spec.name + file;
            traces.push_back(std::move(trace));
        }
    }
    return corpus;
}

std::size_t write_corpus(const Corpus& corpus, const fs::path& out_dir) {
    std::size_t written = 0;
    for (const auto& [family, traces] : corpus.families) {
        const fs::path dir = out_dir / family;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const auto& trace = traces[i];
            const auto slash = trace.source_id.rfind('/');
            std::string file = slash == std::string::npos ? trace.source_id : trace.source_id.substr(slash + 1);
            if (file.empty()) file = family + "_" + std::to_string(i) + ".trace";
            std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write '" + (dir / file).string() + "'");
            for (const auto& op : trace.opcodes) out << op << '\n';
            out.flush();
            if (!out) throw IoError("failed writing '" + (dir / file).string() + "'");
            ++written;
        }
    }
    return written;
}

}  // namespace imdcf
