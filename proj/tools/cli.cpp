#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "imdcf/error.hpp"
#include "imdcf/eval_harness.hpp"
#include "imdcf/pipeline.hpp"
#include "imdcf/registry.hpp"
#include "imdcf/stream_classifier.hpp"

namespace imdcf::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TrainArgs {
    std::string corpus;
    std::string out;
    RunConfig config;
    bool require_benign = false;
};

struct ClassifyArgs {
    std::string registry;
    std::string trace = "-";
    std::string mode = "batch";
    std::optional<std::size_t> window_len;
    std::optional<std::size_t> max_extension;
};

struct EvalArgs {
    std::string registry;
    std::string corpus;
    std::string task = "classify";
    std::string out;
    std::vector<std::size_t> lengths = {1, 10, 50, 100, 500, 1000, 2000};
    std::optional<std::size_t> window_len;
};

struct SynthArgs {
    std::string spec;
    bool benchmark = false;
    std::size_t n_sequences = 300;
    std::size_t length = 5000;
    std::string out;
    std::uint64_t seed = 0;
};

std::string read_text(const std::string& path, std::istream& in) {
    std::ostringstream buf;
    if (path == "-") {
        buf << in.rdbuf();
    } else {
        std::ifstream file(path, std::ios::binary);
        if (!file) throw IoError("cannot read '" + path + "'");
        buf << file.rdbuf();
    }
    return buf.str();
}

json decision_record(const ClassificationDecision& d) {
    return json{{"final_family", d.final_family},
                {"new_family", d.is_new_family()},
                {"detection", detection_name(detection_of(d))},
                {"confidence", d.confidence},
                {"symbols_consumed", d.symbols_consumed},
                {"tie_rounds", d.tie_rounds}};
}

json step_record(std::size_t step, const std::string& opcode, Symbol sym, const StepDecision& d) {
    json rec{{"step", step},
             {"opcode", opcode},
             {"symbol", sym.index},
             {"verdict", verdict_name(d.verdict)},
             {"family", d.family ? json(*d.family) : json(nullptr)},
             {"resolution", d.resolution ? json(*d.resolution) : json(nullptr)},
             {"scores", d.per_family_scores},
             {"accepting", std::vector<std::string>(d.accepting_families.begin(), d.accepting_families.end())},
             {"delta", d.delta}};
    return rec;
}

int cmd_train(const TrainArgs& args, std::ostream& out) {
    const Corpus corpus = load_corpus(args.corpus);
    const TrainingOutcome outcome = train_registry(corpus, args.config, args.require_benign);

    for (const auto& s : outcome.summary) {
        double mean_llpo = 0.0;
        for (double v : s.member_train_llpo) mean_llpo += v;
        mean_llpo /= static_cast<double>(s.member_train_llpo.size());
        out << "family " << s.name << ": train=" << s.n_train << " validation=" << s.n_validation
            << " test=" << s.n_test << " members=" << s.member_train_llpo.size()
            << " mean_train_llpo=" << format_double(mean_llpo)
            << " threshold=" << format_double(s.threshold) << '\n';
    }
    RegistryFile file{kRegistryFormatVersion, outcome.registry, utc_timestamp()};
    save_registry(file, args.out);
    out << "registry written to " << args.out << '\n';
    return 0;
}

int cmd_classify(const ClassifyArgs& args, std::istream& in, std::ostream& out, std::ostream& err) {
    const RegistryFile file = load_registry(args.registry);
    const ModelRegistry& registry = file.registry;
    const std::size_t window_len = args.window_len.value_or(registry.config.window_len);
    const std::size_t max_extension = args.max_extension.value_or(registry.config.max_extension);

    if (args.mode == "batch") {
        const OpcodeTrace trace = parse_trace(read_text(args.trace, in), args.trace);
        const ObservationSequence seq = encode_trace(trace, registry.encoding);
        const auto decision = classify_sequence(registry, seq.symbols, window_len, max_extension);
        out << decision_record(decision).dump() << '\n';
        return 0;
    }

    std::ifstream file_in;
    std::istream* source = &in;
    if (args.trace != "-") {
        file_in.open(args.trace, std::ios::binary);
        if (!file_in) throw IoError("cannot read '" + args.trace + "'");
        source = &file_in;
    }
    StreamState state(registry, window_len);
    std::size_t step = 0;
    std::string line;
    while (std::getline(*source, line)) {
        const OpcodeTrace tokens = parse_trace(line);
        for (const auto& op : tokens.opcodes) {
            const Symbol sym = registry.encoding.encode(op);
            state.push_symbol(sym);
            if (state.decision_log().back().verdict == Verdict::pending) state.resolve_tie(max_extension);
            out << step_record(step++, op, sym, state.decision_log().back()).dump() << '\n';
            out.flush();
        }
    }
    if (step > 0) err << "final " << decision_record(state.conclude()).dump() << '\n';
    return 0;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
    const RegistryFile file = load_registry(args.registry);
    const ModelRegistry& registry = file.registry;
    const std::size_t window_len = args.window_len.value_or(registry.config.window_len);

    std::error_code ec;
    fs::create_directories(args.out, ec);
    if (ec || !fs::is_directory(args.out)) throw IoError("output directory '" + args.out + "' is not writable");

    const Corpus corpus = load_corpus(args.corpus);
    const LabeledDataset data = encode_corpus(corpus, registry.encoding, registry.config);
    const auto test = data.part(Split::test);

    if (args.task == "sweep") {
        const SweepResult sweep = length_sweep(registry, test, args.lengths, window_len);
        export_report(sweep, args.out);
        for (std::size_t i = 0; i < sweep.lengths.size(); ++i) {
            out << "length=" << sweep.lengths[i] << " accuracy=" << format_double(sweep.accuracy_at[i])
                << " n=" << sweep.sample_count[i] << '\n';
        }
        return 0;
    }

    const EvaluationReport report = args.task == "detect" ? evaluate_detection(registry, test, window_len)
                                                          : evaluate_classification(registry, test, window_len);
    export_report(report, args.out);
    out << "task=" << args.task << " n=" << report.per_sample.size()
        << " accuracy=" << format_double(report.accuracy)
        << " detection_accuracy=" << format_double(report.detection_accuracy)
        << " classification_accuracy=" << format_double(report.classification_accuracy)
        << " combined_accuracy=" << format_double(report.combined_accuracy);
    if (report.false_positive_rate) out << " false_positive_rate=" << format_double(*report.false_positive_rate);
    if (report.false_negative_rate) out << " false_negative_rate=" << format_double(*report.false_negative_rate);
    out << '\n';
    return 0;
}

int cmd_synth(const SynthArgs& args, std::istream& in, std::ostream& out) {
    std::vector<SynthFamilySpec> specs;
    if (args.benchmark) {
        specs = benchmark_synth_spec(args.n_sequences, args.length);
    } else if (!args.spec.empty()) {
        specs = parse_synth_spec(read_text(args.spec, in));
    } else {
        throw PreconditionError("synth needs --spec FILE or --benchmark");
    }
    const Corpus corpus = synthesize_corpus(specs, args.seed);
    const std::size_t written = write_corpus(corpus, args.out);
    out << "wrote " << written << " traces for " << corpus.families.size() << " families to " << args.out
        << '\n';
    return 0;
}

// Fills options that were not given on the command line from a TOML/INI
// file. Keys are long option names; '_' and '-' are interchangeable.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::FileError& e) {
        throw IoError("cannot read config file '" + path + "'");
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--" || item.name.empty()) continue;
        std::string key = item.name;
        std::replace(key.begin(), key.end(), '_', '-');
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw PreconditionError("config file '" + path + "' sets unknown option '" + item.name + "'");
        }
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

void add_run_config_options(CLI::App& cmd, RunConfig& c) {
    cmd.add_option("--n-states", c.n_states, "Hidden states per HMM")->capture_default_str();
    cmd.add_option("--ensemble-size", c.ensemble_size, "HMMs per family")->capture_default_str();
    cmd.add_option("--subset-size", c.subset_size, "Training files per HMM")->capture_default_str();
    cmd.add_option("--max-iters", c.max_iters, "Baum-Welch iterations")->capture_default_str();
    cmd.add_option("--window-len", c.window_len, "Sliding window length")->capture_default_str();
    cmd.add_option("--threshold-percentile", c.threshold_percentile,
                   "Validation quantile used as the acceptance threshold")
        ->capture_default_str();
    cmd.add_option("--top-k", c.top_k, "Ranked opcodes in the alphabet")->capture_default_str();
    cmd.add_option("--max-extension", c.max_extension, "Longest tie-break window")->capture_default_str();
    cmd.add_option("--train-fraction", c.train_fraction, "Per-family training share")->capture_default_str();
    cmd.add_option("--validation-fraction", c.validation_fraction, "Per-family validation share")
        ->capture_default_str();
    cmd.add_option("--seed", c.seed, "RNG seed")->required();
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"imdcf: incremental malware detection and classification with one-class HMM ensembles"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train family ensembles from a corpus directory");
    std::string train_config;
    train->add_option("--config", train_config, "TOML/INI file with option values; flags take precedence");
    train->add_option("--corpus", train_args.corpus, "Corpus directory, one subdirectory per family")->required();
    train->add_option("--out", train_args.out, "Registry output path")->required();
    train->add_flag("--require-benign", train_args.require_benign, "Fail unless a 'benign' family exists");
    add_run_config_options(*train, train_args.config);

    ClassifyArgs classify_args;
    auto* classify = app.add_subcommand("classify", "Classify a trace in batch or streaming mode");
    classify->add_option("--registry", classify_args.registry, "Registry file")->required();
    classify->add_option("--trace", classify_args.trace, "Trace file, or - for standard input")
        ->capture_default_str();
    classify->add_option("--mode", classify_args.mode, "batch or stream")
        ->check(CLI::IsMember({"batch", "stream"}))
        ->capture_default_str();
    classify->add_option("--window-len", classify_args.window_len, "Override the registry window length");
    classify->add_option("--max-extension", classify_args.max_extension, "Override the tie-break window cap");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a registry on the corpus test split");
    eval->add_option("--registry", eval_args.registry, "Registry file")->required();
    eval->add_option("--corpus", eval_args.corpus, "Corpus directory used for training")->required();
    eval->add_option("--task", eval_args.task, "detect, classify, or sweep")
        ->check(CLI::IsMember({"detect", "classify", "sweep"}))
        ->capture_default_str();
    eval->add_option("--out", eval_args.out, "Directory for CSV reports")->required();
    eval->add_option("--lengths", eval_args.lengths, "Sweep lengths, ascending")->delimiter(',');
    eval->add_option("--window-len", eval_args.window_len, "Override the registry window length");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus sampled from generator HMMs");
    synth->add_option("--spec", synth_args.spec, "Generator spec (JSON)");
    synth->add_flag("--benchmark", synth_args.benchmark, "Use the built-in benchmark generators");
    synth->add_option("--n-sequences", synth_args.n_sequences, "Sequences per family with --benchmark")
        ->capture_default_str();
    synth->add_option("--length", synth_args.length, "Sequence length with --benchmark")->capture_default_str();
    synth->add_option("--out", synth_args.out, "Output corpus directory")->required();
    synth->add_option("--seed", synth_args.seed, "RNG seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (*train) {
            if (!train_config.empty()) apply_config_file(*train, train_config);
            return cmd_train(train_args, out);
        }
        if (*classify) return cmd_classify(classify_args, in, out, err);
        if (*eval) return cmd_eval(eval_args, out);
        if (*synth) return cmd_synth(synth_args, in, out);
    } catch (const Error& e) {
        err << "error (" << exit_code_name(e.exit_code()) << "): " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::failure);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace imdcf::cli
