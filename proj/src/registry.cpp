#include "imdcf/registry.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "imdcf/error.hpp"

namespace imdcf {

using nlohmann::json;

void RunConfig::validate() const {
    if (n_states == 0 || ensemble_size == 0 || subset_size == 0 || window_len == 0 || top_k == 0 ||
        max_extension == 0) {
        throw PreconditionError("run configuration counts must all be at least 1");
    }
    if (!(threshold_percentile >= 0.0 && threshold_percentile < 1.0)) {
        throw PreconditionError("threshold_percentile must lie in [0, 1)");
    }
    if (!(train_fraction > 0.0 && validation_fraction > 0.0 &&
          train_fraction + validation_fraction < 1.0)) {
        throw PreconditionError("train and validation fractions must be positive and leave room for a test split");
    }
}

namespace {

json config_to_json(const RunConfig& c) {
    return json{{"n_states", c.n_states},
                {"ensemble_size", c.ensemble_size},
                {"subset_size", c.subset_size},
                {"max_iters", c.max_iters},
                {"window_len", c.window_len},
                {"threshold_percentile", c.threshold_percentile},
                {"seed", c.seed},
                {"top_k", c.top_k},
                {"max_extension", c.max_extension},
                {"train_fraction", c.train_fraction},
                {"validation_fraction", c.validation_fraction}};
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.n_states = j.at("n_states").get<std::size_t>();
    c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    c.subset_size = j.at("subset_size").get<std::size_t>();
    c.max_iters = j.at("max_iters").get<std::size_t>();
    c.window_len = j.at("window_len").get<std::size_t>();
    c.threshold_percentile = j.at("threshold_percentile").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.top_k = j.at("top_k").get<std::size_t>();
    c.max_extension = j.at("max_extension").get<std::size_t>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    return c;
}

json rows_to_json(std::span<const double> data, std::size_t rows, std::size_t cols) {
    json out = json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        out.push_back(std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                          data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
    }
    return out;
}

json hmm_to_json(const HmmParams& p) {
    return json{{"n_states", p.n_states()},
                {"n_symbols", p.n_symbols()},
                {"initial", std::vector<double>(p.initial().begin(), p.initial().end())},
                {"transition", rows_to_json(p.transition_data(), p.n_states(), p.n_states())},
                {"emission", rows_to_json(p.emission_data(), p.n_states(), p.n_symbols())}};
}

HmmParams hmm_from_json(const json& j) {
    auto hmm = HmmParams::from_rows(j.at("initial").get<std::vector<double>>(),
                                    j.at("transition").get<std::vector<std::vector<double>>>(),
                                    j.at("emission").get<std::vector<std::vector<double>>>());
    if (hmm.n_states() != j.at("n_states").get<std::size_t>() ||
        hmm.n_symbols() != j.at("n_symbols").get<std::size_t>()) {
        throw DimensionError("declared HMM dimensions disagree with its matrices");
    }
    return hmm;
}

json family_to_json(const FamilyModel& f) {
    json members = json::array();
    for (const auto& m : f.members) members.push_back(hmm_to_json(m));
    return json{{"name", f.name},
                {"threshold", f.threshold},
                {"members", members},
                {"subset_manifest", f.subset_manifest},
                {"member_train_llpo", f.member_train_llpo}};
}

FamilyModel family_from_json(const json& j) {
    FamilyModel f;
    f.name = j.at("name").get<std::string>();
    if (!j.at("threshold").is_number()) throw ValidationError("family '" + f.name + "' threshold is not a number");
    f.threshold = j.at("threshold").get<double>();
    for (const auto& m : j.at("members")) f.members.push_back(hmm_from_json(m));
    f.subset_manifest = j.at("subset_manifest").get<std::vector<std::vector<std::string>>>();
    f.member_train_llpo = j.at("member_train_llpo").get<std::vector<double>>();
    return f;
}

json encoding_to_json(const EncodingTable& t) {
    return json{{"version", t.version()},
                {"top_k", t.top_k()},
                {"ranked", t.ranked()},
                {"corpus_counts", t.corpus_counts()}};
}

EncodingTable encoding_from_json(const json& j) {
    return EncodingTable(j.at("ranked").get<std::vector<std::string>>(),
                         j.at("corpus_counts").get<std::map<std::string, std::uint64_t>>(),
                         j.at("top_k").get<std::size_t>(),
                         j.at("version").get<int>());
}

}  // namespace

std::string serialize_registry(const RegistryFile& file) {
    json families = json::array();
    for (const auto& [name, model] : file.registry.families) families.push_back(family_to_json(model));
    const json doc{{"format_version", file.format_version},
                   {"created_at", file.created_at},
                   {"training_config", config_to_json(file.registry.config)},
                   {"encoding_table", encoding_to_json(file.registry.encoding)},
                   {"families", families}};
    return doc.dump(2) + "\n";
}

RegistryFile parse_registry(std::string_view text) {
    try {
        const json doc = json::parse(text);
        RegistryFile file;
        file.format_version = doc.at("format_version").get<int>();
        if (file.format_version != kRegistryFormatVersion) {
            throw RegistryError("unsupported registry format_version " + std::to_string(file.format_version));
        }
        file.created_at = doc.at("created_at").get<std::string>();
        file.registry.config = config_from_json(doc.at("training_config"));
        file.registry.encoding = encoding_from_json(doc.at("encoding_table"));
        for (const auto& f : doc.at("families")) {
            FamilyModel model = family_from_json(f);
            const std::string name = model.name;
            if (!file.registry.families.emplace(name, std::move(model)).second) {
                throw RegistryError("duplicate family '" + name + "' in registry");
            }
        }
        file.registry.validate();
        return file;
    } catch (const RegistryError&) {
        throw;
    } catch (const json::exception& e) {
        throw RegistryError(std::string("malformed registry: ") + e.what());
    } catch (const Error& e) {
        throw RegistryError(std::string("invalid registry: ") + e.what());
    }
}

void save_registry(const RegistryFile& file, const std::filesystem::path& path) {
    file.registry.validate();
    const std::string text = serialize_registry(file);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write registry to '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing registry to '" + path.string() + "'");
}

RegistryFile load_registry(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read registry '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_registry(buf.str());
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace imdcf
