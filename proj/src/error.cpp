#include "imdcf/error.hpp"

namespace imdcf {

const char* exit_code_name(ExitCode code) noexcept {
    switch (code) {
        case ExitCode::ok: return "ok";
        case ExitCode::failure: return "failure";
        case ExitCode::usage: return "usage";
        case ExitCode::layout: return "layout";
        case ExitCode::cap_violation: return "cap_violation";
        case ExitCode::io: return "io";
        case ExitCode::registry: return "registry";
        case ExitCode::empty_sequence: return "empty_sequence";
        case ExitCode::validation: return "validation";
        case ExitCode::parse: return "parse";
        case ExitCode::empty_corpus: return "empty_corpus";
        case ExitCode::symbol_range: return "symbol_range";
        case ExitCode::state: return "state";
        case ExitCode::unknown_family: return "unknown_family";
        case ExitCode::oracle_size: return "oracle_size";
        case ExitCode::dimension: return "dimension";
        case ExitCode::subset_exhausted: return "subset_exhausted";
        case ExitCode::stratification: return "stratification";
        case ExitCode::precondition: return "precondition";
    }
    return "unknown";
}

}  // namespace imdcf
