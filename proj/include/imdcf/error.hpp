#pragma once

#include <stdexcept>
#include <string>

namespace imdcf {

// Process exit codes. Every error class maps to exactly one nonzero code.
enum class ExitCode : int {
    ok = 0,
    failure = 1,
    usage = 2,
    layout = 3,
    cap_violation = 4,
    io = 5,
    registry = 6,
    empty_sequence = 7,
    validation = 8,
    parse = 9,
    empty_corpus = 10,
    symbol_range = 11,
    state = 12,
    unknown_family = 13,
    oracle_size = 14,
    dimension = 15,
    subset_exhausted = 16,
    stratification = 17,
    precondition = 18,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::failure; }
};

#define IMDCF_DECLARE_ERROR(Name, Code)                                        \
    class Name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
        ExitCode exit_code() const noexcept override { return ExitCode::Code; }\
    }

IMDCF_DECLARE_ERROR(ParseError, parse);
IMDCF_DECLARE_ERROR(EmptyCorpusError, empty_corpus);
IMDCF_DECLARE_ERROR(EmptySequenceError, empty_sequence);
IMDCF_DECLARE_ERROR(SymbolRangeError, symbol_range);
IMDCF_DECLARE_ERROR(OracleSizeError, oracle_size);
IMDCF_DECLARE_ERROR(DimensionError, dimension);
IMDCF_DECLARE_ERROR(ValidationError, validation);
IMDCF_DECLARE_ERROR(SubsetExhaustedError, subset_exhausted);
IMDCF_DECLARE_ERROR(CapViolationError, cap_violation);
IMDCF_DECLARE_ERROR(UnknownFamilyError, unknown_family);
IMDCF_DECLARE_ERROR(StateError, state);
IMDCF_DECLARE_ERROR(StratificationError, stratification);
IMDCF_DECLARE_ERROR(PreconditionError, precondition);
IMDCF_DECLARE_ERROR(IoError, io);
IMDCF_DECLARE_ERROR(LayoutError, layout);
IMDCF_DECLARE_ERROR(RegistryError, registry);

#undef IMDCF_DECLARE_ERROR

const char* exit_code_name(ExitCode code) noexcept;

}  // namespace imdcf
