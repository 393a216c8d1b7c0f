#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imdcf {

inline constexpr std::size_t kDefaultTopK = 26;

// One observation symbol. Indices 0..top_k-1 are ranked opcodes ("A".."Z" for
// the default alphabet); index top_k is the catch-all.
struct Symbol {
    std::uint16_t index = 0;

    friend constexpr auto operator<=>(Symbol, Symbol) = default;
};

struct OpcodeTrace {
    std::vector<std::string> opcodes;  // uppercased, whitespace-free
    std::string source_id;
};

struct ObservationSequence {
    std::vector<Symbol> symbols;
    std::optional<std::string> label;
    std::string source_id;

    std::size_t size() const noexcept { return symbols.size(); }
    bool empty() const noexcept { return symbols.empty(); }
};

// Frequency-ranked mapping from mnemonics to symbols. Immutable once built.
class EncodingTable {
public:
    static constexpr int kFormatVersion = 1;

    EncodingTable() = default;

    // Rebuilds a table from persisted parts. Throws ValidationError when
    // `ranked` is not the ordering implied by `counts` (count desc, name asc)
    // or holds more than top_k entries.
    EncodingTable(std::vector<std::string> ranked,
                  std::map<std::string, std::uint64_t> counts,
                  std::size_t top_k,
                  int version = kFormatVersion);

    std::size_t top_k() const noexcept { return top_k_; }
    std::size_t alphabet_size() const noexcept { return top_k_ + 1; }
    Symbol catch_all() const noexcept { return Symbol{static_cast<std::uint16_t>(top_k_)}; }
    int version() const noexcept { return version_; }

    const std::vector<std::string>& ranked() const noexcept { return ranked_; }
    const std::map<std::string, std::uint64_t>& corpus_counts() const noexcept { return counts_; }

    std::optional<std::size_t> rank_of(std::string_view mnemonic) const;

    // Unranked or unknown mnemonics map to the catch-all.
    Symbol encode(std::string_view mnemonic) const;

    // Display name of a symbol: the ranked mnemonic, or "*" for the catch-all.
    std::string_view name_of(Symbol s) const;

    friend bool operator==(const EncodingTable&, const EncodingTable&) = default;

private:
    std::vector<std::string> ranked_;
    std::map<std::string, std::uint64_t> counts_;
    std::map<std::string, std::uint16_t, std::less<>> lookup_;
    std::size_t top_k_ = kDefaultTopK;
    int version_ = kFormatVersion;
};

// Uppercases ASCII letters.
std::string normalize_mnemonic(std::string_view token);

// Whitespace-delimited mnemonics; lines whose first non-blank character is '#'
// are skipped. Throws ParseError on invalid UTF-8.
OpcodeTrace parse_trace(std::string_view text, std::string source_id = {});

// Throws EmptyCorpusError when the traces hold no opcode at all.
EncodingTable build_alphabet(std::span<const OpcodeTrace> traces,
                             std::size_t top_k = kDefaultTopK);

ObservationSequence encode_trace(const OpcodeTrace& trace, const EncodingTable& table);

}  // namespace imdcf
