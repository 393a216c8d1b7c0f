#include "imdcf/opcode_codec.hpp"

#include <algorithm>
#include <unordered_map>

#include "imdcf/error.hpp"

namespace imdcf {

namespace {

bool valid_utf8(std::string_view text) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= n) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong forms, surrogates, out-of-range code points.
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
            (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Ranking order: higher count first, then lexicographically ascending.
bool ranks_before(const std::pair<std::string, std::uint64_t>& a,
                  const std::pair<std::string, std::uint64_t>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
}

}  // namespace

std::string normalize_mnemonic(std::string_view token) {
    std::string out(token);
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
    return out;
}

OpcodeTrace parse_trace(std::string_view text, std::string source_id) {
    if (!valid_utf8(text)) {
        throw ParseError("trace '" + source_id + "' is not valid UTF-8");
    }
    OpcodeTrace trace;
    trace.source_id = std::move(source_id);

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;

        std::size_t i = 0;
        while (i < line.size() && is_space(line[i])) ++i;
        if (i < line.size() && line[i] == '#') continue;

        while (i < line.size()) {
            while (i < line.size() && is_space(line[i])) ++i;
            const std::size_t start = i;
            while (i < line.size() && !is_space(line[i])) ++i;
            if (i > start) trace.opcodes.push_back(normalize_mnemonic(line.substr(start, i - start)));
        }
    }
    return trace;
}

EncodingTable::EncodingTable(std::vector<std::string> ranked,
                             std::map<std::string, std::uint64_t> counts,
                             std::size_t top_k,
                             int version)
    : ranked_(std::move(ranked)), counts_(std::move(counts)), top_k_(top_k), version_(version) {
    if (top_k_ == 0 || top_k_ >= 0xFFFF) {
        throw ValidationError("encoding table top_k must be in [1, 65534]");
    }
    if (ranked_.size() > top_k_) {
        throw ValidationError("encoding table ranks more mnemonics than top_k");
    }
    if (ranked_.size() != std::min(top_k_, counts_.size())) {
        throw ValidationError("encoding table must rank min(top_k, distinct mnemonics) entries");
    }
    for (std::size_t r = 0; r < ranked_.size(); ++r) {
        const auto it = counts_.find(ranked_[r]);
        if (it == counts_.end()) {
            throw ValidationError("ranked mnemonic '" + ranked_[r] + "' has no corpus count");
        }
        if (!lookup_.emplace(ranked_[r], static_cast<std::uint16_t>(r)).second) {
            throw ValidationError("duplicate ranked mnemonic '" + ranked_[r] + "'");
        }
        if (r > 0 && !ranks_before({ranked_[r - 1], counts_.at(ranked_[r - 1])}, *it)) {
            throw ValidationError("ranked mnemonics are not in (count desc, name asc) order");
        }
    }
    // Every unranked mnemonic must rank after the last ranked one.
    if (!ranked_.empty()) {
        const std::pair<std::string, std::uint64_t> last{ranked_.back(), counts_.at(ranked_.back())};
        for (const auto& entry : counts_) {
            if (!lookup_.contains(entry.first) && ranks_before(entry, last)) {
                throw ValidationError("unranked mnemonic '" + entry.first + "' outranks a ranked one");
            }
        }
    }
}

std::optional<std::size_t> EncodingTable::rank_of(std::string_view mnemonic) const {
    const auto it = lookup_.find(mnemonic);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

Symbol EncodingTable::encode(std::string_view mnemonic) const {
    const auto it = lookup_.find(mnemonic);
    return it == lookup_.end() ? catch_all() : Symbol{it->second};
}

std::string_view EncodingTable::name_of(Symbol s) const {
    if (s.index < ranked_.size()) return ranked_[s.index];
    return "*";
}

EncodingTable build_alphabet(std::span<const OpcodeTrace> traces, std::size_t top_k) {
    std::unordered_map<std::string, std::uint64_t> tally;
    std::uint64_t total = 0;
    for (const auto& trace : traces) {
        for (const auto& op : trace.opcodes) {
            ++tally[op];
            ++total;
        }
    }
    if (total == 0) throw EmptyCorpusError("cannot build an alphabet from an empty corpus");

    std::vector<std::pair<std::string, std::uint64_t>> order(tally.begin(), tally.end());
    std::sort(order.begin(), order.end(), ranks_before);

    std::vector<std::string> ranked;
    const std::size_t keep = std::min(top_k, order.size());
    ranked.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) ranked.push_back(order[i].first);

    return EncodingTable(std::move(ranked),
                         std::map<std::string, std::uint64_t>(tally.begin(), tally.end()),
                         top_k);
}

ObservationSequence encode_trace(const OpcodeTrace& trace, const EncodingTable& table) {
    ObservationSequence seq;
    seq.source_id = trace.source_id;
    seq.symbols.reserve(trace.opcodes.size());
    for (const auto& op : trace.opcodes) seq.symbols.push_back(table.encode(op));
    return seq;
}

}  // namespace imdcf
