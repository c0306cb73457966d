#include "eip/tags.hpp"

#include <cctype>
#include <limits>

namespace eip::tags {

namespace {

bool symbol_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    TagRef run() {
        if (text_.empty()) fail("empty tag");
        TagRef ref;
        for (;;) {
            ref.parts.push_back(part());
            if (at_end()) break;
            if (text_[pos_] != '.') fail(std::string("illegal character '") + text_[pos_] + "'");
            ++pos_;
        }
        return ref;
    }

private:
    TagPart part() {
        const auto start = pos_;
        while (!at_end() && symbol_char(text_[pos_])) ++pos_;
        if (pos_ == start) {
            if (at_end()) fail("missing symbol name");
            fail(std::string("illegal character '") + text_[pos_] + "'");
        }
        TagPart p;
        p.symbol = std::string(text_.substr(start, pos_ - start));
        if (std::isdigit(static_cast<unsigned char>(p.symbol.front()))) fail("symbol starts with a digit: " + p.symbol);
        if (p.symbol.size() > cip::kMaxSymbolLength) fail("symbol longer than 40 characters: " + p.symbol);
        if (!at_end() && text_[pos_] == '[') p.index = index();
        return p;
    }

    std::uint32_t index() {
        ++pos_;
        const auto start = pos_;
        std::uint64_t value = 0;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + static_cast<unsigned>(text_[pos_] - '0');
            if (value > std::numeric_limits<std::uint32_t>::max()) fail("array index overflows 32 bits");
            ++pos_;
        }
        if (pos_ == start) fail("empty or non-numeric array index");
        if (at_end() || text_[pos_] != ']') fail("unterminated array index");
        ++pos_;
        return static_cast<std::uint32_t>(value);
    }

    bool at_end() const { return pos_ >= text_.size(); }

    [[noreturn]] void fail(const std::string& why) const {
        throw TagSyntaxError("bad tag '" + std::string(text_) + "': " + why);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

bool valid_symbol(std::string_view symbol) noexcept {
    if (symbol.empty() || symbol.size() > cip::kMaxSymbolLength) return false;
    if (std::isdigit(static_cast<unsigned char>(symbol.front()))) return false;
    for (char c : symbol) {
        if (!symbol_char(c)) return false;
    }
    return true;
}

TagRef parse_tag(std::string_view text) { return Parser(text).run(); }

TagRef parse_bool_array_tag(std::string_view text) {
    auto ref = parse_tag(text);
    if (!ref.parts.back().index) {
        throw TagSyntaxError("bad tag '" + std::string(text) + "': BOOL-array reference needs an element index");
    }
    ref.bool_array = true;
    return ref;
}

std::string format_tag(const TagRef& ref) {
    std::string out;
    for (const auto& p : ref.parts) {
        if (!out.empty()) out += '.';
        out += p.symbol;
        if (p.index) out += '[' + std::to_string(*p.index) + ']';
    }
    return out;
}

cip::Epath to_epath(const TagRef& ref) {
    cip::Epath path;
    for (const auto& p : ref.parts) {
        path.emplace_back(cip::Symbol{p.symbol});
        if (p.index) path.emplace_back(cip::Element{*p.index});
    }
    return path;
}

std::pair<TagRef, unsigned> bool_remap(const TagRef& ref) {
    if (!ref.bool_array) throw UsageError("bool_remap on a reference not flagged as a BOOL array");
    if (ref.parts.empty() || !ref.parts.back().index) throw UsageError("bool_remap needs a final element index");
    const auto bit_index = *ref.parts.back().index;
    TagRef dint = ref;
    dint.parts.back().index = bit_index / 32;
    return {dint, bit_index % 32};
}

std::uint32_t dint_span_for_bools(std::uint32_t bit_count) {
    if (bit_count == 0) throw UsageError("BOOL count must be at least 1");
    return bit_count / 32 + (bit_count % 32 != 0 ? 1 : 0);
}

TagRef array_base(const TagRef& ref) {
    TagRef base = ref;
    if (!base.parts.empty()) base.parts.back().index.reset();
    return base;
}

}  // namespace eip::tags
