#pragma once

// Human-written tag addresses: "TEST", "arr[5].sub[2]", "Local:1:I.Ch0Data".

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eip/cip.hpp"
#include "eip/errors.hpp"

namespace eip::tags {

class TagSyntaxError : public UsageError {
public:
    using UsageError::UsageError;
};

struct TagPart {
    std::string symbol;
    std::optional<std::uint32_t> index;

    friend bool operator==(const TagPart&, const TagPart&) = default;
};

struct TagRef {
    std::vector<TagPart> parts;
    /// The final index addresses one bit of a BOOL array held as DINTs.
    bool bool_array = false;

    friend bool operator==(const TagRef&, const TagRef&) = default;
};

/// name ('[' uint ']')? ('.' name ('[' uint ']')?)*
/// Throws TagSyntaxError.
TagRef parse_tag(std::string_view text);

/// Parses and flags the reference as a BOOL-array bit. The final part must be indexed.
TagRef parse_bool_array_tag(std::string_view text);

std::string format_tag(const TagRef& ref);

cip::Epath to_epath(const TagRef& ref);

/// Maps BOOL index n to DINT element n / 32, bit n % 32.
/// Throws UsageError unless bool_array is set and the final part is indexed.
std::pair<TagRef, unsigned> bool_remap(const TagRef& ref);

/// DINT elements needed to hold `bit_count` BOOLs.
std::uint32_t dint_span_for_bools(std::uint32_t bit_count);

/// The reference with its final index removed: identifies the array that
/// elements of the same tag share.
TagRef array_base(const TagRef& ref);

bool valid_symbol(std::string_view symbol) noexcept;

}  // namespace eip::tags
