#include "eip/scan_config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "eip/tags.hpp"

namespace eip::scanner {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw UsageError("line " + std::to_string(line) + ": " + what);
}

std::uint64_t number(int line, const std::string& key, const std::string& text, std::uint64_t max) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || v > max) fail(line, "bad value for " + key + ": '" + text + "'");
    return v;
}

std::pair<std::string, std::string> split_key(const std::string& word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) return {word, {}};
    return {word.substr(0, eq), word.substr(eq + 1)};
}

PlcConfig parse_plc(int line, const std::vector<std::string>& words) {
    if (words.size() < 3) fail(line, "expected: plc <name> <host>[:<port>] slot=<n>");
    PlcConfig plc;
    plc.name = words[1];
    try {
        plc.endpoint = client::parse_host_port(words[2]);
    } catch (const Error& e) {
        fail(line, e.what());
    }
    bool have_slot = false;
    for (std::size_t i = 3; i < words.size(); ++i) {
        const auto [key, value] = split_key(words[i]);
        if (key == "slot") {
            plc.endpoint.slot = static_cast<std::uint8_t>(number(line, key, value, 255));
            have_slot = true;
        } else if (key == "limit") {
            plc.endpoint.buffer_limit = number(line, key, value, 65535);
        } else if (key == "connected" && value.empty()) {
            plc.endpoint.connected_messaging = true;
        } else {
            fail(line, "unknown key '" + key + "'");
        }
    }
    if (!have_slot) fail(line, "missing slot=");
    try {
        plc.endpoint.validate();
    } catch (const Error& e) {
        fail(line, e.what());
    }
    return plc;
}

std::vector<TagConfig> parse_tag_line(int line, const std::vector<std::string>& words) {
    if (words.size() < 3) fail(line, "expected: tag <plc> <tagref> period=<ms> dir=<in|out>");
    TagConfig base;
    base.plc = words[1];
    base.line = line;
    std::uint64_t elements = 1;
    bool bool_array = false;
    bool have_period = false;
    bool have_dir = false;
    for (std::size_t i = 3; i < words.size(); ++i) {
        const auto [key, value] = split_key(words[i]);
        if (key == "period") {
            const auto ms = number(line, key, value, 86'400'000);
            if (ms == 0) fail(line, "period must be positive");
            base.spec.period = std::chrono::milliseconds(ms);
            have_period = true;
        } else if (key == "dir") {
            if (value == "in") {
                base.spec.direction = Direction::Input;
            } else if (value == "out") {
                base.spec.direction = Direction::Output;
            } else {
                fail(line, "dir must be in or out");
            }
            have_dir = true;
        } else if (key == "type") {
            base.spec.elem_type = cip::elem_type_from_name(value);
            if (!base.spec.elem_type) fail(line, "unknown type '" + value + "'");
        } else if (key == "elements") {
            elements = number(line, key, value, 65535);
            if (elements == 0) fail(line, "elements must be positive");
        } else if (key == "no-coalesce" && value.empty()) {
            base.spec.coalesce = false;
        } else if (key == "bool-array" && value.empty()) {
            bool_array = true;
        } else {
            fail(line, "unknown key '" + key + "'");
        }
    }
    if (!have_period) fail(line, "missing period=");
    if (!have_dir) fail(line, "missing dir=");

    tags::TagRef ref;
    try {
        ref = tags::parse_tag(words[2]);
    } catch (const Error& e) {
        fail(line, e.what());
    }
    if (elements > 1 || bool_array) {
        auto& last = ref.parts.back();
        if (!last.index) last.index = 0;
    }
    ref.bool_array = bool_array;

    std::vector<TagConfig> out;
    const auto first = ref.parts.back().index.value_or(0);
    if (first + elements - 1 > 0xFFFFFFFFull) fail(line, "index range overflows");
    for (std::uint64_t k = 0; k < elements; ++k) {
        auto entry = base;
        entry.spec.ref = ref;
        if (elements > 1) entry.spec.ref.parts.back().index = static_cast<std::uint32_t>(first + k);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace

ScanConfig parse_scan_config(std::istream& in) {
    ScanConfig config;
    std::set<std::string> names;
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
        ++line;
        std::istringstream words_in(text);
        std::vector<std::string> words;
        for (std::string w; words_in >> w;) words.push_back(w);
        if (words.empty() || words[0][0] == '#') continue;
        if (words[0] == "plc") {
            auto plc = parse_plc(line, words);
            if (!names.insert(plc.name).second) fail(line, "duplicate plc '" + plc.name + "'");
            config.plcs.push_back(std::move(plc));
        } else if (words[0] == "tag") {
            auto entries = parse_tag_line(line, words);
            if (!names.count(entries.front().plc)) fail(line, "unknown plc '" + entries.front().plc + "'");
            for (auto& e : entries) config.tags.push_back(std::move(e));
        } else {
            fail(line, "unknown directive '" + words[0] + "'");
        }
    }
    return config;
}

ScanConfig load_scan_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path.string());
    return parse_scan_config(in);
}

}  // namespace eip::scanner
