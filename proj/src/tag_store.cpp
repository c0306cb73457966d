#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eip/errors.hpp"
#include "eip/plcsim.hpp"
#include "eip/tags.hpp"

namespace eip::plcsim {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

std::uint32_t parse_element(cip::ElemType type, const std::string& text) {
    if (text.empty()) throw UsageError("empty value");
    char* end = nullptr;
    errno = 0;
    if (type == cip::ElemType::Real) {
        const float v = std::strtof(text.c_str(), &end);
        if (*end != '\0' || errno == ERANGE) throw UsageError("bad REAL value '" + text + "'");
        return cip::CipValue::reals({v}).raw(0);
    }
    if (type == cip::ElemType::Bool) {
        if (text == "true" || text == "1") return 1;
        if (text == "false" || text == "0") return 0;
        throw UsageError("bad BOOL value '" + text + "'");
    }
    const long long v = std::strtoll(text.c_str(), &end, 0);
    if (*end != '\0' || errno == ERANGE) throw UsageError("bad integer value '" + text + "'");
    const auto bits = cip::width(type) * 8;
    const long long lo = -(1LL << (bits - 1));
    const long long hi = (1LL << bits) - 1;
    if (v < lo || v > hi) throw UsageError("value '" + text + "' out of range for " + std::string(cip::name(type)));
    return static_cast<std::uint32_t>(v);
}

}  // namespace

void TagStore::define(const std::string& name, cip::CipValue value) {
    if (value.empty()) throw UsageError("tag '" + name + "' needs at least one element");
    tags_[name] = std::move(value);
}

const cip::CipValue* TagStore::find(const std::string& name) const {
    auto it = tags_.find(name);
    return it == tags_.end() ? nullptr : &it->second;
}

cip::CipValue* TagStore::find(const std::string& name) {
    auto it = tags_.find(name);
    return it == tags_.end() ? nullptr : &it->second;
}

TagStore parse_tag_definitions(std::istream& in) {
    TagStore store;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto text = trim(line);
        if (text.empty()) continue;
        try {
            const auto eq = text.find('=');
            const auto decl = trim(text.substr(0, eq));
            const auto space = decl.find_first_of(" \t");
            if (space == std::string::npos) throw UsageError("expected '<name> <TYPE>[<len>]'");
            const auto name = trim(decl.substr(0, space));
            auto type_text = trim(decl.substr(space + 1));

            const auto ref = tags::parse_tag(name);
            if (ref.parts.back().index) throw UsageError("tag name must not end in an index: " + name);

            std::size_t length = 1;
            if (const auto br = type_text.find('['); br != std::string::npos) {
                if (type_text.back() != ']') throw UsageError("unterminated array length in '" + type_text + "'");
                const auto len_text = type_text.substr(br + 1, type_text.size() - br - 2);
                char* end = nullptr;
                const auto len = std::strtoul(len_text.c_str(), &end, 10);
                if (len_text.empty() || *end != '\0' || len == 0 || len > 65535) {
                    throw UsageError("bad array length '" + len_text + "'");
                }
                length = len;
                type_text.erase(br);
            }
            const auto type = cip::elem_type_from_name(type_text);
            if (!type) throw UsageError("unknown type '" + type_text + "'");

            std::vector<std::uint32_t> raw(length, 0);
            if (eq != std::string::npos) {
                const auto values_text = trim(text.substr(eq + 1));
                if (!values_text.empty()) {
                    const auto values = split(values_text, ',');
                    if (values.size() > length) {
                        throw UsageError(std::to_string(values.size()) + " values for " + std::to_string(length) +
                                         " elements");
                    }
                    for (std::size_t i = 0; i < values.size(); ++i) raw[i] = parse_element(*type, values[i]);
                }
            }
            store.define(tags::format_tag(ref), cip::CipValue(*type, std::move(raw)));
        } catch (const UsageError& e) {
            throw UsageError("tag file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

TagStore load_tag_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open tag file " + path);
    return parse_tag_definitions(in);
}

FaultPlan parse_faults(const std::string& text) {
    FaultPlan plan;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        const auto key = item.substr(0, eq);
        const auto value = eq == std::string::npos ? std::string{} : item.substr(eq + 1);
        auto number = [&](const std::string& v) {
            char* end = nullptr;
            const auto n = std::strtoull(v.c_str(), &end, 0);
            if (v.empty() || *end != '\0') throw UsageError("bad number in fault '" + item + "'");
            return n;
        };
        if (key == "refuse-sessions") {
            plan.refuse_sessions = true;
        } else if (key == "refuse-connections") {
            plan.refuse_connections = true;
        } else if (key == "drop-after") {
            plan.drop_after_requests = number(value);
        } else if (key == "close-idle-ms") {
            plan.close_idle_after = std::chrono::milliseconds(number(value));
        } else if (key == "latency-ms") {
            plan.latency = std::chrono::milliseconds(number(value));
        } else if (key == "jitter-ms") {
            plan.jitter = std::chrono::milliseconds(number(value));
        } else if (key == "seed") {
            plan.seed = number(value);
        } else if (key == "status") {
            const auto colon = value.find(':');
            if (colon == std::string::npos) throw UsageError("fault 'status' expects <service>:<status> in hex");
            const auto svc = std::strtoul(value.substr(0, colon).c_str(), nullptr, 16);
            const auto st = std::strtoul(value.substr(colon + 1).c_str(), nullptr, 16);
            if (svc > 0x7F || st == 0 || st > 0xFF) throw UsageError("bad status fault '" + item + "'");
            plan.status_injection[static_cast<std::uint8_t>(svc)] = static_cast<std::uint8_t>(st);
        } else {
            throw UsageError("unknown fault '" + key + "'");
        }
    }
    return plan;
}

}  // namespace eip::plcsim
