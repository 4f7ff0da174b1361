#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "domodel/error.hpp"

namespace domodel {

namespace naming_detail {

inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_high(char c) { return static_cast<unsigned char>(c) >= 0x80; }
inline bool is_word(char c) { return is_upper(c) || is_lower(c) || is_digit(c) || is_high(c); }
inline char up(char c) { return is_lower(c) ? static_cast<char>(c - 'a' + 'A') : c; }
inline char down(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

inline std::string title(std::string_view token) {
    std::string out(token);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i == 0 ? up(out[i]) : down(out[i]);
    return out;
}

inline std::string lower(std::string_view token) {
    std::string out(token);
    for (auto& c : out) c = down(c);
    return out;
}

}  // namespace naming_detail

/// Splits a raw name into word tokens. Separators are any ASCII
/// non-alphanumeric character; inside a word a new token starts at a
/// lower/digit -> upper transition and before the last capital of an
/// acronym run that is followed by lowercase ("HTTPServer" -> HTTP, Server).
inline std::vector<std::string> split_name_tokens(std::string_view raw) {
    using namespace naming_detail;
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (!is_word(c)) {
            flush();
            continue;
        }
        if (!current.empty() && is_upper(c)) {
            const char prev = current.back();
            const bool camel_hump = is_lower(prev) || is_digit(prev) || is_high(prev);
            const bool acronym_end =
                is_upper(prev) && i + 1 < raw.size() && is_lower(raw[i + 1]);
            if (camel_hump || acronym_end) flush();
        }
        current.push_back(c);
    }
    flush();
    return tokens;
}

namespace naming_detail {

inline std::string camel_pass(std::string_view raw, bool upper_first) {
    const auto tokens = split_name_tokens(raw);
    if (tokens.empty()) throw EmptyName(std::string(raw));
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out += (i == 0 && !upper_first) ? lower(tokens[i]) : title(tokens[i]);
    return out;
}

// One pass is not always a fixed point: "a b" -> "AB" re-tokenizes as the
// acronym "AB". Iterating converges within a couple of passes.
inline std::string camel(std::string_view raw, bool upper_first) {
    std::string cur = camel_pass(raw, upper_first);
    for (int i = 0; i < 8; ++i) {
        std::string next = camel_pass(cur, upper_first);
        if (next == cur) break;
        cur = std::move(next);
    }
    return cur;
}

}  // namespace naming_detail

/// "bus driver" -> "BusDriver", "BTMS" -> "Btms". Throws EmptyName.
inline std::string to_upper_camel(std::string_view raw) { return naming_detail::camel(raw, true); }

/// "Pick Up Time" -> "pickUpTime". Throws EmptyName.
inline std::string to_lower_camel(std::string_view raw) { return naming_detail::camel(raw, false); }

inline bool is_upper_camel(std::string_view s) {
    if (s.empty() || !naming_detail::is_upper(s.front())) return false;
    try {
        return to_upper_camel(s) == s;
    } catch (const EmptyName&) {
        return false;
    }
}

inline bool is_lower_camel(std::string_view s) {
    if (s.empty() || !naming_detail::is_lower(s.front())) return false;
    try {
        return to_lower_camel(s) == s;
    } catch (const EmptyName&) {
        return false;
    }
}

/// SCREAMING_CASE, accepted for enumeration literals in hand-written models.
inline bool is_all_caps(std::string_view s) {
    using namespace naming_detail;
    if (s.empty() || !is_upper(s.front())) return false;
    for (char c : s)
        if (!(is_upper(c) || is_digit(c) || c == '_')) return false;
    return true;
}

/// Lowercased camel/word tokens, used for partial name matching.
inline std::vector<std::string> lowercase_tokens(std::string_view name) {
    auto tokens = split_name_tokens(name);
    for (auto& t : tokens) t = naming_detail::lower(t);
    return tokens;
}

}  // namespace domodel
