#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "domodel/error.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/naming.hpp"

namespace domodel {

struct ParsedAttribute {
    std::string name;
    std::optional<std::string> type;

    friend bool operator==(const ParsedAttribute&, const ParsedAttribute&) = default;
};

struct ClassLine {
    std::string name;
    std::vector<ParsedAttribute> attributes;

    friend bool operator==(const ClassLine&, const ClassLine&) = default;
};

struct EnumLine {
    std::string name;
    std::vector<std::string> literals;

    friend bool operator==(const EnumLine&, const EnumLine&) = default;
};

struct AssocLine {
    std::string source;
    std::optional<Multiplicity> source_mult;
    std::string target;
    std::optional<Multiplicity> target_mult;
    RelKind kind = RelKind::Association;  // ASSOCIATION or AGGREGATION

    friend bool operator==(const AssocLine&, const AssocLine&) = default;
};

struct InheritLine {
    std::string child;
    std::string parent;

    friend bool operator==(const InheritLine&, const InheritLine&) = default;
};

/// One element recognized on one line of LLM output.
struct ParsedElement {
    using Value = std::variant<ClassLine, EnumLine, AssocLine, InheritLine>;
    Value value;
    std::string raw_line;

    template <class T>
    const T* as() const { return std::get_if<T>(&value); }

    friend bool operator==(const ParsedElement&, const ParsedElement&) = default;
};

struct ParseError {
    int line_number = 0;  // 1-based
    std::string raw_line;
    std::string reason;
};

struct ParseResult {
    std::vector<ParsedElement> elements;
    std::vector<ParseError> errors;
};

namespace lineparse_detail {

using naming_detail::down;
using naming_detail::is_digit;
using naming_detail::is_lower;
using naming_detail::is_upper;

inline std::string lower(std::string_view s) { return naming_detail::lower(s); }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

inline std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (down(s[i]) != down(prefix[i])) return false;
    return true;
}

/// Removes markdown emphasis/backticks, a leading bullet or numbering, and
/// trailing sentence punctuation.
inline std::string clean_line(std::string_view raw) {
    std::string s;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '`') continue;
        if ((raw[i] == '*' || raw[i] == '_') && i + 1 < raw.size() && raw[i + 1] == raw[i]) {
            ++i;
            continue;
        }
        s.push_back(raw[i]);
    }
    std::string_view v = trim(s);
    // Markdown headings.
    while (!v.empty() && v.front() == '#') v.remove_prefix(1);
    v = trim(v);
    // Bullets: -, *, +, •, 1. 1) (1) a.
    auto strip_once = [](std::string_view t) -> std::string_view {
        if (t.size() >= 2 && (t[0] == '-' || t[0] == '*' || t[0] == '+') &&
            std::isspace(static_cast<unsigned char>(t[1])))
            return t.substr(2);
        if (t.rfind("\xE2\x80\xA2", 0) == 0) return t.substr(3);  // U+2022
        std::size_t i = 0;
        if (!t.empty() && t[0] == '(') {
            std::size_t j = 1;
            while (j < t.size() && is_digit(t[j])) ++j;
            if (j > 1 && j < t.size() && t[j] == ')') return t.substr(j + 1);
        }
        while (i < t.size() && is_digit(t[i])) ++i;
        if (i > 0 && i + 1 < t.size() && (t[i] == '.' || t[i] == ')') &&
            std::isspace(static_cast<unsigned char>(t[i + 1])))
            return t.substr(i + 2);
        if (t.size() >= 3 && is_lower(t[0]) && t[1] == ')' && t[2] == ' ') return t.substr(3);
        return t;
    };
    v = trim(strip_once(v));
    while (!v.empty() && (v.back() == '.' || v.back() == ';')) {
        // Keep a multiplicity ending in ".." intact ("1..").
        if (v.size() >= 2 && v[v.size() - 2] == '.' && v.back() == '.') break;
        v.remove_suffix(1);
    }
    return std::string(trim(v));
}

inline bool is_identifier_word(std::string_view w) {
    if (w.empty() || !(is_upper(w[0]) || is_lower(w[0]))) return false;
    return std::all_of(w.begin(), w.end(), [](char c) {
        return is_upper(c) || is_lower(c) || is_digit(c) || c == '_' ||
               static_cast<unsigned char>(c) >= 0x80;
    });
}

/// 1..max_words identifier words ("Bus Driver", "pickUpTime").
inline bool is_name_phrase(std::string_view s, std::size_t max_words) {
    auto ws = words(s);
    if (ws.empty() || ws.size() > max_words) return false;
    return std::all_of(ws.begin(), ws.end(), [](const std::string& w) { return is_identifier_word(w); });
}

inline bool is_capitalized_phrase(std::string_view s, std::size_t max_words) {
    if (!is_name_phrase(s, max_words)) return false;
    auto ws = words(s);
    return std::all_of(ws.begin(), ws.end(), [](const std::string& w) { return is_upper(w[0]); });
}

inline std::string join(const std::vector<std::string>& ws, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (i) out += sep;
        out += ws[i];
    }
    return out;
}

/// Splits on `,`/`;` outside of (), [], <>.
inline std::vector<std::string> split_items(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(' || c == '[' || c == '<') ++depth;
        if (c == ')' || c == ']' || c == '>') depth = std::max(0, depth - 1);
        if ((c == ',' || c == ';') && depth == 0) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.emplace_back(trim(cur));
    return out;
}

inline bool is_type_word(std::string_view w) {
    static const std::set<std::string, std::less<>> kTypeWords = {
        "string", "str",     "text",     "char",      "varchar", "int",     "integer",
        "long",   "short",   "number",   "float",     "double",  "real",    "decimal",
        "bool",   "boolean", "date",     "datetime",  "time",    "timestamp"};
    return kTypeWords.count(lower(w)) > 0;
}

inline bool has_prose_word(std::string_view s) {
    static const std::set<std::string, std::less<>> kProse = {
        "a", "an", "the", "is", "are", "was", "be", "who", "which", "that", "this",
        "it", "will", "can", "may", "should", "we", "you", "i", "here", "there"};
    for (const auto& w : words(s))
        if (kProse.count(lower(w))) return true;
    return false;
}

enum class AttrOrder { NameFirst, TypeFirst };

/// Parses one attribute item; nullopt when malformed.
inline std::optional<ParsedAttribute> parse_attribute(std::string_view item, AttrOrder order) {
    item = trim(item);
    if (item.empty()) return std::nullopt;
    if (item.find_first_of("{}=") != std::string_view::npos) return std::nullopt;
    ParsedAttribute attr;
    if (auto colon = item.find(':'); colon != std::string_view::npos) {
        auto name = trim(item.substr(0, colon));
        auto type = trim(item.substr(colon + 1));
        if (!is_name_phrase(name, 5)) return std::nullopt;
        attr.name = join(words(name));
        if (!type.empty()) attr.type = std::string(type);
        return attr;
    }
    if (item.back() == ')') {
        auto open = item.rfind('(');
        if (open != std::string_view::npos && open > 0) {
            auto name = trim(item.substr(0, open));
            auto type = trim(item.substr(open + 1, item.size() - open - 2));
            if (!is_name_phrase(name, 5) || type.empty()) return std::nullopt;
            attr.name = join(words(name));
            attr.type = std::string(type);
            return attr;
        }
    }
    auto ws = words(item);
    if (ws.size() == 2 && (is_type_word(ws[0]) || (order == AttrOrder::TypeFirst && is_identifier_word(ws[0])))) {
        if (!is_identifier_word(ws[1])) return std::nullopt;
        attr.type = ws[0];
        attr.name = ws[1];
        return attr;
    }
    if (!is_name_phrase(item, 5)) return std::nullopt;
    attr.name = join(ws);
    return attr;
}

inline std::optional<std::string> parse_literal(std::string_view item) {
    item = trim(item);
    while (!item.empty() && (item.front() == '\'' || item.front() == '"')) item.remove_prefix(1);
    while (!item.empty() && (item.back() == '\'' || item.back() == '"')) item.remove_suffix(1);
    auto ws = words(item);
    if (ws.empty() || ws.size() > 4) return std::nullopt;
    for (const auto& w : ws)
        if (!std::all_of(w.begin(), w.end(), [](char c) {
                return is_upper(c) || is_lower(c) || is_digit(c) || c == '_' || c == '-';
            }))
            return std::nullopt;
    return join(ws);
}

enum class Section { None, Enums, Classes, Relationships };

/// Recognizes "Classes:", "### Enumerations" and similar headings.
inline std::optional<Section> heading(std::string_view line) {
    std::string_view v = trim(line);
    if (!v.empty() && v.back() == ':') v.remove_suffix(1);
    const std::string w = lower(trim(v));
    if (w == "enumerations" || w == "enumeration" || w == "enums" || w == "enum")
        return Section::Enums;
    if (w == "classes" || w == "class" || w == "classes and attributes")
        return Section::Classes;
    if (w == "relationships" || w == "relationship" || w == "relations" || w == "associations" ||
        w == "aggregations" || w == "inheritances" || w == "inheritance" ||
        w == "associations and aggregations")
        return Section::Relationships;
    return std::nullopt;
}

struct LineOutcome {
    std::optional<ParsedElement> element;
    std::optional<std::string> error;
};

inline std::optional<std::vector<ParsedAttribute>> parse_attribute_list(std::string_view body,
                                                                        AttrOrder order) {
    std::vector<ParsedAttribute> attrs;
    if (trim(body).empty()) return attrs;
    for (const auto& item : split_items(body)) {
        if (item.empty()) continue;
        auto a = parse_attribute(item, order);
        if (!a) return std::nullopt;
        attrs.push_back(std::move(*a));
    }
    return attrs;
}

inline std::optional<std::vector<std::string>> parse_literal_list(std::string_view body) {
    std::vector<std::string> lits;
    for (const auto& item : split_items(body)) {
        if (item.empty()) continue;
        auto l = parse_literal(item);
        if (!l) return std::nullopt;
        lits.push_back(std::move(*l));
    }
    return lits;
}

/// Strips one layer of {...} or (...) around an attribute/literal list.
inline std::string_view unwrap_list(std::string_view s) {
    s = trim(s);
    if (!s.empty() && (s.front() == '{' || s.front() == '(')) s.remove_prefix(1);
    if (!s.empty() && (s.back() == '}' || s.back() == ')')) s.remove_suffix(1);
    return trim(s);
}

inline LineOutcome make_type_line(bool is_enum, std::string_view name, std::string_view list,
                                  AttrOrder order, const std::string& raw) {
    LineOutcome out;
    if (is_enum) {
        auto lits = parse_literal_list(list);
        if (!lits) return {std::nullopt, "malformed enumeration literal"};
        if (lits->empty()) return {std::nullopt, "enumeration without literals"};
        out.element = ParsedElement{EnumLine{join(words(name)), std::move(*lits)}, raw};
    } else {
        auto attrs = parse_attribute_list(list, order);
        if (!attrs) return {std::nullopt, "malformed attribute list"};
        out.element = ParsedElement{ClassLine{join(words(name)), std::move(*attrs)}, raw};
    }
    return out;
}

inline LineOutcome parse_class_line(const std::string& raw, Section section) {
    const std::string line = clean_line(raw);
    std::string_view v = line;
    if (v.empty()) return {};

    // Keyword form: class/enum/enumeration Name <sep> list
    for (std::string_view kw : {"enumeration ", "enum ", "class "}) {
        if (!starts_with_ci(v, kw)) continue;
        const bool is_enum = kw != "class ";
        std::string_view rest = trim(v.substr(kw.size()));
        std::size_t cut = rest.size();
        for (std::string_view sep : {"{", ":", "(", " - ", " \xE2\x80\x93 "}) {
            auto p = rest.find(sep);
            if (p != std::string_view::npos && p < cut) cut = p;
        }
        std::string_view name = trim(rest.substr(0, cut));
        std::string_view list = cut < rest.size() ? rest.substr(cut) : std::string_view{};
        if (list.rfind(" - ", 0) == 0) list.remove_prefix(3);
        else if (list.rfind(" \xE2\x80\x93 ", 0) == 0) list.remove_prefix(5);
        else if (!list.empty() && list.front() == ':') list.remove_prefix(1);
        if (!is_name_phrase(name, 4))
            return {std::nullopt, std::string("unrecognized ") + (is_enum ? "enumeration" : "class") + " name"};
        return make_type_line(is_enum, name, unwrap_list(list), AttrOrder::NameFirst, raw);
    }

    if (section == Section::Relationships) return {};

    // Brace form without keyword: Name { ... }
    if (auto brace = v.find('{'); brace != std::string_view::npos) {
        std::string_view name = trim(v.substr(0, brace));
        if (name.empty() || !is_name_phrase(name, 4))
            return {std::nullopt, "braced list without a recognizable name"};
        return make_type_line(section == Section::Enums, name, unwrap_list(v.substr(brace)),
                              AttrOrder::NameFirst, raw);
    }

    // Parenthesized form: Name(Type attr, ...)
    if (v.back() == ')') {
        auto open = v.find('(');
        if (open != std::string_view::npos && open > 0) {
            std::string_view name = trim(v.substr(0, open));
            if (is_name_phrase(name, 1) || is_capitalized_phrase(name, 4)) {
                return make_type_line(section == Section::Enums, name,
                                      unwrap_list(v.substr(open)), AttrOrder::TypeFirst, raw);
            }
        }
    }

    // Separator form: Name: a, b  /  Name - a, b
    std::size_t cut = std::string_view::npos;
    std::size_t sep_len = 0;
    for (std::string_view sep : {":", " - ", " \xE2\x80\x93 "}) {
        auto p = v.find(sep);
        if (p != std::string_view::npos && p < cut) {
            cut = p;
            sep_len = sep.size();
        }
    }
    if (cut != std::string_view::npos) {
        std::string_view name = trim(v.substr(0, cut));
        std::string_view list = trim(v.substr(cut + sep_len));
        if (!is_capitalized_phrase(name, 4) || heading(name)) return {};
        static const std::set<std::string, std::less<>> kLabels = {
            "note", "notes", "output", "answer", "example", "explanation", "attributes",
            "literals", "description", "system", "summary", "step", "result"};
        if (kLabels.count(lower(words(name).front()))) return {};
        if (list.empty() || has_prose_word(list)) return {};
        for (const auto& item : split_items(list))
            if (words(item).size() > 3) return {};
        auto out = make_type_line(section == Section::Enums, name, list, AttrOrder::NameFirst, raw);
        if (out.error) return {};  // prose that happens to contain a colon
        return out;
    }
    return {};
}

inline bool is_none_marker(std::string_view raw) {
    std::string s = lower(clean_line(raw));
    return s == "none" || s == "n/a" || s == "no relationships" || s == "no inheritance" ||
           s == "no inheritances" || s == "there are no relationships" ||
           s == "there are no inheritances" || s == "no associations" || s == "(none)";
}

// --- relationship lines -----------------------------------------------------

inline const std::set<std::string, std::less<>>& aggregation_verbs() {
    static const std::set<std::string, std::less<>> v = {"contain", "contains", "has", "owns"};
    return v;
}

inline const std::set<std::string, std::less<>>& association_verbs() {
    static const std::set<std::string, std::less<>> v = {"associate", "associates", "associated",
                                                         "offer", "offers"};
    return v;
}

inline bool is_arrow(std::string_view w) {
    return w == "-" || w == "--" || w == "->" || w == "-->" || w == "<->" || w == "<-->" ||
           w == "\xE2\x80\x94" || w == "\xE2\x80\x93";
}

/// Position and text of the first inheritance phrase, if any.
struct InheritKeyword {
    std::size_t pos = std::string::npos;
    std::size_t len = 0;
};

inline InheritKeyword find_inherit_keyword(std::string_view line) {
    static const std::vector<std::string> kPhrases = {
        " extends ",           " extend ",         " inherits from ",     " inherit from ",
        " inherits ",          " inherit ",        " is a subclass of ",  " is an subclass of ",
        " is a kind of ",      " is a type of ",   " is a specialization of ",
        " is derived from ",   " is a child of ",  " are subclasses of ", " are kinds of "};
    const std::string l = " " + lower(line) + " ";
    InheritKeyword best;
    for (const auto& p : kPhrases) {
        auto pos = l.find(p);
        if (pos == std::string::npos) continue;
        if (pos < best.pos || (pos == best.pos && p.size() > best.len)) {
            best.pos = pos;
            best.len = p.size();
        }
    }
    // Map back to `line` coordinates (l has one extra leading space).
    if (best.pos != std::string::npos) {
        best.len = best.len - 2;
        best.pos = best.pos;  // position of the leading space in l == keyword start - 1 + 1
    }
    return best;
}

/// Replaces "(1..*)"/"[0..1]" with the multiplicity and drops other
/// parenthesized commentary.
inline std::string strip_commentary(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char open = s[i];
        if (open == '(' || open == '[') {
            const char close = open == '(' ? ')' : ']';
            auto end = s.find(close, i + 1);
            if (end == std::string_view::npos) {
                out.append(s.substr(i));  // unbalanced: keep
                break;
            }
            auto inner = s.substr(i + 1, end - i - 1);
            if (Multiplicity::parse(inner)) {
                out += ' ';
                out.append(trim(inner));
                out += ' ';
            } else if (open == '[') {
                out.append(s.substr(i, end - i + 1));
            }
            i = end + 1;
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

inline bool looks_like_class_line(std::string_view cleaned) {
    return starts_with_ci(cleaned, "class ") || starts_with_ci(cleaned, "enum ") ||
           starts_with_ci(cleaned, "enumeration ") || cleaned.find('{') != std::string_view::npos ||
           cleaned.find('}') != std::string_view::npos;
}

enum class TokKind { Mult, Ident, Word };

struct Token {
    TokKind kind;
    std::string text;
};

inline bool is_capital_stopword(std::string_view w) {
    static const std::set<std::string, std::less<>> kStop = {
        "The",  "A",     "An",   "Each",  "Every",    "One",     "Many",   "Some",  "Any",
        "All",  "This",  "That", "These", "Those",    "It",      "They",   "There", "Note",
        "If",   "When",  "And",  "Or",    "But",      "Only",    "Zero",   "No",    "Both",
        "Either", "Multiple", "Several", "Its", "Their", "In", "On", "With", "For", "Of"};
    return kStop.count(w) > 0;
}

inline std::vector<Token> tokenize_relationship(std::string_view s) {
    std::vector<Token> out;
    for (auto w : words(s)) {
        while (!w.empty() && std::string_view(",;:!?\"'").find(w.back()) != std::string_view::npos)
            w.pop_back();
        while (!w.empty() && (w.front() == '"' || w.front() == '\'')) w.erase(w.begin());
        if (w.size() > 2 && w.compare(w.size() - 2, 2, "'s") == 0) w.resize(w.size() - 2);
        if (w.empty()) continue;
        const bool lone_letter = w == "n" || w == "N" || w == "m" || w == "M";
        if (!lone_letter && Multiplicity::parse(w))
            out.push_back({TokKind::Mult, w});
        else if (is_upper(w[0]) && is_identifier_word(w) && !is_capital_stopword(w))
            out.push_back({TokKind::Ident, w});
        else
            out.push_back({TokKind::Word, w});
    }
    return out;
}

inline bool is_conjunction(std::string_view w) {
    return w == "or" || w == "and" || w == "&" || w == "/" || w == ",";
}

struct Group {
    std::size_t begin = 0;  // token index of first ident
    std::size_t end = 0;    // one past last ident
    std::string name;
    std::optional<Multiplicity> mult;
};

inline std::vector<ParsedElement> assoc_strict(const std::string& cleaned, const std::string& raw) {
    auto ws = words(cleaned);
    if (ws.size() != 5) return {};
    if (ws[2] != "associates" && ws[2] != "contains") return {};
    auto m1 = Multiplicity::parse(ws[0]);
    auto m2 = Multiplicity::parse(ws[3]);
    if (!m1 || !m2 || ws[0].front() == '[' || ws[3].front() == '[') return {};
    AssocLine a{ws[1], m1, ws[4], m2,
                ws[2] == "contains" ? RelKind::Aggregation : RelKind::Association};
    return {ParsedElement{std::move(a), raw}};
}

/// Parses one association/aggregation line. Returns no elements and no
/// error for lines that are not relationship-like.
inline LineOutcome parse_assoc_line_into(const std::string& raw, std::vector<ParsedElement>& out) {
    const std::string cleaned = clean_line(raw);
    if (cleaned.empty() || looks_like_class_line(cleaned) || heading(cleaned)) return {};
    if (find_inherit_keyword(cleaned).pos != std::string::npos) return {};

    if (auto strict = assoc_strict(cleaned, raw); !strict.empty()) {
        out.insert(out.end(), strict.begin(), strict.end());
        return {};
    }

    const auto toks = tokenize_relationship(strip_commentary(cleaned));
    bool has_mult = false, has_verb = false;
    for (const auto& t : toks) {
        if (t.kind == TokKind::Mult) has_mult = true;
        const auto l = lower(t.text);
        if (aggregation_verbs().count(l) || association_verbs().count(l) || is_arrow(t.text))
            has_verb = true;
    }
    if (!has_mult && !has_verb) return {};

    std::vector<Group> groups;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].kind != TokKind::Ident) continue;
        if (!groups.empty() && groups.back().end == i) {
            groups.back().end = i + 1;
            groups.back().name += " " + toks[i].text;
        } else {
            groups.push_back({i, i + 1, toks[i].text, std::nullopt});
        }
    }
    if (groups.size() < 2) return {std::nullopt, "cannot identify both relationship ends"};

    // Partition groups into sides separated by a non-conjunction gap.
    std::vector<std::vector<std::size_t>> sides{{0}};
    std::vector<std::string> verb_words;
    for (std::size_t g = 1; g < groups.size(); ++g) {
        bool only_conj = true;
        std::vector<std::string> gap;
        for (std::size_t i = groups[g - 1].end; i < groups[g].begin; ++i) {
            if (toks[i].kind == TokKind::Mult) continue;
            gap.push_back(toks[i].text);
            if (!is_conjunction(lower(toks[i].text))) only_conj = false;
        }
        if (only_conj && !gap.empty()) {
            sides.back().push_back(g);
        } else {
            if (sides.size() == 2) return {std::nullopt, "ambiguous relationship ends"};
            verb_words = std::move(gap);
            sides.push_back({g});
        }
    }
    if (sides.size() < 2) return {std::nullopt, "cannot identify both relationship ends"};
    if (verb_words.empty()) return {std::nullopt, "no relationship verb between the ends"};

    // Leading multiplicities first, then trailing ones from unclaimed tokens.
    std::vector<bool> used(toks.size(), false);
    for (auto& g : groups) {
        if (g.begin > 0 && toks[g.begin - 1].kind == TokKind::Mult && !used[g.begin - 1]) {
            g.mult = Multiplicity::parse(toks[g.begin - 1].text);
            used[g.begin - 1] = true;
        }
    }
    for (auto& g : groups) {
        if (!g.mult && g.end < toks.size() && toks[g.end].kind == TokKind::Mult && !used[g.end]) {
            g.mult = Multiplicity::parse(toks[g.end].text);
            used[g.end] = true;
        }
    }

    RelKind kind = RelKind::Association;
    for (const auto& w : verb_words)
        if (aggregation_verbs().count(lower(w))) kind = RelKind::Aggregation;

    for (auto s : sides[0])
        for (auto t : sides[1])
            out.push_back({AssocLine{groups[s].name, groups[s].mult, groups[t].name,
                                     groups[t].mult, kind},
                           raw});
    return {};
}

inline std::string strip_determiners(std::string_view s) {
    auto ws = words(s);
    static const std::set<std::string, std::less<>> kDet = {"a", "an", "the", "every", "each",
                                                            "all", "class"};
    while (!ws.empty() && kDet.count(lower(ws.front()))) ws.erase(ws.begin());
    return join(ws);
}

/// "the parent" reads as prose; "the Parent" as a class reference.
inline bool prose_reference(std::string_view original, const std::string& stripped) {
    return trim(original).size() != stripped.size() && !stripped.empty() &&
           !std::isupper(static_cast<unsigned char>(stripped.front()));
}

inline LineOutcome parse_inherit_line_into(const std::string& raw, std::vector<ParsedElement>& out) {
    const std::string cleaned = strip_commentary(clean_line(raw));
    const std::string_view v = trim(cleaned);
    if (v.empty()) return {};
    auto kw = find_inherit_keyword(v);
    if (kw.pos == std::string::npos) return {};

    std::string_view left = trim(v.substr(0, kw.pos));
    std::string_view right = trim(v.substr(std::min(v.size(), kw.pos + kw.len)));
    while (!right.empty() && (right.back() == '{' || right.back() == '}')) right = trim(right.substr(0, right.size() - 1));

    const std::string parent = strip_determiners(right);
    if (!is_name_phrase(parent, 4) || prose_reference(right, parent))
        return {std::nullopt, "unrecognized parent class"};

    std::vector<std::string> children;
    std::string l(left);
    for (auto& c : l)
        if (c == '&') c = ',';
    for (auto piece : split_items(l)) {
        // "A and B" inside one comma item.
        auto ws = words(piece);
        std::vector<std::string> cur;
        auto flush = [&] {
            if (!cur.empty()) {
                const auto joined = join(cur);
                auto name = strip_determiners(joined);
                if (prose_reference(joined, name)) name.clear();
                children.push_back(std::move(name));
            }
            cur.clear();
        };
        for (const auto& w : ws) {
            if (lower(w) == "and" || lower(w) == "or") flush();
            else cur.push_back(w);
        }
        flush();
    }
    if (children.empty()) return {std::nullopt, "unrecognized child class"};
    for (const auto& c : children)
        if (!is_name_phrase(c, 4)) return {std::nullopt, "unrecognized child class"};
    for (const auto& c : children) out.push_back({InheritLine{c, parent}, raw});
    return {};
}

template <class LineFn>
ParseResult scan_relationships(std::string_view text, LineFn&& fn) {
    ParseResult result;
    int n = 0;
    for (const auto& line : split_lines(text)) {
        ++n;
        auto outcome = fn(line, result.elements);
        if (outcome.error) result.errors.push_back({n, line, *outcome.error});
    }
    return result;
}

inline bool is_blank(std::string_view text) {
    return text.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

inline bool has_none_marker(std::string_view text) {
    for (const auto& line : split_lines(text))
        if (is_none_marker(line)) return true;
    return false;
}

}  // namespace lineparse_detail

/// Class/enum lines without raising EmptyOutput.
inline ParseResult scan_class_block(std::string_view text) {
    using namespace lineparse_detail;
    ParseResult result;
    Section section = Section::None;
    int n = 0;
    for (const auto& line : split_lines(text)) {
        ++n;
        if (auto h = heading(clean_line(line))) {
            section = *h;
            continue;
        }
        auto outcome = parse_class_line(line, section);
        if (outcome.element) result.elements.push_back(std::move(*outcome.element));
        if (outcome.error) result.errors.push_back({n, line, *outcome.error});
    }
    return result;
}

/// One ClassLine/EnumLine per element-like line. Prose lines are skipped;
/// element-like but malformed lines become ParseErrors. Throws EmptyOutput
/// when non-blank text yields no element.
inline ParseResult parse_class_block(std::string_view text) {
    auto result = scan_class_block(text);
    if (result.elements.empty() && !lineparse_detail::is_blank(text)) throw EmptyOutput();
    return result;
}

inline ParseResult scan_assoc_lines(std::string_view text) {
    return lineparse_detail::scan_relationships(text, [](const std::string& line, auto& out) {
        return lineparse_detail::parse_assoc_line_into(line, out);
    });
}

/// Association and aggregation lines. An explicit "none" answer yields an
/// empty result instead of EmptyOutput.
inline ParseResult parse_assoc_lines(std::string_view text) {
    auto result = scan_assoc_lines(text);
    if (result.elements.empty() && !lineparse_detail::is_blank(text) &&
        !lineparse_detail::has_none_marker(text))
        throw EmptyOutput();
    return result;
}

inline ParseResult scan_inherit_lines(std::string_view text) {
    return lineparse_detail::scan_relationships(text, [](const std::string& line, auto& out) {
        return lineparse_detail::parse_inherit_line_into(line, out);
    });
}

inline ParseResult parse_inherit_lines(std::string_view text) {
    auto result = scan_inherit_lines(text);
    if (result.elements.empty() && !lineparse_detail::is_blank(text) &&
        !lineparse_detail::has_none_marker(text))
        throw EmptyOutput();
    return result;
}

struct BaselineParse {
    ParseResult classes;        // ClassLine / EnumLine
    ParseResult relationships;  // AssocLine then InheritLine
};

/// Zero-shot output with Enumerations:/Classes:/Relationships: sections.
/// Throws EmptyOutput when non-blank text yields no element at all.
inline BaselineParse parse_baseline_output(std::string_view text) {
    BaselineParse out;
    out.classes = scan_class_block(text);
    auto assoc = scan_assoc_lines(text);
    auto inherit = scan_inherit_lines(text);
    out.relationships.elements = std::move(assoc.elements);
    out.relationships.elements.insert(out.relationships.elements.end(), inherit.elements.begin(),
                                      inherit.elements.end());
    out.relationships.errors = std::move(assoc.errors);
    out.relationships.errors.insert(out.relationships.errors.end(), inherit.errors.begin(),
                                    inherit.errors.end());
    if (out.classes.elements.empty() && out.relationships.elements.empty() &&
        !lineparse_detail::is_blank(text))
        throw EmptyOutput();
    return out;
}

/// Class and enumeration names of a class block, UpperCamelCased, in order
/// of first appearance.
inline std::vector<std::string> extract_class_names(std::string_view text) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& e : scan_class_block(text).elements) {
        std::string raw;
        if (auto c = e.as<ClassLine>()) raw = c->name;
        else if (auto en = e.as<EnumLine>()) raw = en->name;
        else continue;
        std::string name;
        try {
            name = to_upper_camel(raw);
        } catch (const EmptyName&) {
            continue;
        }
        if (seen.insert(name).second) names.push_back(name);
    }
    return names;
}

// --- canonical emission ------------------------------------------------------

inline std::string emit_line(const ParsedElement& e) {
    struct Visitor {
        std::string operator()(const ClassLine& c) const {
            std::string s = "class " + c.name + " {";
            for (std::size_t i = 0; i < c.attributes.size(); ++i) {
                s += i ? ", " : " ";
                s += c.attributes[i].name;
                if (c.attributes[i].type) s += ": " + *c.attributes[i].type;
            }
            return s + " }";
        }
        std::string operator()(const EnumLine& en) const {
            std::string s = "enum " + en.name + " {";
            for (std::size_t i = 0; i < en.literals.size(); ++i) {
                s += i ? ", " : " ";
                s += en.literals[i];
            }
            return s + " }";
        }
        std::string operator()(const AssocLine& a) const {
            std::string s;
            if (a.source_mult) s += a.source_mult->str() + " ";
            s += a.source;
            s += a.kind == RelKind::Aggregation ? " contains " : " associates ";
            if (a.target_mult) s += a.target_mult->str() + " ";
            return s + a.target;
        }
        std::string operator()(const InheritLine& i) const { return i.child + " extends " + i.parent; }
    };
    return std::visit(Visitor{}, e.value);
}

inline std::string emit_lines(const std::vector<ParsedElement>& elements) {
    std::string out;
    for (const auto& e : elements) out += emit_line(e) + "\n";
    return out;
}

/// The class block (classes, enums) and relationship lines of a model.
struct ModelLines {
    std::vector<ParsedElement> classes_block;
    std::vector<ParsedElement> relationships;
};

inline ModelLines to_parsed_elements(const DomainModel& model) {
    ModelLines out;
    for (const auto& e : model.enums) {
        ParsedElement pe{EnumLine{e.name, e.literals}, {}};
        pe.raw_line = emit_line(pe);
        out.classes_block.push_back(std::move(pe));
    }
    for (const auto& c : model.classes) {
        ClassLine cl{c.name, {}};
        for (const auto& a : c.attributes) cl.attributes.push_back({a.name, a.type_name});
        ParsedElement pe{std::move(cl), {}};
        pe.raw_line = emit_line(pe);
        out.classes_block.push_back(std::move(pe));
    }
    for (const auto& r : model.relationships) {
        ParsedElement pe{InheritLine{r.source, r.target}, {}};
        if (r.kind != RelKind::Inheritance)
            pe.value = AssocLine{r.source, r.source_mult, r.target, r.target_mult, r.kind};
        pe.raw_line = emit_line(pe);
        out.relationships.push_back(std::move(pe));
    }
    return out;
}

}  // namespace domodel
