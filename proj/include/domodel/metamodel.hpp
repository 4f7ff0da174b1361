#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "domodel/error.hpp"
#include "domodel/naming.hpp"

namespace domodel {

/// Every kind of LLM request the pipeline can issue.
enum class TaskKind {
    ClassTurn1,
    ClassTurn2,
    ClassSingleTurn,
    AssocAgg,
    Inheritance,
    RelCombined,
    BaselineZeroShot,
};

inline constexpr std::array<TaskKind, 7> kAllTasks = {
    TaskKind::ClassTurn1,  TaskKind::ClassTurn2,  TaskKind::ClassSingleTurn,
    TaskKind::AssocAgg,    TaskKind::Inheritance, TaskKind::RelCombined,
    TaskKind::BaselineZeroShot,
};

inline std::string_view to_string(TaskKind t) {
    switch (t) {
        case TaskKind::ClassTurn1: return "CLASS_TURN1";
        case TaskKind::ClassTurn2: return "CLASS_TURN2";
        case TaskKind::ClassSingleTurn: return "CLASS_SINGLE_TURN";
        case TaskKind::AssocAgg: return "ASSOC_AGG";
        case TaskKind::Inheritance: return "INHERITANCE";
        case TaskKind::RelCombined: return "REL_COMBINED";
        case TaskKind::BaselineZeroShot: return "BASELINE_ZERO_SHOT";
    }
    return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
    for (TaskKind t : kAllTasks)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

enum class RelKind { Association, Aggregation, Inheritance };

inline std::string_view to_string(RelKind k) {
    switch (k) {
        case RelKind::Association: return "ASSOCIATION";
        case RelKind::Aggregation: return "AGGREGATION";
        case RelKind::Inheritance: return "INHERITANCE";
    }
    return "?";
}

inline std::optional<RelKind> parse_rel_kind(std::string_view s) {
    for (RelKind k : {RelKind::Association, RelKind::Aggregation, RelKind::Inheritance})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

enum class ReviewStatus { Proposed, Accepted, Rejected };

inline std::string_view to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Proposed: return "PROPOSED";
        case ReviewStatus::Accepted: return "ACCEPTED";
        case ReviewStatus::Rejected: return "REJECTED";
    }
    return "?";
}

inline std::optional<ReviewStatus> parse_review_status(std::string_view s) {
    for (ReviewStatus r : {ReviewStatus::Proposed, ReviewStatus::Accepted, ReviewStatus::Rejected})
        if (to_string(r) == s) return r;
    return std::nullopt;
}

/// Cardinality of one relationship end; `upper` empty means `*`.
struct Multiplicity {
    int lower = 1;
    std::optional<int> upper = 1;

    static Multiplicity one() { return {1, 1}; }
    static Multiplicity many() { return {0, std::nullopt}; }

    bool valid() const { return lower >= 0 && (!upper || (*upper > 0 && lower <= *upper)); }

    std::string str() const {
        if (!upper) return std::to_string(lower) + "..*";
        if (*upper == lower) return std::to_string(lower);
        return std::to_string(lower) + ".." + std::to_string(*upper);
    }

    /// Accepts `1`, `*`, `n`, `0..1`, `1..*`, `0..n`, `1...*`, optionally
    /// wrapped in [] or (). Out-of-order bounds parse; valid() rejects them.
    static std::optional<Multiplicity> parse(std::string_view text) {
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
            return s;
        };
        text = trim(text);
        if (text.size() >= 2 && ((text.front() == '[' && text.back() == ']') ||
                                 (text.front() == '(' && text.back() == ')')))
            text = trim(text.substr(1, text.size() - 2));
        auto is_star = [](std::string_view s) {
            return s == "*" || s == "n" || s == "N" || s == "m" || s == "M";
        };
        auto number = [](std::string_view s) -> std::optional<int> {
            if (s.empty() || s.size() > 6) return std::nullopt;
            int v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
            return v;
        };
        if (is_star(text)) return many();
        if (auto n = number(text)) return Multiplicity{*n, *n};
        auto dots = text.find("..");
        if (dots == std::string_view::npos) return std::nullopt;
        auto lo = text.substr(0, dots);
        auto rest = text.substr(dots + 2);
        if (!rest.empty() && rest.front() == '.') rest.remove_prefix(1);
        auto l = number(trim(lo));
        if (!l) return std::nullopt;
        rest = trim(rest);
        if (is_star(rest)) return Multiplicity{*l, std::nullopt};
        auto u = number(rest);
        if (!u) return std::nullopt;
        return Multiplicity{*l, *u};
    }

    friend bool operator==(const Multiplicity&, const Multiplicity&) = default;
};

struct ElementProvenance {
    TaskKind task = TaskKind::ClassTurn2;
    std::string run_id;
    std::string raw_line;  // empty only for elements synthesized by fixing

    friend bool operator==(const ElementProvenance&, const ElementProvenance&) = default;
};

struct AttributeDef {
    std::string name;
    std::string type_name;
    ReviewStatus status = ReviewStatus::Proposed;

    friend bool operator==(const AttributeDef&, const AttributeDef&) = default;
};

struct ClassDef {
    std::string name;
    std::vector<AttributeDef> attributes;
    ElementProvenance provenance;
    ReviewStatus status = ReviewStatus::Proposed;

    friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

struct EnumDef {
    std::string name;
    std::vector<std::string> literals;
    ElementProvenance provenance;
    ReviewStatus status = ReviewStatus::Proposed;

    friend bool operator==(const EnumDef&, const EnumDef&) = default;
};

struct RelationshipDef {
    RelKind kind = RelKind::Association;
    std::string source;  // child for inheritance
    std::string target;  // parent for inheritance
    std::optional<Multiplicity> source_mult;
    std::optional<Multiplicity> target_mult;
    std::string name;
    ElementProvenance provenance;
    ReviewStatus status = ReviewStatus::Proposed;

    friend bool operator==(const RelationshipDef&, const RelationshipDef&) = default;
};

struct DomainModel {
    std::vector<ClassDef> classes;
    std::vector<EnumDef> enums;
    std::vector<RelationshipDef> relationships;

    const ClassDef* find_class(std::string_view name) const {
        auto it = std::find_if(classes.begin(), classes.end(),
                               [&](const ClassDef& c) { return c.name == name; });
        return it == classes.end() ? nullptr : &*it;
    }
    ClassDef* find_class(std::string_view name) {
        return const_cast<ClassDef*>(std::as_const(*this).find_class(name));
    }
    const EnumDef* find_enum(std::string_view name) const {
        auto it = std::find_if(enums.begin(), enums.end(),
                               [&](const EnumDef& e) { return e.name == name; });
        return it == enums.end() ? nullptr : &*it;
    }
    bool empty() const { return classes.empty() && enums.empty() && relationships.empty(); }

    friend bool operator==(const DomainModel&, const DomainModel&) = default;
};

inline constexpr std::array<std::string_view, 5> kDataTypes = {"String", "Integer", "Real",
                                                               "Boolean", "Date"};

inline bool is_primitive_type(std::string_view name) {
    return std::find(kDataTypes.begin(), kDataTypes.end(), name) != kDataTypes.end();
}

/// Primitive data type or an enumeration declared in `model`.
inline bool is_data_type(const DomainModel& model, std::string_view name) {
    return is_primitive_type(name) || model.find_enum(name) != nullptr;
}

/// The association/aggregation name used when none is given.
inline std::string default_relationship_name(std::string_view source, std::string_view target) {
    return to_lower_camel(std::string(source) + " " + std::string(target));
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationRule {
    NamingConvention,
    DuplicateName,
    DuplicateAttribute,
    DuplicateLiteral,
    EmptyEnum,
    TypeCorrectness,
    UnknownEnd,
    MissingMultiplicity,
    InvalidMultiplicity,
    InheritanceMultiplicity,
    SelfInheritance,
    InheritanceCycle,
};

inline std::string_view to_string(ViolationRule r) {
    switch (r) {
        case ViolationRule::NamingConvention: return "NamingConvention";
        case ViolationRule::DuplicateName: return "DuplicateName";
        case ViolationRule::DuplicateAttribute: return "DuplicateAttribute";
        case ViolationRule::DuplicateLiteral: return "DuplicateLiteral";
        case ViolationRule::EmptyEnum: return "EmptyEnum";
        case ViolationRule::TypeCorrectness: return "TypeCorrectness";
        case ViolationRule::UnknownEnd: return "UnknownEnd";
        case ViolationRule::MissingMultiplicity: return "MissingMultiplicity";
        case ViolationRule::InvalidMultiplicity: return "InvalidMultiplicity";
        case ViolationRule::InheritanceMultiplicity: return "InheritanceMultiplicity";
        case ViolationRule::SelfInheritance: return "SelfInheritance";
        case ViolationRule::InheritanceCycle: return "InheritanceCycle";
    }
    return "?";
}

struct Violation {
    ViolationRule rule;
    std::string element;
    std::string description;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(summary(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string summary(const std::vector<Violation>& v) {
        std::string s = "model is not well-formed";
        for (const auto& x : v)
            s += "; " + std::string(to_string(x.rule)) + " at " + x.element + ": " + x.description;
        return s;
    }
    std::vector<Violation> violations_;
};

inline std::string relationship_ref(const RelationshipDef& r) {
    return "relationship " + std::string(to_string(r.kind)) + " " + r.source + "->" + r.target;
}

/// Child -> parent edges of the inheritance graph that lie on a cycle,
/// grouped per strongly connected component (self loops excluded).
inline std::vector<std::vector<std::pair<std::string, std::string>>> inheritance_cycles(
    const DomainModel& model) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& r : model.relationships)
        if (r.kind == RelKind::Inheritance && r.source != r.target)
            adj[r.source].push_back(r.target);

    // Tarjan's SCC.
    std::map<std::string, int> index, low;
    std::set<std::string> on_stack;
    std::vector<std::string> stack;
    std::vector<std::set<std::string>> components;
    int counter = 0;
    std::function<void(const std::string&)> visit = [&](const std::string& v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack.insert(v);
        if (auto it = adj.find(v); it != adj.end()) {
            for (const auto& w : it->second) {
                if (!index.count(w)) {
                    visit(w);
                    low[v] = std::min(low[v], low[w]);
                } else if (on_stack.count(w)) {
                    low[v] = std::min(low[v], index[w]);
                }
            }
        }
        if (low[v] == index[v]) {
            std::set<std::string> comp;
            std::string w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack.erase(w);
                comp.insert(w);
            } while (w != v);
            if (comp.size() > 1) components.push_back(std::move(comp));
        }
    };
    for (const auto& [v, _] : adj)
        if (!index.count(v)) visit(v);

    std::vector<std::vector<std::pair<std::string, std::string>>> out;
    for (const auto& comp : components) {
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& r : model.relationships)
            if (r.kind == RelKind::Inheritance && comp.count(r.source) && comp.count(r.target) &&
                r.source != r.target)
                edges.emplace_back(r.source, r.target);
        std::sort(edges.begin(), edges.end());
        out.push_back(std::move(edges));
    }
    return out;
}

/// One Violation per broken well-formedness rule; empty iff well-formed.
inline std::vector<Violation> validate_model(const DomainModel& model) {
    std::vector<Violation> out;
    auto add = [&](ViolationRule rule, std::string element, std::string description) {
        out.push_back({rule, std::move(element), std::move(description)});
    };

    std::set<std::string> type_names;
    for (const auto& c : model.classes) {
        const std::string ref = "class " + c.name;
        if (!is_upper_camel(c.name))
            add(ViolationRule::NamingConvention, ref, "class name is not UpperCamelCase");
        if (!type_names.insert(c.name).second)
            add(ViolationRule::DuplicateName, ref, "name declared more than once");
    }
    for (const auto& e : model.enums) {
        const std::string ref = "enum " + e.name;
        if (!is_upper_camel(e.name))
            add(ViolationRule::NamingConvention, ref, "enumeration name is not UpperCamelCase");
        if (!type_names.insert(e.name).second)
            add(ViolationRule::DuplicateName, ref, "name declared more than once");
        if (e.literals.empty()) add(ViolationRule::EmptyEnum, ref, "enumeration has no literals");
        std::set<std::string> seen;
        for (const auto& l : e.literals) {
            const std::string lref = "literal " + e.name + "." + l;
            if (!is_lower_camel(l) && !is_all_caps(l))
                add(ViolationRule::NamingConvention, lref, "literal is neither lowerCamelCase nor ALL_CAPS");
            if (!seen.insert(l).second)
                add(ViolationRule::DuplicateLiteral, lref, "literal declared more than once");
        }
    }
    for (const auto& c : model.classes) {
        std::set<std::string> seen;
        for (const auto& a : c.attributes) {
            const std::string aref = "attribute " + c.name + "." + a.name;
            if (!is_lower_camel(a.name))
                add(ViolationRule::NamingConvention, aref, "attribute name is not lowerCamelCase");
            if (!seen.insert(a.name).second)
                add(ViolationRule::DuplicateAttribute, aref, "attribute declared more than once");
            if (model.find_class(a.type_name))
                add(ViolationRule::TypeCorrectness, aref, "type '" + a.type_name + "' is a class");
            else if (!is_data_type(model, a.type_name))
                add(ViolationRule::TypeCorrectness, aref,
                    "type '" + a.type_name + "' is not a known data type");
        }
    }
    for (const auto& r : model.relationships) {
        const std::string ref = relationship_ref(r);
        if (!model.find_class(r.source))
            add(ViolationRule::UnknownEnd, ref, "source '" + r.source + "' is not a class");
        if (!model.find_class(r.target))
            add(ViolationRule::UnknownEnd, ref, "target '" + r.target + "' is not a class");
        if (!is_lower_camel(r.name))
            add(ViolationRule::NamingConvention, ref, "relationship name is not lowerCamelCase");
        if (r.kind == RelKind::Inheritance) {
            if (r.source_mult || r.target_mult)
                add(ViolationRule::InheritanceMultiplicity, ref, "inheritance carries multiplicities");
            if (r.source == r.target)
                add(ViolationRule::SelfInheritance, ref, "class inherits from itself");
        } else {
            for (const auto* m : {&r.source_mult, &r.target_mult}) {
                if (!*m)
                    add(ViolationRule::MissingMultiplicity, ref, "multiplicity missing");
                else if (!(*m)->valid())
                    add(ViolationRule::InvalidMultiplicity, ref, "multiplicity " + (*m)->str() + " is invalid");
            }
        }
    }
    for (const auto& cycle : inheritance_cycles(model)) {
        std::string desc = "inheritance cycle through";
        for (const auto& [child, parent] : cycle) desc += " " + child + "->" + parent;
        add(ViolationRule::InheritanceCycle, "class " + cycle.front().first, desc);
    }
    return out;
}

}  // namespace domodel
