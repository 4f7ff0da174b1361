#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "domodel/error.hpp"
#include "domodel/lineparse.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/naming.hpp"

namespace domodel {

inline constexpr std::string_view kDropped = "DROPPED";
inline constexpr std::string_view kAppended = "APPENDED";

/// One fix. `rule` is 1 naming, 2 typing, 3 association ends,
/// 4 multiplicities, 5 inheritance ends. `after` is the new text, or
/// DROPPED / APPENDED.
struct FixEntry {
    int rule = 1;
    std::string element;
    std::string before;
    std::string after;
    std::string note;

    friend bool operator==(const FixEntry&, const FixEntry&) = default;
};

struct FixReport {
    std::vector<FixEntry> applied;

    void add(int rule, std::string element, std::string before, std::string after,
             std::string note = {}) {
        applied.push_back({rule, std::move(element), std::move(before), std::move(after), std::move(note)});
    }
    std::size_t count(int rule) const {
        return static_cast<std::size_t>(std::count_if(applied.begin(), applied.end(),
                                                      [&](const FixEntry& e) { return e.rule == rule; }));
    }
    bool empty() const { return applied.empty(); }
};

struct AssembleContext {
    std::string run_id;
    TaskKind class_task = TaskKind::ClassTurn2;
    TaskKind assoc_task = TaskKind::AssocAgg;
    TaskKind inherit_task = TaskKind::Inheritance;
};

struct AssembleResult {
    DomainModel model;
    FixReport fix_report;
};

// --- rule 2 helpers -------------------------------------------------------------

/// Canonical primitive for common type spellings ("int", "varchar",
/// "LocalDate"); nullopt when the text names no primitive.
inline std::optional<std::string> primitive_type_for(std::string_view raw) {
    static const std::map<std::string, std::string, std::less<>> kSynonyms = {
        {"string", "String"},    {"str", "String"},       {"text", "String"},
        {"char", "String"},      {"varchar", "String"},   {"email", "String"},
        {"integer", "Integer"},  {"int", "Integer"},      {"long", "Integer"},
        {"short", "Integer"},    {"number", "Integer"},   {"nat", "Integer"},
        {"real", "Real"},        {"float", "Real"},       {"double", "Real"},
        {"decimal", "Real"},     {"money", "Real"},       {"currency", "Real"},
        {"boolean", "Boolean"},  {"bool", "Boolean"},
        {"date", "Date"},        {"datetime", "Date"},    {"time", "Date"},
        {"timestamp", "Date"},   {"localdate", "Date"},   {"localdatetime", "Date"},
    };
    std::string key;
    for (char c : raw)
        if (naming_detail::is_upper(c) || naming_detail::is_lower(c)) key.push_back(naming_detail::down(c));
    auto it = kSynonyms.find(key);
    if (it == kSynonyms.end()) return std::nullopt;
    return it->second;
}

// --- rule 3 ----------------------------------------------------------------------

struct Keep {};
struct ToAttribute {
    std::string owner;
    AttributeDef attribute;
};
struct Drop {
    std::string reason;
};
using AssocFix = std::variant<Keep, ToAttribute, Drop>;

/// Both ends classes: keep. Exactly one end a data type (primitive or one of
/// `enums`) and the other a class: turn into an attribute of the class.
/// Anything else: drop. Names are expected to be normalized already.
inline AssocFix fix_association_ends(const AssocLine& rel, const std::set<std::string>& classes,
                                     const std::set<std::string>& enums = {}) {
    const bool src_class = classes.count(rel.source) > 0;
    const bool tgt_class = classes.count(rel.target) > 0;
    if (src_class && tgt_class) return Keep{};
    auto data_type = [&](const std::string& end) -> std::optional<std::string> {
        if (enums.count(end)) return end;
        return primitive_type_for(end);
    };
    if (src_class || tgt_class) {
        const auto& owner = src_class ? rel.source : rel.target;
        const auto& other = src_class ? rel.target : rel.source;
        if (auto t = data_type(other)) return ToAttribute{owner, {to_lower_camel(*t), *t}};
        return Drop{"'" + other + "' is neither a class nor a data type"};
    }
    return Drop{"neither end is a class"};
}

// --- rule 5 ----------------------------------------------------------------------

struct InheritFix {
    std::vector<InheritLine> kept;
    std::vector<ClassDef> appended_parents;
    std::vector<std::pair<InheritLine, std::string>> dropped;  // line, reason
};

/// Known parent: keep. Unknown parent with two or more distinct known
/// children: append it as an empty class and keep. Otherwise drop.
/// `forbidden` lists names that may not become classes (enumerations).
inline InheritFix fix_inheritance_ends(const std::vector<InheritLine>& inherits,
                                       const std::set<std::string>& known,
                                       const std::set<std::string>& forbidden = {}) {
    InheritFix out;
    std::map<std::string, std::set<std::string>> children_of_unknown;
    for (const auto& i : inherits)
        if (known.count(i.child) && !known.count(i.parent) && i.child != i.parent)
            children_of_unknown[i.parent].insert(i.child);

    std::set<std::string> appended;
    for (const auto& i : inherits) {
        if (i.child == i.parent) {
            out.dropped.push_back({i, "class inherits from itself"});
        } else if (!known.count(i.child)) {
            out.dropped.push_back({i, "child '" + i.child + "' is not a class"});
        } else if (known.count(i.parent)) {
            out.kept.push_back(i);
        } else if (forbidden.count(i.parent) || is_primitive_type(i.parent)) {
            out.dropped.push_back({i, "parent '" + i.parent + "' is not a class"});
        } else if (children_of_unknown[i.parent].size() >= 2) {
            if (appended.insert(i.parent).second) {
                ClassDef parent;
                parent.name = i.parent;
                out.appended_parents.push_back(std::move(parent));
            }
            out.kept.push_back(i);
        } else {
            out.dropped.push_back({i, "unknown parent '" + i.parent + "' has a single child"});
        }
    }
    return out;
}

// --- dedupe ----------------------------------------------------------------------

/// Merges classes/enums of the same name (attribute and literal union, first
/// occurrence first) and collapses relationships with the same kind and
/// ordered ends, keeping the first one.
inline DomainModel dedupe(const DomainModel& model, FixReport& report) {
    DomainModel out;
    std::map<std::string, std::size_t> class_at, enum_at;
    for (const auto& c : model.classes) {
        auto [it, fresh] = class_at.try_emplace(c.name, out.classes.size());
        if (fresh) {
            ClassDef copy = c;
            copy.attributes.clear();
            out.classes.push_back(std::move(copy));
        } else {
            report.add(1, "class " + c.name, c.name, c.name, "merged with an earlier declaration");
        }
        auto& target = out.classes[it->second];
        for (const auto& a : c.attributes) {
            auto same = std::find_if(target.attributes.begin(), target.attributes.end(),
                                     [&](const AttributeDef& x) { return x.name == a.name; });
            if (same == target.attributes.end())
                target.attributes.push_back(a);
            else
                report.add(1, "attribute " + c.name + "." + a.name, a.name + ": " + a.type_name,
                           std::string(kDropped), "duplicate attribute");
        }
    }
    for (const auto& e : model.enums) {
        auto [it, fresh] = enum_at.try_emplace(e.name, out.enums.size());
        if (fresh) {
            EnumDef copy = e;
            copy.literals.clear();
            out.enums.push_back(std::move(copy));
        } else {
            report.add(1, "enum " + e.name, e.name, e.name, "merged with an earlier declaration");
        }
        auto& target = out.enums[it->second];
        for (const auto& l : e.literals) {
            if (std::find(target.literals.begin(), target.literals.end(), l) == target.literals.end())
                target.literals.push_back(l);
            else
                report.add(1, "literal " + e.name + "." + l, l, std::string(kDropped), "duplicate literal");
        }
    }
    std::map<std::tuple<RelKind, std::string, std::string>, std::size_t> rel_at;
    for (const auto& r : model.relationships) {
        auto [it, fresh] = rel_at.try_emplace({r.kind, r.source, r.target}, out.relationships.size());
        if (fresh) {
            out.relationships.push_back(r);
            continue;
        }
        const auto& kept = out.relationships[it->second];
        const int rule = r.kind == RelKind::Inheritance ? 5 : 3;
        std::string note = "duplicate relationship";
        if (kept.source_mult != r.source_mult || kept.target_mult != r.target_mult)
            note = "duplicate with different multiplicities; first occurrence kept";
        report.add(rule, relationship_ref(r), r.provenance.raw_line, std::string(kDropped), note);
    }
    return out;
}

inline DomainModel dedupe(const DomainModel& model) {
    FixReport ignored;
    return dedupe(model, ignored);
}

namespace refinery_detail {

inline std::optional<std::string> upper_name(const std::string& raw) {
    try {
        auto n = to_upper_camel(raw);
        if (is_upper_camel(n)) return n;
    } catch (const EmptyName&) {
    }
    return std::nullopt;
}

inline std::optional<std::string> lower_name(const std::string& raw) {
    try {
        auto n = to_lower_camel(raw);
        if (is_lower_camel(n)) return n;
    } catch (const EmptyName&) {
    }
    return std::nullopt;
}

inline std::optional<std::string> literal_name(const std::string& raw) {
    if (is_lower_camel(raw) || is_all_caps(raw)) return raw;
    bool has_lower = false;
    for (char c : raw)
        if (naming_detail::is_lower(c)) has_lower = true;
    if (!has_lower) {
        auto tokens = split_name_tokens(raw);
        std::string joined;
        for (std::size_t i = 0; i < tokens.size(); ++i) joined += (i ? "_" : "") + tokens[i];
        if (is_all_caps(joined)) return joined;
    }
    return lower_name(raw);
}

struct RawRel {
    RelKind kind;
    std::string source, target;
    std::optional<Multiplicity> source_mult, target_mult;
    std::string raw_line;
};

}  // namespace refinery_detail

/// Builds a well-formed model from parsed class-block and relationship
/// elements. Order: naming, typing, association ends, multiplicities,
/// inheritance ends, dedupe, cycle break.
inline AssembleResult assemble(const std::vector<ParsedElement>& classes_block,
                               const std::vector<ParsedElement>& rels,
                               const AssembleContext& ctx = {}) {
    using namespace refinery_detail;
    AssembleResult result;
    auto& report = result.fix_report;
    auto& model = result.model;

    // Rule 1: naming. The first declaration of a name decides class vs enum.
    std::map<std::string, bool> kind_of;  // name -> is_enum
    for (const auto& pe : classes_block) {
        const ElementProvenance prov{ctx.class_task, ctx.run_id, pe.raw_line};
        if (const auto* cl = pe.as<ClassLine>()) {
            auto name = upper_name(cl->name);
            if (!name) {
                report.add(1, "class " + cl->name, cl->name, std::string(kDropped), "name cannot be normalized");
                continue;
            }
            if (*name != cl->name) report.add(1, "class " + *name, cl->name, *name);
            if (is_primitive_type(*name)) {
                report.add(2, "class " + *name, *name, std::string(kDropped), "name is a data type");
                continue;
            }
            auto [it, fresh] = kind_of.try_emplace(*name, false);
            if (!fresh && it->second) {
                report.add(1, "class " + *name, cl->name, std::string(kDropped), "name already used by an enumeration");
                continue;
            }
            ClassDef c{*name, {}, prov, ReviewStatus::Proposed};
            for (const auto& a : cl->attributes) {
                auto an = lower_name(a.name);
                if (!an) {
                    report.add(1, "attribute " + *name + "." + a.name, a.name, std::string(kDropped),
                               "name cannot be normalized");
                    continue;
                }
                if (*an != a.name) report.add(1, "attribute " + *name + "." + *an, a.name, *an);
                // The raw type is resolved by rule 2 below; keep it verbatim for now.
                c.attributes.push_back({*an, a.type.value_or(""), ReviewStatus::Proposed});
            }
            model.classes.push_back(std::move(c));
        } else if (const auto* en = pe.as<EnumLine>()) {
            auto name = upper_name(en->name);
            if (!name) {
                report.add(1, "enum " + en->name, en->name, std::string(kDropped), "name cannot be normalized");
                continue;
            }
            if (*name != en->name) report.add(1, "enum " + *name, en->name, *name);
            if (is_primitive_type(*name)) {
                report.add(2, "enum " + *name, *name, std::string(kDropped), "name is a data type");
                continue;
            }
            auto [it, fresh] = kind_of.try_emplace(*name, true);
            if (!fresh && !it->second) {
                report.add(1, "enum " + *name, en->name, std::string(kDropped), "name already used by a class");
                continue;
            }
            EnumDef e{*name, {}, prov, ReviewStatus::Proposed};
            for (const auto& l : en->literals) {
                auto ln = literal_name(l);
                if (!ln) {
                    report.add(1, "literal " + *name + "." + l, l, std::string(kDropped), "literal cannot be normalized");
                    continue;
                }
                if (*ln != l) report.add(1, "literal " + *name + "." + *ln, l, *ln);
                e.literals.push_back(*ln);
            }
            model.enums.push_back(std::move(e));
        }
    }

    std::vector<RawRel> raw_rels;
    for (const auto& pe : rels) {
        std::string src, tgt;
        RawRel r{RelKind::Association, {}, {}, std::nullopt, std::nullopt, pe.raw_line};
        if (const auto* a = pe.as<AssocLine>()) {
            src = a->source;
            tgt = a->target;
            r.kind = a->kind == RelKind::Aggregation ? RelKind::Aggregation : RelKind::Association;
            r.source_mult = a->source_mult;
            r.target_mult = a->target_mult;
        } else if (const auto* i = pe.as<InheritLine>()) {
            src = i->child;
            tgt = i->parent;
            r.kind = RelKind::Inheritance;
        } else {
            continue;
        }
        auto s = upper_name(src);
        auto t = upper_name(tgt);
        const int rule = r.kind == RelKind::Inheritance ? 5 : 3;
        if (!s || !t) {
            report.add(rule, "relationship " + src + "->" + tgt, pe.raw_line, std::string(kDropped),
                       "end name cannot be normalized");
            continue;
        }
        if (*s != src) report.add(1, "relationship end " + *s, src, *s);
        if (*t != tgt) report.add(1, "relationship end " + *t, tgt, *t);
        r.source = *s;
        r.target = *t;
        raw_rels.push_back(std::move(r));
    }

    // Rule 2: typing. Empty enumerations go first so nothing gets typed by them.
    std::vector<EnumDef> enums;
    for (auto& e : model.enums) {
        if (e.literals.empty())
            report.add(2, "enum " + e.name, e.provenance.raw_line, std::string(kDropped), "enumeration without literals");
        else
            enums.push_back(std::move(e));
    }
    model.enums = std::move(enums);
    std::set<std::string> class_names, enum_names;
    for (const auto& c : model.classes) class_names.insert(c.name);
    for (const auto& e : model.enums) enum_names.insert(e.name);

    for (auto& c : model.classes) {
        for (auto& a : c.attributes) {
            const std::string ref = "attribute " + c.name + "." + a.name;
            const std::string before = a.type_name;
            if (before.empty()) {
                a.type_name = "String";
                report.add(2, ref, "", a.type_name, "missing type");
                continue;
            }
            std::string resolved;
            std::string note;
            if (enum_names.count(before)) {
                resolved = before;
            } else if (auto p = primitive_type_for(before)) {
                resolved = *p;
            } else if (auto n = upper_name(before); n && enum_names.count(*n)) {
                resolved = *n;
            } else if (n && class_names.count(*n)) {
                resolved = "String";
                note = "type is a class";
            } else {
                resolved = "String";
                note = "unknown type";
            }
            if (resolved != before) {
                a.type_name = resolved;
                report.add(2, ref, before, resolved, note);
            }
        }
    }

    // Rule 3: association ends.
    std::vector<RawRel> kept_rels;
    for (auto& r : raw_rels) {
        if (r.kind == RelKind::Inheritance) {
            kept_rels.push_back(std::move(r));
            continue;
        }
        AssocLine line{r.source, r.source_mult, r.target, r.target_mult, r.kind};
        auto fix = fix_association_ends(line, class_names, enum_names);
        const std::string ref = "relationship " + r.source + "->" + r.target;
        if (std::holds_alternative<Keep>(fix)) {
            kept_rels.push_back(std::move(r));
        } else if (const auto* d = std::get_if<Drop>(&fix)) {
            report.add(3, ref, r.raw_line, std::string(kDropped), d->reason);
        } else {
            const auto& ta = std::get<ToAttribute>(fix);
            auto* owner = model.find_class(ta.owner);
            auto& attrs = owner->attributes;
            if (std::any_of(attrs.begin(), attrs.end(),
                            [&](const AttributeDef& a) { return a.name == ta.attribute.name; })) {
                report.add(3, ref, r.raw_line, std::string(kDropped), "equivalent attribute already present");
            } else {
                attrs.push_back(ta.attribute);
                report.add(3, ref, r.raw_line,
                           "attribute " + ta.owner + "." + ta.attribute.name + ": " + ta.attribute.type_name,
                           "converted to an attribute");
            }
        }
    }

    // Rule 4: multiplicities.
    for (auto& r : kept_rels) {
        if (r.kind == RelKind::Inheritance) continue;
        const std::string ref = "relationship " + r.source + "->" + r.target;
        for (auto* m : {&r.source_mult, &r.target_mult}) {
            const char* end = m == &r.source_mult ? "source" : "target";
            if (!*m) {
                report.add(4, ref, "", "1", std::string(end) + " multiplicity missing");
                *m = Multiplicity::one();
            } else if (!(*m)->valid()) {
                report.add(4, ref, (*m)->str(), "1", std::string(end) + " multiplicity invalid");
                *m = Multiplicity::one();
            }
        }
    }

    // Rule 5: inheritance ends.
    std::vector<InheritLine> inherits;
    std::vector<std::string> inherit_raw;
    for (const auto& r : kept_rels)
        if (r.kind == RelKind::Inheritance) {
            inherits.push_back({r.source, r.target});
            inherit_raw.push_back(r.raw_line);
        }
    auto ifix = fix_inheritance_ends(inherits, class_names, enum_names);
    for (auto& p : ifix.appended_parents) {
        p.provenance = {ctx.inherit_task, ctx.run_id, ""};
        report.add(5, "class " + p.name, "", std::string(kAppended), "parent required by several children");
        model.classes.push_back(std::move(p));
    }
    for (const auto& [line, reason] : ifix.dropped)
        report.add(5, "relationship " + line.child + "->" + line.parent, line.child + " extends " + line.parent,
                   std::string(kDropped), reason);

    std::multiset<std::pair<std::string, std::string>> kept_inherits;
    for (const auto& k : ifix.kept) kept_inherits.insert({k.child, k.parent});
    for (auto& r : kept_rels) {
        RelationshipDef def;
        def.kind = r.kind;
        def.source = r.source;
        def.target = r.target;
        if (r.kind == RelKind::Inheritance) {
            auto it = kept_inherits.find({r.source, r.target});
            if (it == kept_inherits.end()) continue;
            kept_inherits.erase(it);
            def.provenance = {ctx.inherit_task, ctx.run_id, r.raw_line};
        } else {
            def.source_mult = r.source_mult;
            def.target_mult = r.target_mult;
            def.provenance = {ctx.assoc_task, ctx.run_id, r.raw_line};
        }
        def.name = default_relationship_name(def.source, def.target);
        model.relationships.push_back(std::move(def));
    }

    model = dedupe(model, report);

    // Cycle break: drop the lexicographically-last edge of every cycle.
    for (auto cycles = inheritance_cycles(model); !cycles.empty(); cycles = inheritance_cycles(model)) {
        for (const auto& cycle : cycles) {
            const auto [child, parent] = cycle.back();
            auto& rs = model.relationships;
            rs.erase(std::remove_if(rs.begin(), rs.end(),
                                    [&](const RelationshipDef& r) {
                                        return r.kind == RelKind::Inheritance && r.source == child &&
                                               r.target == parent;
                                    }),
                     rs.end());
            report.add(5, "relationship " + child + "->" + parent, child + " extends " + parent,
                       std::string(kDropped), "breaks an inheritance cycle");
        }
    }

    if (auto v = validate_model(model); !v.empty()) throw ValidationError(std::move(v));
    return result;
}

/// Copy without provenance, for structural comparisons.
inline DomainModel without_provenance(DomainModel m) {
    for (auto& c : m.classes) c.provenance = {};
    for (auto& e : m.enums) e.provenance = {};
    for (auto& r : m.relationships) r.provenance = {};
    return m;
}

}  // namespace domodel
