#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "domodel/error.hpp"
#include "domodel/metamodel.hpp"

namespace domodel {

namespace export_detail {

using nlohmann::json;

inline json provenance_json(const ElementProvenance& p) {
    return {{"task", to_string(p.task)}, {"run_id", p.run_id}, {"raw_line", p.raw_line}};
}

inline json relationship_json(const RelationshipDef& r) {
    json j = {{"kind", to_string(r.kind)},
              {"source", r.source},
              {"target", r.target},
              {"name", r.name},
              {"provenance", provenance_json(r.provenance)},
              {"status", to_string(r.status)}};
    if (r.source_mult) j["source_multiplicity"] = r.source_mult->str();
    if (r.target_mult) j["target_multiplicity"] = r.target_mult->str();
    return j;
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(where + ": field '" + key + "' has the wrong type");
    }
}

inline ReviewStatus status_field(const json& j, const std::string& where) {
    if (!j.contains("status")) return ReviewStatus::Proposed;
    auto s = field<std::string>(j, "status", where);
    auto st = parse_review_status(s);
    if (!st) throw SchemaError(where + ": unknown status '" + s + "'");
    return *st;
}

inline ElementProvenance provenance_field(const json& j, const std::string& where) {
    ElementProvenance p;
    if (!j.contains("provenance")) return p;
    const auto& pj = j.at("provenance");
    auto task = field<std::string>(pj, "task", where + ".provenance");
    auto t = parse_task_kind(task);
    if (!t) throw SchemaError(where + ": unknown task '" + task + "'");
    p.task = *t;
    p.run_id = field<std::string>(pj, "run_id", where + ".provenance");
    p.raw_line = field<std::string>(pj, "raw_line", where + ".provenance");
    return p;
}

inline std::optional<Multiplicity> mult_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    auto text = field<std::string>(j, key, where);
    auto m = Multiplicity::parse(text);
    if (!m) throw SchemaError(where + ": bad multiplicity '" + text + "'");
    return m;
}

inline std::string rel_sort_key(const RelationshipDef& r) { return relationship_json(r).dump(); }

}  // namespace export_detail

/// Classes and enums sorted by name, relationships by (kind, source, target).
inline DomainModel canonical_order(DomainModel m) {
    auto by_name = [](const auto& a, const auto& b) { return a.name < b.name; };
    std::stable_sort(m.classes.begin(), m.classes.end(), by_name);
    std::stable_sort(m.enums.begin(), m.enums.end(), by_name);
    std::stable_sort(m.relationships.begin(), m.relationships.end(),
                     [](const RelationshipDef& a, const RelationshipDef& b) {
                         return std::tuple(a.kind, a.source, a.target, export_detail::rel_sort_key(a)) <
                                std::tuple(b.kind, b.source, b.target, export_detail::rel_sort_key(b));
                     });
    return m;
}

inline nlohmann::json to_json(const DomainModel& model) {
    using nlohmann::json;
    const DomainModel m = canonical_order(model);
    json classes = json::array(), enums = json::array(), rels = json::array();
    for (const auto& c : m.classes) {
        json attrs = json::array();
        for (const auto& a : c.attributes)
            attrs.push_back({{"name", a.name}, {"type", a.type_name}, {"status", to_string(a.status)}});
        classes.push_back({{"name", c.name},
                           {"attributes", attrs},
                           {"provenance", export_detail::provenance_json(c.provenance)},
                           {"status", to_string(c.status)}});
    }
    for (const auto& e : m.enums)
        enums.push_back({{"name", e.name},
                         {"literals", e.literals},
                         {"provenance", export_detail::provenance_json(e.provenance)},
                         {"status", to_string(e.status)}});
    for (const auto& r : m.relationships) rels.push_back(export_detail::relationship_json(r));
    return {{"classes", classes}, {"enums", enums}, {"relationships", rels}};
}

/// Sorted-key JSON, two-space indent, trailing newline.
inline std::string export_canonical(const DomainModel& model) { return to_json(model).dump(2) + "\n"; }

/// Builds a model from a parsed document without validating it.
inline DomainModel model_from_json(const nlohmann::json& doc) {
    using namespace export_detail;
    if (!doc.is_object()) throw SchemaError("model document is not an object");
    DomainModel m;
    for (const char* key : {"classes", "enums", "relationships"})
        if (!doc.contains(key) || !doc.at(key).is_array())
            throw SchemaError(std::string("model document lacks the '") + key + "' array");
    for (const auto& cj : doc.at("classes")) {
        ClassDef c;
        c.name = field<std::string>(cj, "name", "class");
        const std::string where = "class " + c.name;
        if (cj.contains("attributes")) {
            if (!cj.at("attributes").is_array()) throw SchemaError(where + ": attributes is not an array");
            for (const auto& aj : cj.at("attributes")) {
                AttributeDef a;
                a.name = field<std::string>(aj, "name", where + " attribute");
                a.type_name = field<std::string>(aj, "type", where + "." + a.name);
                a.status = status_field(aj, where + "." + a.name);
                c.attributes.push_back(std::move(a));
            }
        }
        c.provenance = provenance_field(cj, where);
        c.status = status_field(cj, where);
        m.classes.push_back(std::move(c));
    }
    for (const auto& ej : doc.at("enums")) {
        EnumDef e;
        e.name = field<std::string>(ej, "name", "enum");
        const std::string where = "enum " + e.name;
        e.literals = field<std::vector<std::string>>(ej, "literals", where);
        e.provenance = provenance_field(ej, where);
        e.status = status_field(ej, where);
        m.enums.push_back(std::move(e));
    }
    for (const auto& rj : doc.at("relationships")) {
        RelationshipDef r;
        auto kind = field<std::string>(rj, "kind", "relationship");
        auto k = parse_rel_kind(kind);
        if (!k) throw SchemaError("relationship: unknown kind '" + kind + "'");
        r.kind = *k;
        r.source = field<std::string>(rj, "source", "relationship");
        r.target = field<std::string>(rj, "target", "relationship");
        const std::string where = relationship_ref(r);
        r.name = rj.contains("name") ? field<std::string>(rj, "name", where)
                                     : default_relationship_name(r.source, r.target);
        r.source_mult = mult_field(rj, "source_multiplicity", where);
        r.target_mult = mult_field(rj, "target_multiplicity", where);
        r.provenance = provenance_field(rj, where);
        r.status = status_field(rj, where);
        m.relationships.push_back(std::move(r));
    }
    return m;
}

/// Parses and validates a canonical document. Throws FormatError,
/// SchemaError or ValidationError.
inline DomainModel import_canonical(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("model document is not valid JSON: ") + e.what());
    }
    DomainModel m = canonical_order(model_from_json(doc));
    if (auto v = validate_model(m); !v.empty()) throw ValidationError(std::move(v));
    return m;
}

/// The ACCEPTED part of a model. Relationships also need both end classes
/// accepted; attributes typed by an enumeration that is not accepted are left out.
inline DomainModel accepted_only(const DomainModel& model) {
    DomainModel out;
    std::set<std::string> classes, enums;
    for (const auto& e : model.enums)
        if (e.status == ReviewStatus::Accepted) {
            out.enums.push_back(e);
            enums.insert(e.name);
        }
    for (const auto& c : model.classes) {
        if (c.status != ReviewStatus::Accepted) continue;
        ClassDef copy = c;
        copy.attributes.clear();
        for (const auto& a : c.attributes)
            if (a.status == ReviewStatus::Accepted &&
                (is_primitive_type(a.type_name) || enums.count(a.type_name)))
                copy.attributes.push_back(a);
        out.classes.push_back(std::move(copy));
        classes.insert(c.name);
    }
    for (const auto& r : model.relationships)
        if (r.status == ReviewStatus::Accepted && classes.count(r.source) && classes.count(r.target))
            out.relationships.push_back(r);
    return out;
}

inline std::string to_plantuml(const DomainModel& model, bool only_accepted = false) {
    const DomainModel m = canonical_order(only_accepted ? accepted_only(model) : model);
    std::ostringstream out;
    out << "@startuml\n";
    for (const auto& e : m.enums) {
        out << "enum " << e.name << " {\n";
        for (const auto& l : e.literals) out << "  " << l << "\n";
        out << "}\n";
    }
    for (const auto& c : m.classes) {
        out << "class " << c.name << " {\n";
        for (const auto& a : c.attributes) out << "  " << a.name << " : " << a.type_name << "\n";
        out << "}\n";
    }
    for (const auto& r : m.relationships) {
        auto mult = [](const std::optional<Multiplicity>& x) {
            return x ? " \"" + x->str() + "\"" : std::string();
        };
        switch (r.kind) {
            case RelKind::Inheritance:
                out << r.target << " <|-- " << r.source << "\n";
                break;
            case RelKind::Aggregation:
                out << r.source << mult(r.source_mult) << " o--" << mult(r.target_mult) << " " << r.target << "\n";
                break;
            case RelKind::Association:
                out << r.source << mult(r.source_mult) << " -->" << mult(r.target_mult) << " " << r.target << "\n";
                break;
        }
    }
    out << "@enduml\n";
    return out.str();
}

}  // namespace domodel
