#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "domodel/digest.hpp"
#include "domodel/error.hpp"
#include "domodel/experiment.hpp"
#include "domodel/exporters.hpp"
#include "domodel/pipeline.hpp"
#include "domodel/refinery.hpp"

namespace domodel {

class NotFound : public Error {
public:
    using Error::Error;
};

/// Stale X-Model-Version.
class VersionConflict : public Error {
public:
    using Error::Error;
};

class InvalidTransition : public Error {
public:
    using Error::Error;
};

/// The LLM backend failed; partial artifacts were persisted.
class UpstreamFailure : public Error {
public:
    using Error::Error;
};

struct Project {
    std::string id;
    std::string name;
    std::string description;
    int version = 0;
    std::vector<std::string> runs;  // run directory names, oldest first
    std::string created;
    std::string updated;
    bool has_model = false;
};

inline nlohmann::json to_json(const Project& p) {
    return {{"id", p.id},       {"name", p.name},       {"description", p.description},
            {"version", p.version}, {"runs", p.runs},   {"created", p.created},
            {"updated", p.updated}, {"has_model", p.has_model}};
}

inline Project project_from_json(const nlohmann::json& j) {
    try {
        Project p;
        p.id = j.at("id").get<std::string>();
        p.name = j.at("name").get<std::string>();
        p.description = j.at("description").get<std::string>();
        p.version = j.at("version").get<int>();
        p.runs = j.at("runs").get<std::vector<std::string>>();
        p.created = j.at("created").get<std::string>();
        p.updated = j.at("updated").get<std::string>();
        p.has_model = j.at("has_model").get<bool>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad project record: ") + e.what());
    }
}

// --- element ids -----------------------------------------------------------------

inline std::string element_id(std::string_view kind, std::string_view qualified_name) {
    return sha256_hex(std::string(kind) + "\n" + std::string(qualified_name)).substr(0, 16);
}

inline std::string class_id(const ClassDef& c) { return element_id("class", c.name); }
inline std::string enum_id(const EnumDef& e) { return element_id("enum", e.name); }
inline std::string attribute_id(const ClassDef& c, const AttributeDef& a) {
    return element_id("attribute", c.name + "." + a.name);
}
inline std::string relationship_id(const RelationshipDef& r) {
    return element_id("relationship", std::string(to_string(r.kind)) + ":" + r.source + "->" + r.target);
}

/// Canonical JSON with an "id" on every reviewable element.
inline nlohmann::json model_with_ids(const DomainModel& model) {
    auto doc = to_json(model);
    const DomainModel m = canonical_order(model);
    for (std::size_t i = 0; i < m.classes.size(); ++i) {
        auto& cj = doc["classes"][i];
        cj["id"] = class_id(m.classes[i]);
        for (std::size_t k = 0; k < m.classes[i].attributes.size(); ++k)
            cj["attributes"][k]["id"] = attribute_id(m.classes[i], m.classes[i].attributes[k]);
    }
    for (std::size_t i = 0; i < m.enums.size(); ++i) doc["enums"][i]["id"] = enum_id(m.enums[i]);
    for (std::size_t i = 0; i < m.relationships.size(); ++i)
        doc["relationships"][i]["id"] = relationship_id(m.relationships[i]);
    return doc;
}

/// Sets the status of the element with `id`. Rejecting a class also rejects
/// its attributes and incident relationships; accepting an element whose
/// owning or end class is rejected is an InvalidTransition.
inline void set_element_status(DomainModel& model, const std::string& id, ReviewStatus status) {
    auto rejected_class = [&](const std::string& name) {
        const auto* c = model.find_class(name);
        return c && c->status == ReviewStatus::Rejected;
    };
    for (auto& c : model.classes) {
        if (class_id(c) == id) {
            c.status = status;
            if (status == ReviewStatus::Rejected) {
                for (auto& a : c.attributes) a.status = ReviewStatus::Rejected;
                for (auto& r : model.relationships)
                    if (r.source == c.name || r.target == c.name) r.status = ReviewStatus::Rejected;
            }
            return;
        }
        for (auto& a : c.attributes)
            if (attribute_id(c, a) == id) {
                if (status == ReviewStatus::Accepted && c.status == ReviewStatus::Rejected)
                    throw InvalidTransition("cannot accept an attribute of rejected class " + c.name);
                a.status = status;
                return;
            }
    }
    for (auto& e : model.enums)
        if (enum_id(e) == id) {
            e.status = status;
            return;
        }
    for (auto& r : model.relationships)
        if (relationship_id(r) == id) {
            if (status == ReviewStatus::Accepted && (rejected_class(r.source) || rejected_class(r.target)))
                throw InvalidTransition("cannot accept a relationship with a rejected end class");
            r.status = status;
            return;
        }
    throw NotFound("no element " + id);
}

/// Adds the elements of `fresh` that `current` lacks, one at a time, skipping
/// any addition that would break well-formedness. Existing ACCEPTED and
/// REJECTED elements are never modified; PROPOSED classes may gain
/// attributes. `kinds` limits which relationship kinds are taken.
inline DomainModel merge_proposed(const DomainModel& current, const DomainModel& fresh,
                                  const std::set<RelKind>& kinds = {RelKind::Association, RelKind::Aggregation,
                                                                    RelKind::Inheritance},
                                  bool take_types = true) {
    DomainModel out = current;
    auto try_add = [&](auto&& mutate, auto&& undo) {
        mutate();
        if (!validate_model(out).empty()) undo();
    };
    if (take_types) {
        for (auto e : fresh.enums) {
            if (out.find_enum(e.name) || out.find_class(e.name)) continue;
            e.status = ReviewStatus::Proposed;
            try_add([&] { out.enums.push_back(e); }, [&] { out.enums.pop_back(); });
        }
        for (auto c : fresh.classes) {
            auto* existing = out.find_class(c.name);
            if (!existing) {
                if (out.find_enum(c.name)) continue;
                c.status = ReviewStatus::Proposed;
                for (auto& a : c.attributes) a.status = ReviewStatus::Proposed;
                try_add([&] { out.classes.push_back(c); }, [&] { out.classes.pop_back(); });
                continue;
            }
            if (existing->status != ReviewStatus::Proposed) continue;
            const std::string name = existing->name;
            for (auto a : c.attributes) {
                auto* cls = out.find_class(name);
                if (std::any_of(cls->attributes.begin(), cls->attributes.end(),
                                [&](const AttributeDef& x) { return x.name == a.name; }))
                    continue;
                a.status = ReviewStatus::Proposed;
                try_add([&] { out.find_class(name)->attributes.push_back(a); },
                        [&] { out.find_class(name)->attributes.pop_back(); });
            }
        }
    }
    for (auto r : fresh.relationships) {
        if (!kinds.count(r.kind)) continue;
        const bool present = std::any_of(out.relationships.begin(), out.relationships.end(), [&](const RelationshipDef& x) {
            return x.kind == r.kind && x.source == r.source && x.target == r.target;
        });
        if (present) continue;
        r.status = ReviewStatus::Proposed;
        try_add([&] { out.relationships.push_back(r); }, [&] { out.relationships.pop_back(); });
    }
    return out;
}

enum class RegenerateTask { Classes, Assoc, Inherit };

inline std::optional<RegenerateTask> parse_regenerate_task(std::string_view s) {
    if (s == "classes") return RegenerateTask::Classes;
    if (s == "assoc") return RegenerateTask::Assoc;
    if (s == "inherit") return RegenerateTask::Inherit;
    return std::nullopt;
}

/// Projects persisted under `<data_dir>/projects/<id>/`. Every mutation is
/// written (temp file + rename) before it is acknowledged; mutations of one
/// project are serialized.
class ReviewService {
public:
    ReviewService(std::filesystem::path data_dir, ChatProvider& provider, PipelineConfig defaults = {},
                  const PromptKit& kit = default_prompt_kit())
        : root_(std::move(data_dir)), provider_(provider), defaults_(std::move(defaults)), kit_(kit) {
        std::filesystem::create_directories(root_ / "projects");
    }

    Project create_project(const std::string& name, const std::string& description) {
        if (name.empty()) throw SchemaError("project name is empty");
        if (lineparse_detail::is_blank(description)) throw SchemaError("project description is empty");
        Project p;
        {
            std::lock_guard lock(registry_mutex_);
            do {
                p.id = new_id();
            } while (std::filesystem::exists(dir(p.id)));
            std::filesystem::create_directories(dir(p.id));
        }
        p.name = name;
        p.description = description;
        p.created = p.updated = now();
        std::lock_guard lock(mutex_for(p.id));
        save(p);
        return p;
    }

    std::vector<Project> list_projects() const {
        std::vector<Project> out;
        for (const auto& e : std::filesystem::directory_iterator(root_ / "projects"))
            if (std::filesystem::exists(e.path() / "project.json"))
                out.push_back(project_from_json(nlohmann::json::parse(read_text_file(e.path() / "project.json"))));
        std::sort(out.begin(), out.end(), [](const Project& a, const Project& b) { return a.created < b.created || (a.created == b.created && a.id < b.id); });
        return out;
    }

    Project project(const std::string& id) {
        std::lock_guard lock(mutex_for(id));
        return load(id);
    }

    /// Current model; throws NotFound before the first generation.
    std::pair<DomainModel, int> model(const std::string& id) {
        std::lock_guard lock(mutex_for(id));
        auto p = load(id);
        return {load_model(p), p.version};
    }

    /// Runs the whole pipeline and replaces the current model.
    std::pair<DomainModel, int> generate(const std::string& id, const nlohmann::json& overrides = nlohmann::json::object(),
                                         std::optional<int> expected_version = std::nullopt) {
        std::lock_guard lock(mutex_for(id));
        auto p = load(id);
        check_version(p, expected_version);
        const auto cfg = config_from_json(overrides.is_null() ? nlohmann::json::object() : overrides, defaults_);
        auto art = run_logged(p, [&] { return run(p.description, cfg, provider_, kit_); });
        commit(p, art.model);
        return {art.model, p.version};
    }

    std::pair<DomainModel, int> set_status(const std::string& id, const std::string& element, const std::string& status,
                                           std::optional<int> expected_version = std::nullopt) {
        std::lock_guard lock(mutex_for(id));
        auto p = load(id);
        check_version(p, expected_version);
        auto m = load_model(p);
        std::string upper;
        for (char c : status) upper.push_back(naming_detail::up(c));
        auto st = parse_review_status(upper);
        if (!st || *st == ReviewStatus::Proposed)
            throw InvalidTransition("status must be accepted or rejected, not '" + status + "'");
        set_element_status(m, element, *st);
        commit(p, m);
        return {m, p.version};
    }

    /// Re-runs one sub-task and merges its new elements as PROPOSED.
    std::pair<DomainModel, int> regenerate(const std::string& id, RegenerateTask task,
                                           std::optional<int> expected_version = std::nullopt) {
        std::lock_guard lock(mutex_for(id));
        auto p = load(id);
        check_version(p, expected_version);
        const auto current = load_model(p);
        PipelineConfig cfg = defaults_;
        DomainModel merged;
        if (task == RegenerateTask::Classes) {
            auto art = run_logged(p, [&] { return run(p.description, cfg, provider_, kit_); });
            merged = merge_proposed(current, art.model);
        } else {
            DomainModel live;  // classes and enums that are not rejected
            for (const auto& e : current.enums)
                if (e.status != ReviewStatus::Rejected) live.enums.push_back(e);
            for (const auto& c : current.classes)
                if (c.status != ReviewStatus::Rejected) live.classes.push_back(c);
            std::vector<std::string> names;
            for (const auto& c : live.classes) names.push_back(c.name);
            if (names.empty()) throw InvalidTransition("no class left to relate");
            auto art = run_logged(p, [&] {
                TranscriptTap tap(provider_);
                RunArtifacts a;
                a.config = cfg;
                a.class_names = names;
                try {
                    auto [text, parsed] = task == RegenerateTask::Assoc
                                              ? run_assoc_generation(p.description, names, cfg, tap, kit_)
                                              : run_inherit_generation(p.description, names, cfg, tap, kit_);
                    a.intermediate.push_back({task == RegenerateTask::Assoc ? "assoc_agg" : "inheritance", text});
                    a.parse_errors = parsed.errors;
                    auto assembled = assemble(to_parsed_elements(live).classes_block, parsed.elements,
                                              {cfg.run_seed});
                    a.model = std::move(assembled.model);
                    a.fix_report = std::move(assembled.fix_report);
                    a.transcripts = tap.records();
                    return a;
                } catch (const ExhaustedRetries& e) {
                    a.transcripts = tap.records();
                    throw RunFailure(e, task == RegenerateTask::Assoc ? TaskKind::AssocAgg : TaskKind::Inheritance,
                                     std::move(a));
                }
            });
            const std::set<RelKind> kinds = task == RegenerateTask::Assoc
                                                ? std::set<RelKind>{RelKind::Association, RelKind::Aggregation}
                                                : std::set<RelKind>{RelKind::Inheritance};
            merged = merge_proposed(current, art.model, kinds, false);
        }
        commit(p, merged);
        return {merged, p.version};
    }

    const std::filesystem::path& data_dir() const { return root_; }

private:
    std::filesystem::path dir(const std::string& id) const { return root_ / "projects" / id; }

    static std::string new_id() {
        static std::mutex m;
        static std::mt19937_64 rng{std::random_device{}()};
        std::lock_guard lock(m);
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
        return buf;
    }

    static std::string now() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    std::mutex& mutex_for(const std::string& id) {
        std::lock_guard lock(registry_mutex_);
        auto& m = mutexes_[id];
        if (!m) m = std::make_unique<std::mutex>();
        return *m;
    }

    static bool valid_id(const std::string& id) {
        return !id.empty() && id.size() <= 64 &&
               std::all_of(id.begin(), id.end(), [](char c) { return naming_detail::is_word(c) && !naming_detail::is_high(c); });
    }

    Project load(const std::string& id) const {
        if (!valid_id(id) || !std::filesystem::exists(dir(id) / "project.json"))
            throw NotFound("no project " + id);
        return project_from_json(nlohmann::json::parse(read_text_file(dir(id) / "project.json")));
    }

    DomainModel load_model(const Project& p) const {
        if (!p.has_model) throw NotFound("project " + p.id + " has no model yet");
        return import_canonical(read_text_file(dir(p.id) / "model.json"));
    }

    static void check_version(const Project& p, std::optional<int> expected) {
        if (expected && *expected != p.version)
            throw VersionConflict("model version is " + std::to_string(p.version) + ", request was based on " +
                                  std::to_string(*expected));
    }

    static void write_atomic(const std::filesystem::path& path, const std::string& text) {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + tmp.string());
            out << text;
            out.flush();
            if (!out) throw Error("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    void save(const Project& p) const { write_atomic(dir(p.id) / "project.json", to_json(p).dump(2) + "\n"); }

    void commit(Project& p, const DomainModel& m) {
        write_atomic(dir(p.id) / "model.json", export_canonical(m));
        p.has_model = true;
        ++p.version;
        p.updated = now();
        save(p);
    }

    /// Runs `fn`, archiving its artifacts in a fresh run directory either way.
    template <class Fn>
    RunArtifacts run_logged(Project& p, Fn&& fn) {
        const auto run_dir = next_run_dir(dir(p.id) / "runs");
        try {
            auto art = fn();
            write_run_dir(run_dir, art);
            p.runs.push_back(run_dir.filename().string());
            return art;
        } catch (const RunFailure& e) {
            write_run_dir(run_dir, e.partial(), false);
            p.runs.push_back(run_dir.filename().string());
            save(p);
            throw UpstreamFailure(e.what());
        } catch (const ExhaustedRetries& e) {
            throw UpstreamFailure(e.what());
        } catch (const ProviderError& e) {
            throw UpstreamFailure(e.what());
        } catch (const ReplayMiss& e) {
            throw UpstreamFailure(e.what());
        }
    }

    std::filesystem::path root_;
    ChatProvider& provider_;
    PipelineConfig defaults_;
    const PromptKit& kit_;
    std::mutex registry_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> mutexes_;
};

}  // namespace domodel
