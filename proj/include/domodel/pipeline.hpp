#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "domodel/error.hpp"
#include "domodel/exporters.hpp"
#include "domodel/lineparse.hpp"
#include "domodel/llm.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/prompts.hpp"
#include "domodel/refinery.hpp"

namespace domodel {

enum class ClassMode { TwoTurn, SingleTurn };
enum class RelMode { Split, Combined };
enum class OverallMode { Decomposed, BaselineZeroShot };

inline std::string_view to_string(ClassMode m) { return m == ClassMode::TwoTurn ? "TWO_TURN" : "SINGLE_TURN"; }
inline std::string_view to_string(RelMode m) { return m == RelMode::Split ? "SPLIT" : "COMBINED"; }
inline std::string_view to_string(OverallMode m) {
    return m == OverallMode::Decomposed ? "DECOMPOSED" : "BASELINE_ZERO_SHOT";
}

struct PipelineConfig {
    double temp_class = 0.4;
    double temp_assoc = 0.9;
    double temp_inherit = 0.8;
    ClassMode class_mode = ClassMode::TwoTurn;
    RelMode rel_mode = RelMode::Split;
    OverallMode overall_mode = OverallMode::Decomposed;
    int max_attempts = kDefaultMaxAttempts;
    std::string model_name = "gpt-3.5-turbo";
    std::string run_seed;
    std::optional<int> max_tokens;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

    void check() const {
        for (double t : {temp_class, temp_assoc, temp_inherit})
            if (!(t >= 0.0 && t <= 2.0)) throw Error("temperature " + std::to_string(t) + " outside [0, 2]");
        if (max_attempts < 1) throw Error("max_attempts must be at least 1");
    }

    /// Temperature used for requests of `task`. The zero-shot baseline uses
    /// the class temperature; the combined relationship prompt the
    /// association one.
    double temperature_for(TaskKind task) const {
        switch (task) {
            case TaskKind::ClassTurn1:
            case TaskKind::ClassTurn2:
            case TaskKind::ClassSingleTurn:
            case TaskKind::BaselineZeroShot: return temp_class;
            case TaskKind::AssocAgg:
            case TaskKind::RelCombined: return temp_assoc;
            case TaskKind::Inheritance: return temp_inherit;
        }
        return temp_class;
    }

    CompletionParams params(TaskKind task) const {
        return {temperature_for(task), max_tokens, model_name, task};
    }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
    return {{"temp_class", c.temp_class},
            {"temp_assoc", c.temp_assoc},
            {"temp_inherit", c.temp_inherit},
            {"class_mode", to_string(c.class_mode)},
            {"rel_mode", to_string(c.rel_mode)},
            {"overall_mode", to_string(c.overall_mode)},
            {"max_attempts", c.max_attempts},
            {"model_name", c.model_name},
            {"run_seed", c.run_seed},
            {"max_tokens", c.max_tokens ? nlohmann::json(*c.max_tokens) : nlohmann::json(nullptr)}};
}

/// Overrides fields of `base` present in `j`; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
    if (!j.is_object()) throw SchemaError("pipeline configuration must be an object");
    auto str = [&](const std::string& key) {
        if (!j.at(key).is_string()) throw SchemaError("'" + key + "' must be a string");
        return j.at(key).get<std::string>();
    };
    auto num = [&](const std::string& key) {
        if (!j.at(key).is_number()) throw SchemaError("'" + key + "' must be a number");
        return j.at(key).get<double>();
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "temp_class") base.temp_class = num(key);
        else if (key == "temp_assoc") base.temp_assoc = num(key);
        else if (key == "temp_inherit") base.temp_inherit = num(key);
        else if (key == "max_attempts") base.max_attempts = static_cast<int>(num(key));
        else if (key == "model_name") base.model_name = str(key);
        else if (key == "run_seed") base.run_seed = str(key);
        else if (key == "max_tokens") {
            if (value.is_null()) base.max_tokens.reset();
            else base.max_tokens = static_cast<int>(num(key));
        } else if (key == "class_mode") {
            auto v = str(key);
            if (v == "TWO_TURN" || v == "two-turn") base.class_mode = ClassMode::TwoTurn;
            else if (v == "SINGLE_TURN" || v == "single-turn") base.class_mode = ClassMode::SingleTurn;
            else throw SchemaError("unknown class_mode '" + v + "'");
        } else if (key == "rel_mode") {
            auto v = str(key);
            if (v == "SPLIT" || v == "split") base.rel_mode = RelMode::Split;
            else if (v == "COMBINED" || v == "combined") base.rel_mode = RelMode::Combined;
            else throw SchemaError("unknown rel_mode '" + v + "'");
        } else if (key == "overall_mode") {
            auto v = str(key);
            if (v == "DECOMPOSED" || v == "decomposed") base.overall_mode = OverallMode::Decomposed;
            else if (v == "BASELINE_ZERO_SHOT" || v == "baseline") base.overall_mode = OverallMode::BaselineZeroShot;
            else throw SchemaError("unknown overall_mode '" + v + "'");
        } else {
            throw SchemaError("unknown configuration key '" + key + "'");
        }
    }
    base.check();
    return base;
}

struct StepText {
    std::string name;
    std::string text;

    friend bool operator==(const StepText&, const StepText&) = default;
};

struct RunArtifacts {
    DomainModel model;
    FixReport fix_report;
    std::vector<TranscriptRecord> transcripts;
    std::vector<StepText> intermediate;
    PipelineConfig config;
    std::vector<std::string> class_names;
    std::vector<ParseError> parse_errors;
};

/// ExhaustedRetries raised inside a run, with what was produced so far.
class RunFailure : public ExhaustedRetries {
public:
    RunFailure(const ExhaustedRetries& cause, TaskKind task, RunArtifacts partial)
        : ExhaustedRetries(std::string(to_string(task)) + ": " + cause.last_error(), cause.responses()),
          task_(task), partial_(std::move(partial)) {}

    TaskKind task() const noexcept { return task_; }
    const RunArtifacts& partial() const noexcept { return partial_; }

private:
    TaskKind task_;
    RunArtifacts partial_;
};

struct ClassGeneration {
    std::string raw_text;
    ParseResult parsed;
    std::vector<StepText> intermediate;
};

namespace pipeline_detail {

inline void require_text(const std::string& text) {
    if (lineparse_detail::is_blank(text)) throw EmptyOutput();
}

inline void append_errors(std::vector<ParseError>& to, const ParseResult& r) {
    to.insert(to.end(), r.errors.begin(), r.errors.end());
}

}  // namespace pipeline_detail

/// Step 1. TWO_TURN asks CLASS_TURN1 free-form and parses only the
/// CLASS_TURN2 answer; SINGLE_TURN asks once. A retry repeats only the turn
/// that failed.
inline ClassGeneration run_class_generation(const std::string& description, const PipelineConfig& cfg,
                                            ChatProvider& provider,
                                            const PromptKit& kit = default_prompt_kit()) {
    ClassGeneration out;
    auto parse = [&](const std::string& text) {
        pipeline_detail::require_text(text);
        out.parsed = parse_class_block(text);
        return text;
    };
    if (cfg.class_mode == ClassMode::SingleTurn) {
        auto msgs = kit.render(TaskKind::ClassSingleTurn, {description, {}, {}});
        out.raw_text = complete_with_reparse(provider, msgs, cfg.params(TaskKind::ClassSingleTurn), parse,
                                             cfg.max_attempts);
        out.intermediate.push_back({"class_single_turn", out.raw_text});
        return out;
    }
    auto first = kit.render(TaskKind::ClassTurn1, {description, {}, {}});
    auto turn1 = complete_with_reparse(
        provider, first, cfg.params(TaskKind::ClassTurn1),
        [](const std::string& text) {
            pipeline_detail::require_text(text);
            return text;
        },
        cfg.max_attempts);
    out.intermediate.push_back({"class_turn1", turn1});
    auto history = first;
    history.push_back({Role::Assistant, turn1});
    auto second = kit.render(TaskKind::ClassTurn2, {description, {}, history});
    out.raw_text = complete_with_reparse(provider, second, cfg.params(TaskKind::ClassTurn2), parse,
                                         cfg.max_attempts);
    out.intermediate.push_back({"class_turn2", out.raw_text});
    return out;
}

/// Association/aggregation lines for the given class names.
inline std::pair<std::string, ParseResult> run_assoc_generation(const std::string& description,
                                                                const std::vector<std::string>& class_names,
                                                                const PipelineConfig& cfg, ChatProvider& provider,
                                                                const PromptKit& kit = default_prompt_kit()) {
    ParseResult parsed;
    auto msgs = kit.render(TaskKind::AssocAgg, {description, class_names, {}});
    auto text = complete_with_reparse(
        provider, msgs, cfg.params(TaskKind::AssocAgg),
        [&](const std::string& t) {
            pipeline_detail::require_text(t);
            parsed = parse_assoc_lines(t);
            return t;
        },
        cfg.max_attempts);
    return {text, parsed};
}

inline std::pair<std::string, ParseResult> run_inherit_generation(const std::string& description,
                                                                  const std::vector<std::string>& class_names,
                                                                  const PipelineConfig& cfg, ChatProvider& provider,
                                                                  const PromptKit& kit = default_prompt_kit()) {
    ParseResult parsed;
    auto msgs = kit.render(TaskKind::Inheritance, {description, class_names, {}});
    auto text = complete_with_reparse(
        provider, msgs, cfg.params(TaskKind::Inheritance),
        [&](const std::string& t) {
            pipeline_detail::require_text(t);
            parsed = parse_inherit_lines(t);
            return t;
        },
        cfg.max_attempts);
    return {text, parsed};
}

/// Runs the whole workflow for one description.
inline RunArtifacts run(const std::string& description, const PipelineConfig& cfg, ChatProvider& provider,
                        const PromptKit& kit = default_prompt_kit()) {
    if (lineparse_detail::is_blank(description)) throw MissingInput("system description is empty");
    cfg.check();
    TranscriptTap tap(provider);
    RunArtifacts art;
    art.config = cfg;

    TaskKind current = TaskKind::ClassTurn1;
    try {
        if (cfg.overall_mode == OverallMode::BaselineZeroShot) {
            current = TaskKind::BaselineZeroShot;
            BaselineParse parsed;
            auto msgs = kit.render(TaskKind::BaselineZeroShot, {description, {}, {}});
            auto text = complete_with_reparse(
                tap, msgs, cfg.params(TaskKind::BaselineZeroShot),
                [&](const std::string& t) {
                    pipeline_detail::require_text(t);
                    parsed = parse_baseline_output(t);
                    return t;
                },
                cfg.max_attempts);
            art.intermediate.push_back({"baseline_zero_shot", text});
            pipeline_detail::append_errors(art.parse_errors, parsed.classes);
            pipeline_detail::append_errors(art.parse_errors, parsed.relationships);
            art.class_names = extract_class_names(text);
            AssembleContext ctx{cfg.run_seed, TaskKind::BaselineZeroShot, TaskKind::BaselineZeroShot,
                                TaskKind::BaselineZeroShot};
            auto assembled = assemble(parsed.classes.elements, parsed.relationships.elements, ctx);
            art.model = std::move(assembled.model);
            art.fix_report = std::move(assembled.fix_report);
            art.transcripts = tap.records();
            return art;
        }

        // Step 1: classes and attributes.
        current = cfg.class_mode == ClassMode::TwoTurn ? TaskKind::ClassTurn2 : TaskKind::ClassSingleTurn;
        auto classes = run_class_generation(description, cfg, tap, kit);
        art.intermediate = classes.intermediate;
        pipeline_detail::append_errors(art.parse_errors, classes.parsed);

        // Step 2: class names.
        art.class_names = extract_class_names(classes.raw_text);

        // Step 3: relationships, associations merged before inheritances.
        std::vector<ParsedElement> rels;
        AssembleContext ctx{cfg.run_seed, current, TaskKind::AssocAgg, TaskKind::Inheritance};
        if (cfg.rel_mode == RelMode::Split) {
            current = TaskKind::AssocAgg;
            auto [assoc_text, assoc] = run_assoc_generation(description, art.class_names, cfg, tap, kit);
            art.intermediate.push_back({"assoc_agg", assoc_text});
            current = TaskKind::Inheritance;
            auto [inherit_text, inherit] = run_inherit_generation(description, art.class_names, cfg, tap, kit);
            art.intermediate.push_back({"inheritance", inherit_text});
            pipeline_detail::append_errors(art.parse_errors, assoc);
            pipeline_detail::append_errors(art.parse_errors, inherit);
            rels = std::move(assoc.elements);
            rels.insert(rels.end(), inherit.elements.begin(), inherit.elements.end());
        } else {
            current = TaskKind::RelCombined;
            ctx.assoc_task = ctx.inherit_task = TaskKind::RelCombined;
            ParseResult assoc, inherit;
            auto msgs = kit.render(TaskKind::RelCombined, {description, art.class_names, {}});
            auto text = complete_with_reparse(
                tap, msgs, cfg.params(TaskKind::RelCombined),
                [&](const std::string& t) {
                    pipeline_detail::require_text(t);
                    assoc = scan_assoc_lines(t);
                    inherit = scan_inherit_lines(t);
                    if (assoc.elements.empty() && inherit.elements.empty() &&
                        !lineparse_detail::has_none_marker(t))
                        throw EmptyOutput();
                    return t;
                },
                cfg.max_attempts);
            art.intermediate.push_back({"rel_combined", text});
            pipeline_detail::append_errors(art.parse_errors, assoc);
            pipeline_detail::append_errors(art.parse_errors, inherit);
            rels = std::move(assoc.elements);
            rels.insert(rels.end(), inherit.elements.begin(), inherit.elements.end());
        }

        // Step 4: fix and assemble.
        auto assembled = assemble(classes.parsed.elements, rels, ctx);
        art.model = std::move(assembled.model);
        art.fix_report = std::move(assembled.fix_report);
        art.transcripts = tap.records();
        return art;
    } catch (const RunFailure&) {
        throw;
    } catch (const ExhaustedRetries& e) {
        art.transcripts = tap.records();
        throw RunFailure(e, current, std::move(art));
    }
}

// --- run directories ---------------------------------------------------------

inline nlohmann::json to_json(const FixReport& r) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : r.applied) {
        nlohmann::json j = {{"rule", e.rule}, {"element", e.element}, {"before", e.before}, {"after", e.after}};
        if (!e.note.empty()) j["note"] = e.note;
        out.push_back(std::move(j));
    }
    return {{"applied", out}};
}

inline nlohmann::json to_json(const ParseError& e) {
    return {{"line", e.line_number}, {"raw_line", e.raw_line}, {"reason", e.reason}};
}

namespace pipeline_detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

}  // namespace pipeline_detail

/// First unused `root/run-NNN`.
inline std::filesystem::path next_run_dir(const std::filesystem::path& root) {
    for (int i = 1;; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "run-%03d", i);
        auto p = root / name;
        if (!std::filesystem::exists(p)) return p;
    }
}

/// model.json, model.puml, fix_report.json, transcripts.jsonl, config.json,
/// parse_errors.json and intermediate/<step>.txt. A model is only written
/// for complete runs.
inline void write_run_dir(const std::filesystem::path& dir, const RunArtifacts& art, bool complete = true) {
    using pipeline_detail::write_file;
    std::filesystem::create_directories(dir / "intermediate");
    if (complete) {
        write_file(dir / "model.json", export_canonical(art.model));
        write_file(dir / "model.puml", to_plantuml(art.model));
        write_file(dir / "fix_report.json", to_json(art.fix_report).dump(2) + "\n");
    }
    std::string transcripts;
    for (const auto& r : art.transcripts) transcripts += to_json(r).dump() + "\n";
    write_file(dir / "transcripts.jsonl", transcripts);
    write_file(dir / "config.json", to_json(art.config).dump(2) + "\n");
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : art.parse_errors) errors.push_back(to_json(e));
    write_file(dir / "parse_errors.json", errors.dump(2) + "\n");
    for (const auto& s : art.intermediate) write_file(dir / "intermediate" / (s.name + ".txt"), s.text);
}

}  // namespace domodel
