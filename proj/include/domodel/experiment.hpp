#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "domodel/error.hpp"
#include "domodel/evaluation.hpp"
#include "domodel/exporters.hpp"
#include "domodel/lineparse.hpp"
#include "domodel/pipeline.hpp"
#include "domodel/refinery.hpp"

namespace domodel {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// is rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < count; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- dataset -------------------------------------------------------------------

struct SystemCase {
    std::string name;
    std::string description;
    DomainModel oracle;
};

/// One sub-directory per system holding description.txt and
/// oracle.model.json, loaded in name order.
inline std::vector<SystemCase> load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("dataset directory " + dir.string() + " not found");
    std::vector<std::filesystem::path> systems;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "description.txt"))
            systems.push_back(entry.path());
    std::sort(systems.begin(), systems.end());
    if (systems.empty()) throw Error("dataset " + dir.string() + " contains no systems");
    std::vector<SystemCase> out;
    for (const auto& s : systems) {
        SystemCase c;
        c.name = s.filename().string();
        c.description = read_text_file(s / "description.txt");
        c.oracle = import_canonical(read_text_file(s / "oracle.model.json"));
        out.push_back(std::move(c));
    }
    return out;
}

/// Per-system size statistics: classes, enumerations, attributes,
/// associations (incl. aggregations), inheritances, description words.
inline nlohmann::json dataset_manifest(const std::vector<SystemCase>& cases) {
    nlohmann::json systems = nlohmann::json::array();
    for (const auto& c : cases) {
        std::size_t attrs = 0, assoc = 0, inherit = 0;
        for (const auto& k : c.oracle.classes) attrs += k.attributes.size();
        for (const auto& r : c.oracle.relationships) (r.kind == RelKind::Inheritance ? inherit : assoc)++;
        std::istringstream words(c.description);
        std::size_t n_words = 0;
        for (std::string w; words >> w;) ++n_words;
        systems.push_back({{"name", c.name},
                           {"classes", c.oracle.classes.size()},
                           {"enumerations", c.oracle.enums.size()},
                           {"attributes", attrs},
                           {"associations", assoc},
                           {"inheritances", inherit},
                           {"description_words", n_words}});
    }
    return {{"systems", systems}};
}

// --- reports -------------------------------------------------------------------

struct ReportRow {
    std::string label;
    MetricsReport metrics;
    int runs = 0;
};

/// Rows of precision/recall/F1 per category, '|'-delimited.
inline std::string format_table(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "| system | runs";
    for (const char* c : kCategoryNames) out << " | " << c << " P | " << c << " R | " << c << " F1";
    out << " |\n|---|---";
    for (std::size_t i = 0; i < kCategoryNames.size() * 3; ++i) out << "|---";
    out << "|\n";
    for (const auto& r : rows) {
        out << "| " << r.label << " | " << r.runs;
        for (const auto* m : categories(r.metrics)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, " | %.3f | %.3f | %.3f", m->precision, m->recall, m->f1);
            out << buf;
        }
        out << " |\n";
    }
    return out.str();
}

inline nlohmann::json to_json(const std::vector<ReportRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) out.push_back({{"system", r.label}, {"runs", r.runs}, {"metrics", to_json(r.metrics)}});
    return out;
}

/// Generated models of one system under `generated_root`: `<system>.model.json`
/// or any `model.json` below `<system>/`, in path order.
inline std::vector<std::filesystem::path> find_generated_models(const std::filesystem::path& generated_root,
                                                                const std::string& system) {
    std::vector<std::filesystem::path> out;
    if (auto flat = generated_root / (system + ".model.json"); std::filesystem::exists(flat)) out.push_back(flat);
    if (auto dir = generated_root / system; std::filesystem::is_directory(dir))
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().filename() == "model.json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// One row per system (mean over its generated runs) plus a "mean" row
/// averaging the system rows.
inline std::vector<ReportRow> batch_evaluate(const std::vector<SystemCase>& cases,
                                             const std::filesystem::path& generated_root,
                                             const MatchOptions& opt = {}) {
    std::vector<ReportRow> rows;
    std::vector<MetricsReport> system_means;
    for (const auto& c : cases) {
        auto files = find_generated_models(generated_root, c.name);
        if (files.empty()) throw Error("no generated model for system " + c.name);
        std::vector<MetricsReport> runs;
        for (const auto& f : files) runs.push_back(evaluate(import_canonical(read_text_file(f)), c.oracle, opt));
        rows.push_back({c.name, aggregate(runs), static_cast<int>(runs.size())});
        system_means.push_back(rows.back().metrics);
    }
    int total = 0;
    for (const auto& r : rows) total += r.runs;
    rows.push_back({"mean", aggregate(system_means), total});
    return rows;
}

// --- temperature sweep -----------------------------------------------------------

enum class SweepTask { Class, Assoc, Inherit };

inline std::string_view to_string(SweepTask t) {
    switch (t) {
        case SweepTask::Class: return "class";
        case SweepTask::Assoc: return "assoc";
        case SweepTask::Inherit: return "inherit";
    }
    return "?";
}

inline std::optional<SweepTask> parse_sweep_task(std::string_view s) {
    for (auto t : {SweepTask::Class, SweepTask::Assoc, SweepTask::Inherit})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

/// "lo:hi:step", both ends inclusive, values rounded to 1e-6.
inline std::vector<double> parse_grid(std::string_view spec) {
    std::vector<double> parts;
    std::string cur;
    for (char c : std::string(spec) + ":") {
        if (c != ':') {
            cur.push_back(c);
            continue;
        }
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(cur, &used));
            if (used != cur.size()) throw std::invalid_argument(cur);
        } catch (const std::exception&) {
            throw Error("bad grid '" + std::string(spec) + "'; expected lo:hi:step");
        }
        cur.clear();
    }
    if (parts.size() != 3 || parts[2] <= 0 || parts[1] < parts[0])
        throw Error("bad grid '" + std::string(spec) + "'; expected lo:hi:step with lo <= hi and step > 0");
    const auto n = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(std::round((parts[0] + i * parts[2]) * 1e6) / 1e6);
    return out;
}

struct SweepPoint {
    SweepTask task = SweepTask::Class;
    double temperature = 0.0;
    MetricsReport mean;
    int runs_ok = 0;
    int failures = 0;
    std::vector<std::string> errors;

    /// The F1 the sweep optimizes for this task.
    double f1() const {
        switch (task) {
            case SweepTask::Class: return mean.classes.f1;
            case SweepTask::Assoc: return mean.association.f1;
            case SweepTask::Inherit: return mean.inheritance.f1;
        }
        return 0.0;
    }
};

struct SweepResult {
    std::vector<SweepPoint> points;  // task order, then ascending temperature
    std::map<SweepTask, double> best_temperature;
};

/// Metrics of one sub-task run at `temperature`. Relationship tasks are fed
/// the oracle's class names and class block so class generation does not
/// influence them.
inline MetricsReport run_sweep_task(const SystemCase& sys, SweepTask task, double temperature,
                                    const PipelineConfig& base, ChatProvider& provider,
                                    const PromptKit& kit = default_prompt_kit()) {
    PipelineConfig cfg = base;
    if (task == SweepTask::Class) {
        cfg.temp_class = temperature;
        auto gen = run_class_generation(sys.description, cfg, provider, kit);
        auto assembled = assemble(gen.parsed.elements, {}, {cfg.run_seed});
        return evaluate(assembled.model, sys.oracle);
    }
    const auto oracle_lines = to_parsed_elements(sys.oracle);
    std::vector<std::string> names;
    for (const auto& e : sys.oracle.enums) names.push_back(e.name);
    for (const auto& c : sys.oracle.classes) names.push_back(c.name);
    ParseResult rels;
    if (task == SweepTask::Assoc) {
        cfg.temp_assoc = temperature;
        rels = run_assoc_generation(sys.description, names, cfg, provider, kit).second;
    } else {
        cfg.temp_inherit = temperature;
        rels = run_inherit_generation(sys.description, names, cfg, provider, kit).second;
    }
    auto assembled = assemble(oracle_lines.classes_block, rels.elements, {cfg.run_seed});
    return evaluate(assembled.model, sys.oracle);
}

/// Runs every (task, temperature) point `runs_per_point` times per system.
/// Failed runs are counted per point; they never abort the sweep.
inline SweepResult sweep(const std::vector<SystemCase>& cases, const std::vector<double>& grid,
                         const std::vector<SweepTask>& tasks, int runs_per_point, ChatProvider& provider,
                         const PipelineConfig& base = {}, int jobs = 1,
                         const PromptKit& kit = default_prompt_kit()) {
    if (grid.empty()) throw Error("sweep grid is empty");
    if (runs_per_point < 1) throw Error("runs per point must be at least 1");
    SweepResult result;
    for (auto t : tasks)
        for (double temp : grid) result.points.push_back({t, temp, {}, 0, 0, {}});

    parallel_for(result.points.size(), jobs, [&](std::size_t i) {
        auto& point = result.points[i];
        std::vector<MetricsReport> ok;
        for (const auto& sys : cases)
            for (int r = 0; r < runs_per_point; ++r) {
                try {
                    ok.push_back(run_sweep_task(sys, point.task, point.temperature, base, provider, kit));
                } catch (const Error& e) {
                    ++point.failures;
                    point.errors.push_back(sys.name + ": " + e.what());
                }
            }
        point.runs_ok = static_cast<int>(ok.size());
        if (!ok.empty()) point.mean = aggregate(ok);
    });

    for (auto t : tasks) {
        const SweepPoint* best = nullptr;
        for (const auto& p : result.points)
            if (p.task == t && p.runs_ok > 0 && (!best || p.f1() > best->f1())) best = &p;
        if (best) result.best_temperature[t] = best->temperature;
    }
    return result;
}

inline std::string format_sweep(const SweepResult& r) {
    std::ostringstream out;
    out << "| task | temperature | runs | failures | class F1 | attribute F1 | inheritance F1 | association F1 |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& p : r.points) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "| %s | %.1f | %d | %d | %.3f | %.3f | %.3f | %.3f |\n",
                      std::string(to_string(p.task)).c_str(), p.temperature, p.runs_ok, p.failures,
                      p.mean.classes.f1, p.mean.attributes.f1, p.mean.inheritance.f1, p.mean.association.f1);
        out << buf;
    }
    for (const auto& [task, temp] : r.best_temperature) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "best %s temperature: %.1f\n", std::string(to_string(task)).c_str(), temp);
        out << buf;
    }
    return out.str();
}

inline nlohmann::json to_json(const SweepResult& r) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points)
        points.push_back({{"task", to_string(p.task)},
                          {"temperature", p.temperature},
                          {"runs", p.runs_ok},
                          {"failures", p.failures},
                          {"errors", p.errors},
                          {"f1", p.f1()},
                          {"metrics", to_json(p.mean)}});
    nlohmann::json best = nlohmann::json::object();
    for (const auto& [task, temp] : r.best_temperature) best[std::string(to_string(task))] = temp;
    return {{"points", points}, {"best_temperature", best}};
}

}  // namespace domodel
