#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "domodel/evaluation.hpp"
#include "domodel/experiment.hpp"
#include "domodel/exporters.hpp"
#include "domodel/live_provider.hpp"
#include "domodel/llm.hpp"
#include "domodel/pipeline.hpp"
#include "domodel/review_http.hpp"

namespace domodel {

/// Bad flags or unreadable inputs; exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Settings shared by every subcommand. Precedence: flags, then DOMODEL_*
/// environment variables, then the JSON config file.
struct CliSettings {
    std::string provider = "live";
    std::string transcripts;
    std::string stub;
    std::string config_file;
    int jobs = 1;
    LiveConfig live;
    PipelineConfig pipeline;
};

namespace cli_detail {

struct FlagValues {
    std::optional<std::string> provider, transcripts, stub, model, endpoint, mode, class_mode, rel_mode, temps;
    std::optional<int> jobs, max_attempts, timeout;
};

inline void apply_temps(PipelineConfig& cfg, const std::string& spec) {
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("bad --temps item '" + item + "'; expected task=value");
        const auto key = item.substr(0, eq);
        double v = 0;
        try {
            v = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("bad temperature in '" + item + "'");
        }
        if (key == "class") cfg.temp_class = v;
        else if (key == "assoc") cfg.temp_assoc = v;
        else if (key == "inherit") cfg.temp_inherit = v;
        else throw UsageError("unknown task '" + key + "' in --temps");
    }
}

inline CliSettings resolve_settings(const std::string& config_file, const FlagValues& f) {
    CliSettings s;
    s.config_file = config_file;
    if (!config_file.empty()) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_text_file(config_file));
        } catch (const nlohmann::json::parse_error& e) {
            throw UsageError("config file " + config_file + " is not valid JSON: " + e.what());
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
        nlohmann::json pipeline = nlohmann::json::object();
        for (const auto& [key, value] : doc.items()) {
            if (key == "provider") s.provider = value.get<std::string>();
            else if (key == "transcripts") s.transcripts = value.get<std::string>();
            else if (key == "stub") s.stub = value.get<std::string>();
            else if (key == "jobs") s.jobs = value.get<int>();
            else if (key == "endpoint") s.live.endpoint = value.get<std::string>();
            else if (key == "timeout_seconds") s.live.timeout_seconds = value.get<int>();
            else if (key == "api_key") s.live.api_key = value.get<std::string>();
            else pipeline[key] = value;
        }
        try {
            s.pipeline = config_from_json(pipeline, s.pipeline);
        } catch (const Error& e) {
            throw UsageError(std::string("config file: ") + e.what());
        }
        s.live.model_name = s.pipeline.model_name;
    }
    apply_env(s.live);
    if (const char* v = std::getenv("DOMODEL_MODEL"); v && *v) s.pipeline.model_name = v;
    if (const char* v = std::getenv("DOMODEL_PROVIDER"); v && *v) s.provider = v;
    if (const char* v = std::getenv("DOMODEL_TRANSCRIPTS"); v && *v) s.transcripts = v;

    if (f.provider) s.provider = *f.provider;
    if (f.transcripts) s.transcripts = *f.transcripts;
    if (f.stub) s.stub = *f.stub;
    if (f.jobs) s.jobs = *f.jobs;
    if (f.endpoint) s.live.endpoint = *f.endpoint;
    if (f.timeout) s.live.timeout_seconds = *f.timeout;
    if (f.model) s.pipeline.model_name = s.live.model_name = *f.model;
    if (f.max_attempts) s.pipeline.max_attempts = *f.max_attempts;
    if (f.mode) {
        if (*f.mode == "decomposed") s.pipeline.overall_mode = OverallMode::Decomposed;
        else if (*f.mode == "baseline") s.pipeline.overall_mode = OverallMode::BaselineZeroShot;
        else throw UsageError("--mode must be decomposed or baseline");
    }
    if (f.class_mode) {
        if (*f.class_mode == "two-turn") s.pipeline.class_mode = ClassMode::TwoTurn;
        else if (*f.class_mode == "single-turn") s.pipeline.class_mode = ClassMode::SingleTurn;
        else throw UsageError("--class-mode must be two-turn or single-turn");
    }
    if (f.rel_mode) {
        if (*f.rel_mode == "split") s.pipeline.rel_mode = RelMode::Split;
        else if (*f.rel_mode == "combined") s.pipeline.rel_mode = RelMode::Combined;
        else throw UsageError("--rel-mode must be split or combined");
    }
    if (f.temps) apply_temps(s.pipeline, *f.temps);
    try {
        s.pipeline.check();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (s.jobs < 1) throw UsageError("--jobs must be at least 1");
    return s;
}

/// Stub responses: a JSON object mapping task names to a string or a list
/// of strings (one per attempt), or any other text returned verbatim.
inline ScriptedProvider load_stub(const std::string& path) {
    const auto text = read_text_file(path);
    try {
        auto doc = nlohmann::json::parse(text);
        if (doc.is_object()) {
            std::map<TaskKind, std::vector<std::string>> responses;
            std::string fallback;
            for (const auto& [key, value] : doc.items()) {
                std::vector<std::string> list =
                    value.is_array() ? value.get<std::vector<std::string>>() : std::vector<std::string>{value.get<std::string>()};
                if (key == "*") {
                    fallback = list.empty() ? "" : list.front();
                    continue;
                }
                auto task = parse_task_kind(key);
                if (!task) throw UsageError("stub file names unknown task '" + key + "'");
                responses[*task] = std::move(list);
            }
            return ScriptedProvider::by_task(std::move(responses), std::move(fallback));
        }
    } catch (const nlohmann::json::exception&) {
    }
    return ScriptedProvider::constant(text);
}

}  // namespace cli_detail

/// Owns the provider chain chosen on the command line.
class ProviderStack {
public:
    explicit ProviderStack(const CliSettings& s) {
        if (s.provider == "replay") {
            if (s.transcripts.empty()) throw UsageError("--provider replay needs --transcripts");
            if (!std::filesystem::exists(s.transcripts))
                throw UsageError("transcript file " + s.transcripts + " not found");
            store_ = std::make_unique<TranscriptStore>(TranscriptStore::open(s.transcripts));
            top_ = std::make_unique<ReplayProvider>(*store_);
            return;
        }
        if (s.provider == "live" || s.provider == "record") {
            base_ = std::make_unique<LiveProvider>(s.live);
        } else if (s.provider == "stub") {
            if (s.stub.empty()) throw UsageError("--provider stub needs --stub");
            if (!std::filesystem::exists(s.stub)) throw UsageError("stub file " + s.stub + " not found");
            base_ = std::make_unique<ScriptedProvider>(cli_detail::load_stub(s.stub));
        } else {
            throw UsageError("--provider must be live, replay, record or stub");
        }
        const bool record = s.provider == "record" || (s.provider == "stub" && !s.transcripts.empty());
        if (record) {
            if (s.transcripts.empty()) throw UsageError("--provider record needs --transcripts");
            store_ = std::make_unique<TranscriptStore>(TranscriptStore::open(s.transcripts));
            top_ = std::make_unique<RecordingProvider>(*base_, *store_);
        }
    }

    ChatProvider& get() { return top_ ? *top_ : *base_; }

private:
    std::unique_ptr<TranscriptStore> store_;
    std::unique_ptr<ChatProvider> base_;
    std::unique_ptr<ChatProvider> top_;
};

namespace cli_detail {

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline DomainModel read_model(const std::filesystem::path& p) {
    try {
        return import_canonical(read_text_file(p));
    } catch (const Error& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
}

/// Generates `runs` runs of one description into consecutive run dirs.
/// Returns the number of failed runs.
inline int generate_runs(const std::string& description, const std::filesystem::path& out_root, int runs,
                         const CliSettings& s, ChatProvider& provider, std::ostream& out, std::ostream& err) {
    std::filesystem::create_directories(out_root);
    std::vector<std::filesystem::path> dirs;
    auto first = next_run_dir(out_root);
    const int start = std::stoi(first.filename().string().substr(4));
    for (int i = 0; i < runs; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "run-%03d", start + i);
        dirs.push_back(out_root / name);
    }
    std::vector<std::string> messages(static_cast<std::size_t>(runs));
    std::vector<int> failed(static_cast<std::size_t>(runs), 0);
    parallel_for(dirs.size(), s.jobs, [&](std::size_t i) {
        try {
            auto art = run(description, s.pipeline, provider);
            write_run_dir(dirs[i], art);
            messages[i] = dirs[i].string();
        } catch (const RunFailure& e) {
            write_run_dir(dirs[i], e.partial(), false);
            messages[i] = "FAILED " + dirs[i].string() + ": " + e.what();
            failed[i] = 1;
        }
    });
    int n_failed = 0;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        (failed[i] ? err : out) << messages[i] << "\n";
        n_failed += failed[i];
    }
    return n_failed;
}

}  // namespace cli_detail

/// Entry point of the `domodel` tool. Exit codes: 0 success, 1 usage or
/// input error, 2 a run gave up after exhausting its retries.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Domain model generation with decomposed LLM prompting", "domodel"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file;
    cli_detail::FlagValues flags;
    app.add_option("--config", config_file, "JSON configuration file");
    app.add_option("--provider", flags.provider, "live | replay | record | stub");
    app.add_option("--transcripts", flags.transcripts, "transcript store (.jsonl)");
    app.add_option("--stub", flags.stub, "stub response file for --provider stub");
    app.add_option("--model", flags.model, "model name sent to the endpoint");
    app.add_option("--endpoint", flags.endpoint, "OpenAI-compatible base URL");
    app.add_option("--timeout", flags.timeout, "request timeout in seconds");
    app.add_option("--jobs", flags.jobs, "parallel runs");
    app.add_option("--max-attempts", flags.max_attempts, "re-generations per sub-task");

    // generate
    auto* gen = app.add_subcommand("generate", "run the pipeline and write run directories");
    std::string desc, out_dir = "out", dataset_for_gen;
    int runs = 1;
    gen->add_option("--desc", desc, "system description file");
    gen->add_option("--dataset", dataset_for_gen, "generate for every system of a dataset");
    gen->add_option("--out", out_dir, "output directory");
    gen->add_option("--runs", runs, "runs per description");
    gen->add_option("--mode", flags.mode, "decomposed | baseline");
    gen->add_option("--class-mode", flags.class_mode, "two-turn | single-turn");
    gen->add_option("--rel-mode", flags.rel_mode, "split | combined");
    gen->add_option("--temps", flags.temps, "e.g. class=0.4,assoc=0.9,inherit=0.8");

    // eval
    auto* ev = app.add_subcommand("eval", "score generated models against oracle models");
    std::string generated, oracle, batch, json_out;
    bool exclude_enums = false;
    ev->add_option("--generated", generated, "model file, run directory, or (with --batch) output root");
    ev->add_option("--oracle", oracle, "oracle model file");
    ev->add_option("--batch", batch, "dataset directory");
    ev->add_option("--json", json_out, "write the structured report here");
    ev->add_flag("--exclude-enums", exclude_enums, "do not score enumerations as classes");

    // sweep
    auto* sw = app.add_subcommand("sweep", "temperature sweep per sub-task");
    std::string sweep_dataset, grid = "0.1:1.0:0.1", sweep_task = "all", sweep_json;
    int runs_per_point = 1;
    sw->add_option("--dataset", sweep_dataset, "dataset directory")->required();
    sw->add_option("--grid", grid, "lo:hi:step");
    sw->add_option("--runs-per-point", runs_per_point, "runs per system and grid point");
    sw->add_option("--task", sweep_task, "class | assoc | inherit | all");
    sw->add_option("--json", sweep_json, "write the structured result here");
    sw->add_option("--class-mode", flags.class_mode, "two-turn | single-turn");

    // serve
    auto* sv = app.add_subcommand("serve", "start the review service");
    int port = 8080;
    std::string host = "127.0.0.1", data_dir = "review-data", ui_dir;
    sv->add_option("--port", port, "TCP port");
    sv->add_option("--host", host, "bind address");
    sv->add_option("--data-dir", data_dir, "project storage directory");
    sv->add_option("--ui-dir", ui_dir, "built review UI to serve at /");

    // transcripts
    auto* tr = app.add_subcommand("transcripts", "summarize a transcript store");
    std::string transcript_file;
    tr->add_option("file", transcript_file, "transcript store (.jsonl)")->required();

    // dataset
    auto* ds = app.add_subcommand("dataset", "dataset utilities");
    auto* manifest = ds->add_subcommand("manifest", "print per-system statistics");
    ds->require_subcommand(1);
    std::string manifest_dataset;
    bool manifest_write = false;
    manifest->add_option("--dataset", manifest_dataset, "dataset directory")->required();
    manifest->add_flag("--write", manifest_write, "also write manifest.json into the dataset");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const auto settings = cli_detail::resolve_settings(config_file, flags);

        if (*gen) {
            if (desc.empty() == dataset_for_gen.empty()) throw UsageError("give exactly one of --desc or --dataset");
            if (runs < 1) throw UsageError("--runs must be at least 1");
            ProviderStack providers(settings);
            int failed = 0;
            if (!desc.empty()) {
                std::error_code ec_desc;
                if (!std::filesystem::is_regular_file(desc, ec_desc)) throw UsageError("description file " + desc + " not found");
                failed = cli_detail::generate_runs(read_text_file(desc), out_dir, runs, settings, providers.get(), out, err);
            } else {
                for (const auto& sys : load_dataset(dataset_for_gen))
                    failed += cli_detail::generate_runs(sys.description, std::filesystem::path(out_dir) / sys.name, runs,
                                                        settings, providers.get(), out, err);
            }
            return failed ? 2 : 0;
        }

        if (*ev) {
            MatchOptions opt{!exclude_enums};
            if (!batch.empty()) {
                if (generated.empty()) throw UsageError("--batch needs --generated <output root>");
                std::vector<SystemCase> cases;
                try {
                    cases = load_dataset(batch);
                } catch (const Error& e) {
                    throw UsageError(e.what());
                }
                std::vector<ReportRow> rows;
                try {
                    rows = batch_evaluate(cases, generated, opt);
                } catch (const Error& e) {
                    throw UsageError(e.what());
                }
                out << format_table(rows);
                if (!json_out.empty()) cli_detail::write_json_file(json_out, {{"rows", to_json(rows)}});
                return 0;
            }
            if (generated.empty() || oracle.empty()) throw UsageError("eval needs --generated and --oracle");
            if (!std::filesystem::exists(generated)) throw UsageError(generated + " not found");
            if (!std::filesystem::exists(oracle)) throw UsageError(oracle + " not found");
            const auto oracle_model = cli_detail::read_model(oracle);
            std::vector<std::filesystem::path> files;
            if (std::filesystem::is_directory(generated)) {
                for (const auto& e : std::filesystem::recursive_directory_iterator(generated))
                    if (e.is_regular_file() && e.path().filename() == "model.json") files.push_back(e.path());
                std::sort(files.begin(), files.end());
                if (files.empty()) throw UsageError("no model.json below " + generated);
            } else {
                files.push_back(generated);
            }
            std::vector<MetricsReport> reports;
            nlohmann::json matches = nlohmann::json::array();
            for (const auto& f : files) {
                auto g = cli_detail::read_model(f);
                auto match = match_models(g, oracle_model, opt);
                reports.push_back(compute_metrics(match));
                matches.push_back({{"model", f.string()}, {"matches", to_json(match)}});
            }
            const ReportRow row{std::filesystem::path(generated).filename().string(), aggregate(reports),
                                static_cast<int>(reports.size())};
            out << format_table({row});
            if (!json_out.empty())
                cli_detail::write_json_file(json_out, {{"rows", to_json(std::vector<ReportRow>{row})}, {"runs", matches}});
            return 0;
        }

        if (*sw) {
            std::vector<SweepTask> tasks;
            if (sweep_task == "all") {
                tasks = {SweepTask::Class, SweepTask::Assoc, SweepTask::Inherit};
            } else if (auto t = parse_sweep_task(sweep_task)) {
                tasks = {*t};
            } else {
                throw UsageError("--task must be class, assoc, inherit or all");
            }
            std::vector<double> points;
            try {
                points = parse_grid(grid);
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
            std::vector<SystemCase> cases;
            try {
                cases = load_dataset(sweep_dataset);
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
            ProviderStack providers(settings);
            auto result = sweep(cases, points, tasks, runs_per_point, providers.get(), settings.pipeline, settings.jobs);
            out << format_sweep(result);
            for (const auto& p : result.points)
                for (const auto& e : p.errors)
                    err << to_string(p.task) << "@" << cli_detail::fmt3(p.temperature) << ": " << e << "\n";
            if (!sweep_json.empty()) cli_detail::write_json_file(sweep_json, to_json(result));
            return result.best_temperature.empty() ? 1 : 0;
        }

        if (*sv) {
            ProviderStack providers(settings);
            ReviewService service(data_dir, providers.get(), settings.pipeline);
            std::optional<std::filesystem::path> ui;
            if (!ui_dir.empty()) ui = ui_dir;
            ReviewServer server(service, ui);
            if (!server.bind(host, port)) {
                err << "error: cannot bind " << host << ":" << port << "\n";
                return 1;
            }
            out << "serving on http://" << host << ":" << port << std::endl;
            server.listen_after_bind();
            return 0;
        }

        if (*tr) {
            if (!std::filesystem::exists(transcript_file)) throw UsageError(transcript_file + " not found");
            std::unique_ptr<TranscriptStore> opened;
            try {
                opened = std::make_unique<TranscriptStore>(TranscriptStore::open(transcript_file));
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
            const auto& store = *opened;
            for (const auto& r : store.records()) {
                out << r.key.substr(0, 16) << " attempt=" << r.attempt_index
                    << " task=" << (r.params.task ? to_string(*r.params.task) : std::string_view("-"))
                    << " temperature=" << temperature_key(r.params.temperature) << " model=" << r.params.model_name
                    << " messages=" << r.request.size() << "\n";
            }
            out << store.size() << " records\n";
            return 0;
        }

        if (*manifest) {
            std::vector<SystemCase> cases;
            try {
                cases = load_dataset(manifest_dataset);
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
            auto doc = dataset_manifest(cases);
            out << doc.dump(2) << "\n";
            if (manifest_write)
                cli_detail::write_json_file((std::filesystem::path(manifest_dataset) / "manifest.json").string(), doc);
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ExhaustedRetries& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace domodel
