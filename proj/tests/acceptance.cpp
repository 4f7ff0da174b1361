// One line per primary acceptance criterion. Exit status is nonzero when any
// criterion fails; a skipped live smoke does not count as a failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>

#include "domodel/cli.hpp"
#include "support.hpp"

using namespace domodel;
using namespace testsupport;

namespace {

constexpr double kParserBudgetSeconds = 5.0;
constexpr double kRefineryBudgetSeconds = 10.0;
constexpr double kMetricsTolerance = 1e-12;
constexpr double kLiveBudgetSeconds = 300.0;
constexpr int kRoundtripModels = 1000;
constexpr int kFuzzInputs = 1000;
constexpr int kMetricTriples = 100;
constexpr int kSelfMatchModels = 100;
constexpr int kMatchingPairs = 200;

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Pass;
    std::string detail;
};

/// Collects the first failure of a criterion.
struct Probe {
    bool ok = true;
    std::string why;
    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            why = what;
        }
    }
    Outcome done(const std::string& pass_detail) const {
        return ok ? Outcome{Verdict::Pass, pass_detail} : Outcome{Verdict::Fail, why};
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::optional<AssocLine> only_assoc(const ParseResult& r) {
    if (r.elements.size() != 1 || !r.errors.empty()) return std::nullopt;
    if (const auto* a = std::get_if<AssocLine>(&r.elements[0].value)) return *a;
    return std::nullopt;
}

Outcome parser_variants() {
    Probe p;
    const auto t0 = std::chrono::steady_clock::now();

    auto a = only_assoc(scan_assoc_lines("- 1 Player can be shortlisted in ShortListedPlayers"));
    p.expect(a && *a == AssocLine{"Player", Multiplicity::one(), "ShortListedPlayers", std::nullopt, RelKind::Association},
             "shortlisted variant");
    auto tutoring = scan_assoc_lines("- TutoringSession may be canceled by 1 Tutor or 1 Student");
    p.expect(tutoring.elements.size() == 2 && tutoring.errors.empty() &&
                 std::get<AssocLine>(tutoring.elements[0].value) ==
                     AssocLine{"TutoringSession", std::nullopt, "Tutor", Multiplicity::one(), RelKind::Association} &&
                 std::get<AssocLine>(tutoring.elements[1].value) ==
                     AssocLine{"TutoringSession", std::nullopt, "Student", Multiplicity::one(), RelKind::Association},
             "tutoring variant");
    a = only_assoc(scan_assoc_lines("- [1..*] Lab offer 0..* Test (They are associations)"));
    p.expect(a && *a == AssocLine{"Lab", Multiplicity{1, std::nullopt}, "Test", Multiplicity::many(), RelKind::Association},
             "bracketed lab variant");
    a = only_assoc(scan_assoc_lines("- 1..* Traveller associate Hotel 0..*"));
    p.expect(a && *a == AssocLine{"Traveller", Multiplicity{1, std::nullopt}, "Hotel", Multiplicity::many(),
                                  RelKind::Association},
             "trailing multiplicity variant");

    std::mt19937 rng(2024);
    for (int i = 0; i < kRoundtripModels && p.ok; ++i) {
        const auto lines = to_parsed_elements(random_model(rng));
        std::vector<ParsedElement> assoc, inherit;
        for (const auto& e : lines.relationships)
            (std::holds_alternative<InheritLine>(e.value) ? inherit : assoc).push_back(e);
        auto same = [](const std::vector<ParsedElement>& x, const ParseResult& y) {
            if (!y.errors.empty() || x.size() != y.elements.size()) return false;
            for (std::size_t k = 0; k < x.size(); ++k)
                if (x[k].value != y.elements[k].value) return false;
            return true;
        };
        p.expect(same(lines.classes_block, scan_class_block(emit_lines(lines.classes_block))), "class roundtrip");
        p.expect(same(assoc, scan_assoc_lines(emit_lines(assoc))), "association roundtrip");
        p.expect(same(inherit, scan_inherit_lines(emit_lines(inherit))), "inheritance roundtrip");
    }
    const double secs = seconds_since(t0);
    p.expect(secs < kParserBudgetSeconds, "took " + fmt(secs) + " s");
    return p.done("4 variants, " + std::to_string(kRoundtripModels) + " roundtrips in " + fmt(secs) + " s");
}

Outcome refinery() {
    Probe p;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(4242);
    auto normalized = [](const DomainModel& m) { return canonical_order(without_provenance(m)); };
    for (int i = 0; i < kFuzzInputs && p.ok; ++i) {
        auto [block, rels] = fuzz_input(rng);
        auto first = assemble(block, rels);
        p.expect(validate_model(first.model).empty(), "fuzz input " + std::to_string(i) + " not well-formed");
        const auto lines = to_parsed_elements(first.model);
        auto second = assemble(lines.classes_block, lines.relationships);
        p.expect(normalized(second.model) == normalized(first.model) && second.fix_report.empty(),
                 "fuzz input " + std::to_string(i) + " not idempotent");
    }

    auto m = assemble({cls("Hotel", {{"name", std::nullopt}})}, {}).model;
    p.expect(m.classes[0].attributes[0].type_name == "String", "String default");

    m = assemble({cls("Traveller"), cls("Hotel")}, {assoc("Traveller", std::nullopt, "Hotel", std::nullopt)}).model;
    p.expect(m.relationships.size() == 1 && m.relationships[0].source_mult == Multiplicity::one() &&
                 m.relationships[0].target_mult == Multiplicity::one(),
             "multiplicity-1 default");

    m = assemble({cls("Booking")}, {assoc("Booking", Multiplicity::one(), "Date", Multiplicity::one())}).model;
    p.expect(m.relationships.empty() && m.classes[0].attributes.size() == 1 &&
                 m.classes[0].attributes[0].name == "date" && m.classes[0].attributes[0].type_name == "Date",
             "attribute conversion");

    m = assemble({cls("Student"), cls("Teacher")}, {inh("Student", "User"), inh("Teacher", "User")}).model;
    p.expect(m.find_class("User") != nullptr && m.relationships.size() == 2, "multi-child parent append");

    m = assemble({cls("Student")}, {inh("Student", "User")}).model;
    p.expect(m.find_class("User") == nullptr && m.relationships.empty(), "single-child drop");

    const double secs = seconds_since(t0);
    p.expect(secs < kRefineryBudgetSeconds, "took " + fmt(secs) + " s");
    return p.done(std::to_string(kFuzzInputs) + " fuzz inputs and 5 rule cases in " + fmt(secs) + " s");
}

Outcome metrics() {
    Probe p;
    std::mt19937 rng(12);
    for (int i = 0; i < kMetricTriples; ++i) {
        const int tp = roll(rng, 1, 60), fp = roll(rng, 0, 60), fn = roll(rng, 0, 60);
        const auto m = metrics_from_counts(tp, fp, fn);
        p.expect(std::abs(m.precision - static_cast<double>(tp) / (tp + fp)) <= kMetricsTolerance, "precision");
        p.expect(std::abs(m.recall - static_cast<double>(tp) / (tp + fn)) <= kMetricsTolerance, "recall");
        p.expect(std::abs(m.f1 - 2.0 * tp / (2.0 * tp + fp + fn)) <= kMetricsTolerance, "f1");
    }
    const auto zero = metrics_from_counts(0, 4, 3);
    p.expect(zero.precision == 0 && zero.recall == 0 && zero.f1 == 0, "TP=0 convention");
    std::mt19937 models(13);
    for (int i = 0; i < kSelfMatchModels; ++i) {
        const auto m = random_model(models);
        const auto r = evaluate(m, m);
        for (const auto* c : categories(r))
            p.expect(c->fp == 0 && c->fn == 0 && (c->tp == 0 || c->f1 == 1.0), "self-match not perfect");
    }
    return p.done(std::to_string(kMetricTriples) + " triples within 1e-12, " + std::to_string(kSelfMatchModels) +
                  " self-matches");
}

Outcome matching() {
    Probe p;
    std::mt19937 rng(77);
    const ModelShape small{6, 0, 6, 6, 6};
    int checked = 0;
    while (checked < kMatchingPairs && p.ok) {
        const auto oracle = random_model(rng, small);
        const auto gen = perturb(rng, oracle);
        if (!gen) continue;
        ++checked;
        const auto rep = match_models(*gen, oracle);
        std::vector<std::string> gn, on;
        for (const auto& c : gen->classes) gn.push_back(c.name);
        for (const auto& c : oracle.classes) on.push_back(c.name);
        p.expect(static_cast<int>(rep.classes.pairs.size()) ==
                     brute_force_matching(gn.size(), on.size(),
                                          [&](std::size_t g, std::size_t o) { return names_pair(gn[g], on[o]); }),
                 "class matching not maximum");
        std::map<std::string, std::string> pair;
        int attr_max = 0;
        for (const auto& cp : rep.classes.pairs) {
            pair[cp.generated] = cp.oracle;
            const auto& ga = gen->find_class(cp.generated)->attributes;
            const auto& oa = oracle.find_class(cp.oracle)->attributes;
            attr_max += brute_force_matching(ga.size(), oa.size(), [&](std::size_t g, std::size_t o) {
                return names_pair(ga[g].name, oa[o].name);
            });
        }
        p.expect(static_cast<int>(rep.attributes.pairs.size()) == attr_max, "attribute matching not maximum");
        p.expect(static_cast<int>(rep.inheritances.pairs.size()) == exhaustive_rel_tp(*gen, oracle, pair, true),
                 "inheritance matching not maximum");
        p.expect(static_cast<int>(rep.associations.pairs.size()) == exhaustive_rel_tp(*gen, oracle, pair, false),
                 "association matching not maximum");

        auto reversed = *gen;
        std::set<std::tuple<int, std::string, std::string>> keys;
        bool clash = false;
        for (auto& r : reversed.relationships) {
            if (r.kind != RelKind::Inheritance) {
                std::swap(r.source, r.target);
                std::swap(r.source_mult, r.target_mult);
            }
            clash |= !keys.insert({static_cast<int>(r.kind), r.source, r.target}).second;
        }
        if (!clash) p.expect(evaluate(reversed, oracle) == evaluate(*gen, oracle), "reverse-association invariance");
    }
    p.expect(partial_name_match("Bus", "BusVehicle") && partial_name_match("Schedule", "DriverSchedule") &&
                 !names_pair("Route", "Driver"),
             "partial name examples");
    return p.done(std::to_string(checked) + " pairs equal to exhaustive maximum");
}

Outcome end_to_end() {
    Probe p;
    const auto dir = data_dir() / "minilibrary";
    const auto store = TranscriptStore::open((dir / "transcripts.jsonl").string());
    const auto description = read_text_file(dir / "description.txt");
    std::vector<std::string> exports;
    RunArtifacts art;
    for (int i = 0; i < 2; ++i) {
        ReplayProvider replay(store);
        art = run(description, PipelineConfig{}, replay);
        exports.push_back(export_canonical(art.model));
    }
    p.expect(exports[0] == exports[1], "replays differ");
    p.expect(exports[0] == read_text_file(dir / "expected.model.json"), "replay differs from expected model");

    const std::map<TaskKind, double> want = {{TaskKind::ClassTurn1, 0.4},
                                             {TaskKind::ClassTurn2, 0.4},
                                             {TaskKind::AssocAgg, 0.9},
                                             {TaskKind::Inheritance, 0.8}};
    const TranscriptRecord* assoc_rec = nullptr;
    const TranscriptRecord* inherit_rec = nullptr;
    for (const auto& r : art.transcripts) {
        p.expect(r.params.task.has_value(), "transcript without task");
        if (!r.params.task) continue;
        auto it = want.find(*r.params.task);
        p.expect(it != want.end() && it->second == r.params.temperature,
                 "temperature " + temperature_key(r.params.temperature) + " on " + std::string(to_string(*r.params.task)));
        if (*r.params.task == TaskKind::AssocAgg) assoc_rec = &r;
        if (*r.params.task == TaskKind::Inheritance) inherit_rec = &r;
    }
    p.expect(assoc_rec && inherit_rec, "missing relationship transcripts");
    if (assoc_rec && inherit_rec) {
        for (const auto* r : {assoc_rec, inherit_rec})
            for (const auto& m : r->request) p.expect(m.role != Role::Assistant, "relationship request carries history");
        for (const auto& m : inherit_rec->request)
            p.expect(m.content.find(assoc_rec->response) == std::string::npos, "inheritance request sees association answer");
        for (const auto& m : assoc_rec->request)
            p.expect(m.content.find(inherit_rec->response) == std::string::npos, "association request sees inheritance answer");
    }
    return p.done("2 replays byte-identical, temperatures 0.4/0.9/0.8, independent SPLIT requests");
}

Outcome harness_shape() {
    Probe p;
    std::ostringstream out, err;
    const auto toy = data_dir() / "toy";
    int code = run_cli({"eval", "--batch", (toy / "dataset").string(), "--generated", (toy / "generated").string()}, out,
                       err);
    p.expect(code == 0, "eval --batch exit " + std::to_string(code) + ": " + err.str());
    std::vector<std::string> rows;
    {
        std::istringstream in(out.str());
        for (std::string l; std::getline(in, l);) rows.push_back(l);
    }
    p.expect(rows.size() == 5, "eval table has " + std::to_string(rows.size()) + " lines");
    if (rows.size() == 5) {
        for (const char* c : {"class", "attribute", "inheritance", "association"})
            for (const char* m : {" P", " R", " F1"})
                p.expect(rows[0].find(std::string(c) + m) != std::string::npos, std::string("missing column ") + c + m);
        p.expect(rows[2].rfind("| hotel |", 0) == 0 && rows[3].rfind("| shop |", 0) == 0 &&
                     rows[4].rfind("| mean | 2 |", 0) == 0,
                 "per-system and mean rows");
        for (std::size_t i = 2; i < 5; ++i)
            p.expect(std::count(rows[i].begin(), rows[i].end(), '|') == 15, "row " + std::to_string(i) + " width");
    }

    TempDir tmp("acceptance");
    const auto ds = tmp / "dataset";
    write_text(ds / "minilibrary" / "description.txt", read_text_file(data_dir() / "minilibrary" / "description.txt"));
    write_text(ds / "minilibrary" / "oracle.model.json", read_text_file(data_dir() / "minilibrary" / "oracle.model.json"));
    write_text(tmp / "constant.txt",
               "class Member { name: String }\nclass Book { title: String }\nclass StudentMember { }\n"
               "1 Member associates 0..* Book\nStudentMember extends Member\n");
    std::ostringstream sout, serr;
    code = run_cli({"--provider", "stub", "--stub", (tmp / "constant.txt").string(), "sweep", "--dataset", ds.string(),
                    "--json", (tmp / "sweep.json").string()},
                   sout, serr);
    p.expect(code == 0, "sweep exit " + std::to_string(code) + ": " + serr.str());
    if (code == 0) {
        const auto j = nlohmann::json::parse(read_text_file(tmp / "sweep.json"));
        std::map<std::string, std::vector<double>> f1;
        for (const auto& pt : j["points"]) f1[pt["task"].get<std::string>()].push_back(pt["f1"].get<double>());
        for (const char* task : {"class", "assoc", "inherit"}) {
            const auto& v = f1[task];
            p.expect(v.size() == 10, std::string(task) + " has " + std::to_string(v.size()) + " points");
            p.expect(!v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }),
                     std::string(task) + " points differ under a constant stub");
            p.expect(sout.str().find(std::string("best ") + task + " temperature: 0.1") != std::string::npos,
                     std::string("tie-break for ") + task);
        }
    }
    return p.done("batch table with 2 systems + mean, sweep 3 x 10 points, ties at 0.1");
}

Outcome live_smoke() {
    LiveConfig live;
    apply_env(live);
    if (live.api_key.empty()) return {Verdict::Skip, "DOMODEL_API_KEY not set"};
    Probe p;
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = data_dir() / "minilibrary";
    const auto description = read_text_file(dir / "description.txt");
    const auto oracle = import_canonical(read_text_file(dir / "oracle.model.json"));
    LiveProvider provider(live);
    for (auto mode : {OverallMode::Decomposed, OverallMode::BaselineZeroShot}) {
        PipelineConfig cfg;
        cfg.model_name = live.model_name;
        cfg.overall_mode = mode;
        try {
            auto art = run(description, cfg, provider);
            auto m = evaluate(art.model, oracle);
            p.expect(validate_model(art.model).empty(), std::string(to_string(mode)) + " model not well-formed");
            std::cout << "  " << to_string(mode) << ": class F1 " << fmt(m.classes.f1, 3) << ", association F1 "
                      << fmt(m.association.f1, 3) << "\n";
        } catch (const std::exception& e) {
            p.expect(false, std::string(to_string(mode)) + ": " + e.what());
        }
    }
    const double secs = seconds_since(t0);
    p.expect(secs < kLiveBudgetSeconds, "took " + fmt(secs, 0) + " s");
    return p.done("decomposed and baseline runs scored in " + fmt(secs, 0) + " s");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
        {"parser-variants", parser_variants}, {"refinery-soundness", refinery},
        {"metrics-arithmetic", metrics},      {"matching-oracle", matching},
        {"deterministic-e2e", end_to_end},    {"harness-shape", harness_shape},
        {"live-smoke", live_smoke},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::cout << tag << " " << name << ": " << o.detail << std::endl;
        failed += o.verdict == Verdict::Fail;
    }
    return failed ? 1 : 0;
}
