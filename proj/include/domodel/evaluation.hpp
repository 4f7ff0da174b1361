#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "domodel/error.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/naming.hpp"

namespace domodel {

inline constexpr double kSimilarityThreshold = 0.9;

/// Dice coefficient over the multisets of lowercase alphanumeric characters.
inline double name_similarity(std::string_view a, std::string_view b) {
    auto counts = [](std::string_view s) {
        std::map<char, int> m;
        int n = 0;
        for (char c : s) {
            if (!naming_detail::is_word(c)) continue;
            ++m[naming_detail::down(c)];
            ++n;
        }
        return std::pair(m, n);
    };
    const auto [ca, na] = counts(a);
    const auto [cb, nb] = counts(b);
    if (na + nb == 0) return 1.0;
    int common = 0;
    for (const auto& [c, k] : ca)
        if (auto it = cb.find(c); it != cb.end()) common += std::min(k, it->second);
    return 2.0 * common / (na + nb);
}

inline bool similar_names(std::string_view a, std::string_view b) {
    return name_similarity(a, b) > kSimilarityThreshold;
}

/// One name's lowercase camel tokens form a non-empty sub-multiset of the other's.
inline bool partial_name_match(std::string_view a, std::string_view b) {
    auto ta = lowercase_tokens(a);
    auto tb = lowercase_tokens(b);
    if (ta.empty() || tb.empty()) return false;
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    return std::includes(ta.begin(), ta.end(), tb.begin(), tb.end()) ||
           std::includes(tb.begin(), tb.end(), ta.begin(), ta.end());
}

struct MatchPair {
    std::string generated;
    std::string oracle;
    double similarity = 0.0;
    bool low_confidence = false;  // paired by token containment only
};

struct CategoryMatch {
    std::vector<MatchPair> pairs;
    std::vector<std::string> unmatched_generated;
    std::vector<std::string> unmatched_oracle;
};

struct MatchReport {
    CategoryMatch classes;
    CategoryMatch attributes;
    CategoryMatch inheritances;
    CategoryMatch associations;
};

struct MatchOptions {
    bool include_enums = true;  // enumerations scored as classes
};

struct Candidate {
    std::size_t gen;
    std::size_t oracle;
    double weight;
};

/// Maximum-cardinality bipartite matching. Seeds greedily by descending
/// weight (ties by index), then augments until no augmenting path remains.
/// Returns match_of_gen[i] = oracle index or -1.
inline std::vector<int> max_matching(std::size_t n_gen, std::size_t n_oracle,
                                     std::vector<Candidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tuple(-a.weight, a.gen, a.oracle) < std::tuple(-b.weight, b.gen, b.oracle);
    });
    std::vector<int> gen_to(n_gen, -1), oracle_to(n_oracle, -1);
    for (const auto& c : candidates)
        if (gen_to[c.gen] < 0 && oracle_to[c.oracle] < 0) {
            gen_to[c.gen] = static_cast<int>(c.oracle);
            oracle_to[c.oracle] = static_cast<int>(c.gen);
        }
    std::vector<std::vector<std::size_t>> adj(n_gen);
    for (const auto& c : candidates) adj[c.gen].push_back(c.oracle);

    std::vector<char> seen;
    std::function<bool(std::size_t)> augment = [&](std::size_t g) {
        for (auto o : adj[g]) {
            if (seen[o]) continue;
            seen[o] = 1;
            if (oracle_to[o] < 0 || augment(static_cast<std::size_t>(oracle_to[o]))) {
                gen_to[g] = static_cast<int>(o);
                oracle_to[o] = static_cast<int>(g);
                return true;
            }
        }
        return false;
    };
    for (std::size_t g = 0; g < n_gen; ++g) {
        if (gen_to[g] >= 0) continue;
        seen.assign(n_oracle, 0);
        augment(g);
    }
    return gen_to;
}

namespace eval_detail {

struct TypeElement {
    std::string name;
    const ClassDef* cls = nullptr;  // null for enums
};

inline std::vector<TypeElement> type_elements(const DomainModel& m, const MatchOptions& opt) {
    std::vector<TypeElement> out;
    for (const auto& c : m.classes) out.push_back({c.name, &c});
    if (opt.include_enums)
        for (const auto& e : m.enums) out.push_back({e.name, nullptr});
    return out;
}

inline CategoryMatch collect(const std::vector<std::string>& gen_refs,
                             const std::vector<std::string>& oracle_refs,
                             const std::vector<int>& gen_to,
                             const std::function<MatchPair(std::size_t, std::size_t)>& make_pair) {
    CategoryMatch out;
    std::vector<char> oracle_used(oracle_refs.size(), 0);
    for (std::size_t g = 0; g < gen_refs.size(); ++g) {
        if (gen_to[g] < 0) {
            out.unmatched_generated.push_back(gen_refs[g]);
        } else {
            out.pairs.push_back(make_pair(g, static_cast<std::size_t>(gen_to[g])));
            oracle_used[static_cast<std::size_t>(gen_to[g])] = 1;
        }
    }
    for (std::size_t o = 0; o < oracle_refs.size(); ++o)
        if (!oracle_used[o]) out.unmatched_oracle.push_back(oracle_refs[o]);
    return out;
}

/// Candidate pairs under the name rules: similarity above the threshold or
/// token containment. Names are visited in sorted order so ties break
/// lexicographically.
inline std::vector<Candidate> name_candidates(const std::vector<std::string>& gen,
                                              const std::vector<std::string>& oracle) {
    std::vector<std::size_t> gi(gen.size()), oi(oracle.size());
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = i;
    for (std::size_t i = 0; i < oi.size(); ++i) oi[i] = i;
    std::stable_sort(gi.begin(), gi.end(), [&](auto a, auto b) { return gen[a] < gen[b]; });
    std::stable_sort(oi.begin(), oi.end(), [&](auto a, auto b) { return oracle[a] < oracle[b]; });
    std::vector<Candidate> out;
    for (auto g : gi)
        for (auto o : oi) {
            const double s = name_similarity(gen[g], oracle[o]);
            if (s > kSimilarityThreshold || partial_name_match(gen[g], oracle[o])) out.push_back({g, o, s});
        }
    return out;
}

/// Re-maps candidate indices so that the greedy tie-break follows name order.
inline std::vector<int> match_names(const std::vector<std::string>& gen,
                                    const std::vector<std::string>& oracle) {
    auto cands = name_candidates(gen, oracle);
    // Rank of each index in sorted-name order, used as the tie-break key.
    std::vector<std::size_t> gi(gen.size()), oi(oracle.size()), grank(gen.size()), orank(oracle.size());
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = i;
    for (std::size_t i = 0; i < oi.size(); ++i) oi[i] = i;
    std::stable_sort(gi.begin(), gi.end(), [&](auto a, auto b) { return gen[a] < gen[b]; });
    std::stable_sort(oi.begin(), oi.end(), [&](auto a, auto b) { return oracle[a] < oracle[b]; });
    for (std::size_t r = 0; r < gi.size(); ++r) grank[gi[r]] = r;
    for (std::size_t r = 0; r < oi.size(); ++r) orank[oi[r]] = r;
    for (auto& c : cands) {
        c.gen = grank[c.gen];
        c.oracle = orank[c.oracle];
    }
    auto ranked = max_matching(gen.size(), oracle.size(), std::move(cands));
    std::vector<int> out(gen.size(), -1);
    for (std::size_t r = 0; r < ranked.size(); ++r)
        if (ranked[r] >= 0) out[gi[r]] = static_cast<int>(oi[static_cast<std::size_t>(ranked[r])]);
    return out;
}

inline std::string inherit_ref(const RelationshipDef& r) { return r.source + " extends " + r.target; }

inline std::string assoc_ref(const RelationshipDef& r) {
    return r.source + (r.kind == RelKind::Aggregation ? " contains " : " associates ") + r.target;
}

}  // namespace eval_detail

/// Pairs generated with oracle elements per category. Each element is in at
/// most one pair; per category the number of pairs is maximal.
inline MatchReport match_models(const DomainModel& gen, const DomainModel& oracle,
                                const MatchOptions& opt = {}) {
    using namespace eval_detail;
    MatchReport report;

    const auto gt = type_elements(gen, opt);
    const auto ot = type_elements(oracle, opt);
    std::vector<std::string> gnames, onames;
    for (const auto& t : gt) gnames.push_back(t.name);
    for (const auto& t : ot) onames.push_back(t.name);
    const auto class_to = match_names(gnames, onames);
    report.classes = collect(gnames, onames, class_to, [&](std::size_t g, std::size_t o) {
        const double s = name_similarity(gnames[g], onames[o]);
        return MatchPair{gnames[g], onames[o], s, !(s > kSimilarityThreshold)};
    });
    std::map<std::string, std::string> paired;  // generated type name -> oracle type name
    for (const auto& p : report.classes.pairs) paired[p.generated] = p.oracle;

    // Attributes, within paired classes only.
    std::map<std::string, const ClassDef*> oracle_class;
    for (const auto& t : ot)
        if (t.cls) oracle_class[t.name] = t.cls;
    std::set<std::string> oracle_attr_used;
    for (const auto& t : gt) {
        if (!t.cls) continue;
        std::vector<std::string> ga;
        for (const auto& a : t.cls->attributes) ga.push_back(a.name);
        const ClassDef* oc = nullptr;
        if (auto it = paired.find(t.name); it != paired.end())
            if (auto jt = oracle_class.find(it->second); jt != oracle_class.end()) oc = jt->second;
        if (!oc) {
            for (const auto& a : ga) report.attributes.unmatched_generated.push_back(t.name + "." + a);
            continue;
        }
        std::vector<std::string> oa;
        for (const auto& a : oc->attributes) oa.push_back(a.name);
        auto to = match_names(ga, oa);
        for (std::size_t g = 0; g < ga.size(); ++g) {
            if (to[g] < 0) {
                report.attributes.unmatched_generated.push_back(t.name + "." + ga[g]);
                continue;
            }
            const auto& o = oa[static_cast<std::size_t>(to[g])];
            const double s = name_similarity(ga[g], o);
            report.attributes.pairs.push_back({t.name + "." + ga[g], oc->name + "." + o, s, !(s > kSimilarityThreshold)});
            oracle_attr_used.insert(oc->name + "." + o);
        }
    }
    for (const auto& c : oracle.classes)
        for (const auto& a : c.attributes)
            if (!oracle_attr_used.count(c.name + "." + a.name))
                report.attributes.unmatched_oracle.push_back(c.name + "." + a.name);

    // Relationships through the class pairing.
    auto pair_of = [&](const std::string& g) -> std::string {
        auto it = paired.find(g);
        return it == paired.end() ? std::string() : it->second;
    };
    auto relationships = [](const DomainModel& m, bool inherit) {
        std::vector<const RelationshipDef*> out;
        for (const auto& r : m.relationships)
            if ((r.kind == RelKind::Inheritance) == inherit) out.push_back(&r);
        return out;
    };
    for (bool inherit : {true, false}) {
        const auto gr = relationships(gen, inherit);
        const auto orr = relationships(oracle, inherit);
        std::vector<Candidate> cands;
        for (std::size_t g = 0; g < gr.size(); ++g) {
            const auto s = pair_of(gr[g]->source);
            const auto t = pair_of(gr[g]->target);
            if (s.empty() || t.empty()) continue;
            for (std::size_t o = 0; o < orr.size(); ++o) {
                const bool forward = orr[o]->source == s && orr[o]->target == t;
                const bool backward = orr[o]->source == t && orr[o]->target == s;
                if (forward || (!inherit && backward)) cands.push_back({g, o, forward ? 1.0 : 0.5});
            }
        }
        auto to = max_matching(gr.size(), orr.size(), std::move(cands));
        auto ref = inherit ? inherit_ref : assoc_ref;
        std::vector<std::string> grefs, orefs;
        for (const auto* r : gr) grefs.push_back(ref(*r));
        for (const auto* r : orr) orefs.push_back(ref(*r));
        auto cat = collect(grefs, orefs, to, [&](std::size_t g, std::size_t o) {
            return MatchPair{grefs[g], orefs[o], 1.0, false};
        });
        (inherit ? report.inheritances : report.associations) = std::move(cat);
    }
    return report;
}

struct CategoryMetrics {
    double tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;

    friend bool operator==(const CategoryMetrics&, const CategoryMetrics&) = default;
};

/// Precision tp/(tp+fp), recall tp/(tp+fn), F1 their harmonic mean; all 0
/// when tp is 0.
inline CategoryMetrics metrics_from_counts(double tp, double fp, double fn) {
    CategoryMetrics m{tp, fp, fn, 0, 0, 0};
    if (tp > 0) {
        m.precision = tp / (tp + fp);
        m.recall = tp / (tp + fn);
        m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

struct MetricsReport {
    CategoryMetrics classes, attributes, inheritance, association;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline constexpr std::array<const char*, 4> kCategoryNames = {"class", "attribute", "inheritance",
                                                              "association"};

inline std::array<const CategoryMetrics*, 4> categories(const MetricsReport& r) {
    return {&r.classes, &r.attributes, &r.inheritance, &r.association};
}

inline std::array<CategoryMetrics*, 4> categories(MetricsReport& r) {
    return {&r.classes, &r.attributes, &r.inheritance, &r.association};
}

inline CategoryMetrics category_metrics(const CategoryMatch& m) {
    return metrics_from_counts(static_cast<double>(m.pairs.size()),
                               static_cast<double>(m.unmatched_generated.size()),
                               static_cast<double>(m.unmatched_oracle.size()));
}

inline MetricsReport compute_metrics(const MatchReport& r) {
    return {category_metrics(r.classes), category_metrics(r.attributes),
            category_metrics(r.inheritances), category_metrics(r.associations)};
}

inline MetricsReport evaluate(const DomainModel& gen, const DomainModel& oracle, const MatchOptions& opt = {}) {
    return compute_metrics(match_models(gen, oracle, opt));
}

/// Field-wise arithmetic mean. Throws EmptyInput.
inline MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw EmptyInput("cannot aggregate zero metrics reports");
    MetricsReport out;
    for (const auto& r : reports) {
        auto src = categories(r);
        auto dst = categories(out);
        for (std::size_t i = 0; i < 4; ++i) {
            dst[i]->tp += src[i]->tp;
            dst[i]->fp += src[i]->fp;
            dst[i]->fn += src[i]->fn;
            dst[i]->precision += src[i]->precision;
            dst[i]->recall += src[i]->recall;
            dst[i]->f1 += src[i]->f1;
        }
    }
    const double n = static_cast<double>(reports.size());
    for (auto* c : categories(out))
        for (double* v : {&c->tp, &c->fp, &c->fn, &c->precision, &c->recall, &c->f1}) *v /= n;
    return out;
}

inline nlohmann::json to_json(const CategoryMetrics& m) {
    return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn},
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    auto cats = categories(r);
    for (std::size_t i = 0; i < 4; ++i) j[kCategoryNames[i]] = to_json(*cats[i]);
    return j;
}

inline nlohmann::json to_json(const CategoryMatch& m) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs) {
        nlohmann::json j = {{"generated", p.generated}, {"oracle", p.oracle}, {"similarity", p.similarity}};
        if (p.low_confidence) j["flag"] = "LOW_CONFIDENCE";
        pairs.push_back(std::move(j));
    }
    return {{"pairs", pairs}, {"unmatched_generated", m.unmatched_generated},
            {"unmatched_oracle", m.unmatched_oracle}};
}

inline nlohmann::json to_json(const MatchReport& r) {
    return {{"class", to_json(r.classes)}, {"attribute", to_json(r.attributes)},
            {"inheritance", to_json(r.inheritances)}, {"association", to_json(r.associations)}};
}

}  // namespace domodel
