#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "domodel/domodel.hpp"

#ifndef DOMODEL_TEST_DATA
#define DOMODEL_TEST_DATA "tests/data"
#endif

namespace testsupport {

using namespace domodel;

inline std::filesystem::path data_dir() { return DOMODEL_TEST_DATA; }

inline std::string slurp(const std::filesystem::path& p) { return read_text_file(p); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("domodel-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

// --- random well-formed models ----------------------------------------------------

inline const std::vector<std::string>& nouns() {
    static const std::vector<std::string> v = {
        "Account", "Address", "Book", "Booking", "Bus",     "Customer", "Driver",  "Hotel",
        "Invoice", "Lesson",  "Member", "Order", "Payment", "Player",   "Position", "Room",
        "Route",   "Schedule", "Student", "Team", "Ticket", "Traveller", "Vehicle", "Lab",
        "Course",  "Station", "Menu",    "Item",  "Review", "Tutor",    "Session", "Game"};
    return v;
}

inline const std::vector<std::string>& attr_words() {
    static const std::vector<std::string> v = {"name", "title", "date", "total", "rating", "start",
                                               "email", "number", "count", "price", "level", "code",
                                               "end", "phone", "status", "score"};
    return v;
}

inline const std::vector<std::string>& literal_words() {
    static const std::vector<std::string> v = {"single", "double", "open", "closed", "CASH", "CARD",
                                               "IN_PROGRESS", "pending", "DONE", "gold", "silver", "lowCost"};
    return v;
}

inline const std::vector<Multiplicity>& mults() {
    static const std::vector<Multiplicity> v = {Multiplicity::one(), {0, 1}, {1, std::nullopt},
                                                Multiplicity::many(), {2, 5}, {3, 3}};
    return v;
}

template <class T>
const T& pick(std::mt19937& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline int roll(std::mt19937& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct ModelShape {
    int max_classes = 6;
    int max_enums = 2;
    int max_attrs = 4;
    int max_assocs = 6;
    int max_inherits = 4;
};

/// A random model that passes validate_model.
inline DomainModel random_model(std::mt19937& rng, const ModelShape& shape = {}) {
    DomainModel m;
    std::set<std::string> used;
    auto fresh_type_name = [&] {
        for (;;) {
            std::string n = pick(rng, nouns());
            if (roll(rng, 0, 2) == 0) n += pick(rng, nouns());
            if (used.insert(n).second) return n;
        }
    };
    const int n_enums = roll(rng, 0, shape.max_enums);
    for (int i = 0; i < n_enums; ++i) {
        EnumDef e;
        e.name = fresh_type_name();
        std::set<std::string> lits;
        const int n = roll(rng, 1, 4);
        while (static_cast<int>(lits.size()) < n) lits.insert(pick(rng, literal_words()));
        e.literals.assign(lits.begin(), lits.end());
        std::shuffle(e.literals.begin(), e.literals.end(), rng);
        m.enums.push_back(std::move(e));
    }
    const int n_classes = roll(rng, 1, shape.max_classes);
    for (int i = 0; i < n_classes; ++i) {
        ClassDef c;
        c.name = fresh_type_name();
        std::set<std::string> names;
        const int n = roll(rng, 0, shape.max_attrs);
        for (int k = 0; k < n; ++k) {
            std::string a = pick(rng, attr_words());
            if (roll(rng, 0, 2) == 0) a += to_upper_camel(pick(rng, attr_words()));
            if (!names.insert(a).second) continue;
            std::string type;
            if (!m.enums.empty() && roll(rng, 0, 3) == 0) type = pick(rng, m.enums).name;
            else type = std::string(kDataTypes[static_cast<std::size_t>(roll(rng, 0, 4))]);
            c.attributes.push_back({a, type});
        }
        m.classes.push_back(std::move(c));
    }
    std::set<std::tuple<int, std::string, std::string>> rels;
    const int n_assoc = roll(rng, 0, shape.max_assocs);
    for (int i = 0; i < n_assoc; ++i) {
        RelationshipDef r;
        r.kind = roll(rng, 0, 2) == 0 ? RelKind::Aggregation : RelKind::Association;
        r.source = pick(rng, m.classes).name;
        r.target = pick(rng, m.classes).name;
        if (!rels.insert({static_cast<int>(r.kind), r.source, r.target}).second) continue;
        r.source_mult = pick(rng, mults());
        r.target_mult = pick(rng, mults());
        r.name = default_relationship_name(r.source, r.target);
        m.relationships.push_back(std::move(r));
    }
    if (m.classes.size() >= 2) {
        // Parent rank below child rank keeps the hierarchy acyclic.
        std::vector<std::size_t> order(m.classes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const int n_inh = roll(rng, 0, shape.max_inherits);
        for (int i = 0; i < n_inh; ++i) {
            auto a = static_cast<std::size_t>(roll(rng, 0, static_cast<int>(order.size()) - 1));
            auto b = static_cast<std::size_t>(roll(rng, 0, static_cast<int>(order.size()) - 1));
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            RelationshipDef r;
            r.kind = RelKind::Inheritance;
            r.source = m.classes[order[b]].name;
            r.target = m.classes[order[a]].name;
            if (!rels.insert({static_cast<int>(r.kind), r.source, r.target}).second) continue;
            r.name = default_relationship_name(r.source, r.target);
            m.relationships.push_back(std::move(r));
        }
    }
    return m;
}

// --- exhaustive matching oracle ---------------------------------------------------

/// Largest number of disjoint pairs, by trying every assignment.
inline int brute_force_matching(std::size_t n_gen, std::size_t n_oracle,
                                const std::function<bool(std::size_t, std::size_t)>& edge) {
    std::vector<char> used(n_oracle, 0);
    std::function<int(std::size_t)> go = [&](std::size_t g) -> int {
        if (g == n_gen) return 0;
        int best = go(g + 1);
        for (std::size_t o = 0; o < n_oracle; ++o) {
            if (used[o] || !edge(g, o)) continue;
            used[o] = 1;
            best = std::max(best, 1 + go(g + 1));
            used[o] = 0;
        }
        return best;
    };
    return go(0);
}

inline bool names_pair(const std::string& a, const std::string& b) {
    return similar_names(a, b) || partial_name_match(a, b);
}


// --- parsed elements and fuzz inputs ---------------------------------------------

inline ParsedElement cls(std::string name, std::vector<ParsedAttribute> attrs = {}) {
    ParsedElement e{ClassLine{std::move(name), std::move(attrs)}, {}};
    e.raw_line = emit_line(e);
    return e;
}

inline ParsedElement en(std::string name, std::vector<std::string> lits) {
    ParsedElement e{EnumLine{std::move(name), std::move(lits)}, {}};
    e.raw_line = emit_line(e);
    return e;
}

inline ParsedElement assoc(std::string s, std::optional<Multiplicity> sm, std::string t, std::optional<Multiplicity> tm,
                    RelKind k = RelKind::Association) {
    ParsedElement e{AssocLine{std::move(s), sm, std::move(t), tm, k}, {}};
    e.raw_line = emit_line(e);
    return e;
}

inline ParsedElement inh(std::string c, std::string p) {
    ParsedElement e{InheritLine{std::move(c), std::move(p)}, {}};
    e.raw_line = emit_line(e);
    return e;
}


inline std::string messy_name(std::mt19937& rng, bool upper) {
    static const std::vector<std::string> pool = {"hotel", "Hotel", "bus driver", "BusDriver", "room_type", "Room",
                                                  "String", "int", "date", "Date", "user", "User", "  ", "x-y",
                                                  "BTMS", "2fast", "ticket", "Ticket", "Person", "route", "Status"};
    std::string s = pick(rng, pool);
    if (upper && roll(rng, 0, 4) == 0) s += " " + pick(rng, pool);
    return s;
}

inline std::optional<Multiplicity> messy_mult(std::mt19937& rng) {
    switch (roll(rng, 0, 5)) {
        case 0: return std::nullopt;
        case 1: return Multiplicity{5, 2};
        case 2: return Multiplicity{0, 0};
        default: return pick(rng, mults());
    }
}

inline std::pair<std::vector<ParsedElement>, std::vector<ParsedElement>> fuzz_input(std::mt19937& rng) {
    std::vector<ParsedElement> block, rels;
    const int n = roll(rng, 0, 8);
    for (int i = 0; i < n; ++i) {
        if (roll(rng, 0, 4) == 0) {
            std::vector<std::string> lits;
            const int k = roll(rng, 0, 3);
            for (int j = 0; j < k; ++j) lits.push_back(pick(rng, literal_words()) + (roll(rng, 0, 3) ? "" : " x"));
            block.push_back(en(messy_name(rng, true), lits));
        } else {
            std::vector<ParsedAttribute> attrs;
            const int k = roll(rng, 0, 4);
            for (int j = 0; j < k; ++j) {
                std::optional<std::string> type;
                if (roll(rng, 0, 3)) type = messy_name(rng, true);
                attrs.push_back({messy_name(rng, false), type});
            }
            block.push_back(cls(messy_name(rng, true), attrs));
        }
    }
    const int r = roll(rng, 0, 8);
    for (int i = 0; i < r; ++i) {
        if (roll(rng, 0, 2) == 0) {
            rels.push_back(inh(messy_name(rng, true), messy_name(rng, true)));
        } else {
            rels.push_back(assoc(messy_name(rng, true), messy_mult(rng), messy_name(rng, true), messy_mult(rng),
                                 roll(rng, 0, 1) ? RelKind::Association : RelKind::Aggregation));
        }
    }
    return {block, rels};
}

// --- perturbed model pairs ------------------------------------------------------

inline RelationshipDef make_rel(RelKind k, std::string s, std::string t) {
    RelationshipDef r;
    r.kind = k;
    r.source = std::move(s);
    r.target = std::move(t);
    if (k != RelKind::Inheritance) r.source_mult = r.target_mult = Multiplicity::one();
    r.name = default_relationship_name(r.source, r.target);
    return r;
}

inline std::string variant_of(std::mt19937& rng, const std::string& name) {
    switch (roll(rng, 0, 4)) {
        case 0: return name;
        case 1: return name + pick(rng, nouns());
        case 2: return pick(rng, nouns()) + name;
        case 3: {
            std::string s = name;
            s.insert(s.begin() + roll(rng, 1, static_cast<int>(s.size()) - 1), s[static_cast<std::size_t>(roll(rng, 1, static_cast<int>(s.size()) - 1))]);
            return s;
        }
        default: return pick(rng, nouns());
    }
}

/// A model built from `oracle` by renaming, dropping and adding elements.
inline std::optional<DomainModel> perturb(std::mt19937& rng, const DomainModel& oracle) {
    DomainModel g;
    std::map<std::string, std::string> rename;
    std::set<std::string> used;
    for (const auto& c : oracle.classes) {
        if (roll(rng, 0, 5) == 0) continue;
        auto n = variant_of(rng, c.name);
        if (!used.insert(n).second) continue;
        rename[c.name] = n;
        ClassDef nc{n, {}, {}, {}};
        std::set<std::string> an;
        for (const auto& a : c.attributes) {
            if (roll(rng, 0, 4) == 0) continue;
            auto x = roll(rng, 0, 2) ? a.name : to_lower_camel(variant_of(rng, to_upper_camel(a.name)));
            if (an.insert(x).second) nc.attributes.push_back({x, "String"});
        }
        if (roll(rng, 0, 1)) {
            auto x = pick(rng, attr_words());
            if (an.insert(x).second) nc.attributes.push_back({x, "Integer"});
        }
        g.classes.push_back(std::move(nc));
    }
    for (int i = roll(rng, 0, 2); i > 0; --i) {
        auto n = pick(rng, nouns());
        if (used.insert(n).second) g.classes.push_back({n, {}, {}, {}});
    }
    if (g.classes.empty()) return std::nullopt;
    std::set<std::tuple<int, std::string, std::string>> seen;
    for (const auto& r : oracle.relationships) {
        if (!rename.count(r.source) || !rename.count(r.target) || roll(rng, 0, 4) == 0) continue;
        auto nr = r;
        nr.source = rename[r.source];
        nr.target = rename[r.target];
        if (nr.kind != RelKind::Inheritance && roll(rng, 0, 1)) std::swap(nr.source, nr.target);
        nr.name = default_relationship_name(nr.source, nr.target);
        if (seen.insert({static_cast<int>(nr.kind), nr.source, nr.target}).second) g.relationships.push_back(nr);
    }
    for (int i = roll(rng, 0, 2); i > 0; --i) {
        auto r = make_rel(RelKind::Association, pick(rng, g.classes).name, pick(rng, g.classes).name);
        if (seen.insert({0, r.source, r.target}).second) g.relationships.push_back(r);
    }
    if (!validate_model(g).empty()) return std::nullopt;
    return g;
}

inline int exhaustive_rel_tp(const DomainModel& gen, const DomainModel& oracle, const std::map<std::string, std::string>& pair,
                      bool inherit) {
    std::vector<const RelationshipDef*> gr, orr;
    for (const auto& r : gen.relationships)
        if ((r.kind == RelKind::Inheritance) == inherit) gr.push_back(&r);
    for (const auto& r : oracle.relationships)
        if ((r.kind == RelKind::Inheritance) == inherit) orr.push_back(&r);
    return brute_force_matching(gr.size(), orr.size(), [&](std::size_t g, std::size_t o) {
        auto s = pair.find(gr[g]->source), t = pair.find(gr[g]->target);
        if (s == pair.end() || t == pair.end()) return false;
        const bool fwd = orr[o]->source == s->second && orr[o]->target == t->second;
        const bool bwd = orr[o]->source == t->second && orr[o]->target == s->second;
        return fwd || (!inherit && bwd);
    });
}

}  // namespace testsupport
