#include <gtest/gtest.h>

#include <chrono>

#include "support.hpp"

using namespace domodel;
using namespace testsupport;

namespace {

const RelationshipDef* find_rel(const DomainModel& m, RelKind k, const std::string& s, const std::string& t) {
    for (const auto& r : m.relationships)
        if (r.kind == k && r.source == s && r.target == t) return &r;
    return nullptr;
}

}  // namespace

TEST(RuleOne, NamingNormalized) {
    auto res = assemble({cls("bus driver", {{"Pick Up time", "Date"}})}, {});
    ASSERT_EQ(res.model.classes.size(), 1u);
    EXPECT_EQ(res.model.classes[0].name, "BusDriver");
    EXPECT_EQ(res.model.classes[0].attributes[0].name, "pickUpTime");
    EXPECT_EQ(res.fix_report.count(1), 2u);
}

TEST(RuleTwo, MissingTypeBecomesString) {
    auto res = assemble({cls("Hotel", {{"name", std::nullopt}})}, {});
    EXPECT_EQ(res.model.classes[0].attributes[0].type_name, "String");
    ASSERT_EQ(res.fix_report.count(2), 1u);
    EXPECT_EQ(res.fix_report.applied[0].after, "String");
}

TEST(RuleTwo, SynonymsAndEnumsAndClassTypes) {
    auto res = assemble({en("RoomType", {"single"}), cls("Hotel"),
                         cls("Room", {{"size", "int"}, {"kind", "RoomType"}, {"hotel", "Hotel"}, {"color", "Colour"}})},
                        {});
    const auto& a = res.model.find_class("Room")->attributes;
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0].type_name, "Integer");
    EXPECT_EQ(a[1].type_name, "RoomType");
    EXPECT_EQ(a[2].type_name, "String");
    EXPECT_EQ(a[3].type_name, "String");
    EXPECT_EQ(res.fix_report.count(2), 3u);
}

TEST(RuleThree, DataTypeEndBecomesAttribute) {
    auto res = assemble({cls("Booking")}, {assoc("Booking", Multiplicity::one(), "Date", Multiplicity::one())});
    EXPECT_TRUE(res.model.relationships.empty());
    const auto& a = res.model.find_class("Booking")->attributes;
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0], (AttributeDef{"date", "Date"}));
    EXPECT_EQ(res.fix_report.count(3), 1u);
}

TEST(RuleThree, EndsDecision) {
    const std::set<std::string> known = {"Booking", "Traveller", "Hotel"};
    auto to_attr = fix_association_ends({"Booking", Multiplicity::one(), "Date", Multiplicity::one(), RelKind::Association}, known);
    ASSERT_TRUE(std::holds_alternative<ToAttribute>(to_attr));
    EXPECT_EQ(std::get<ToAttribute>(to_attr).owner, "Booking");
    EXPECT_EQ(std::get<ToAttribute>(to_attr).attribute, (AttributeDef{"date", "Date"}));
    EXPECT_TRUE(std::holds_alternative<Keep>(
        fix_association_ends({"Traveller", std::nullopt, "Hotel", std::nullopt, RelKind::Association}, known)));
    EXPECT_TRUE(std::holds_alternative<Drop>(
        fix_association_ends({"Foo", std::nullopt, "Bar", std::nullopt, RelKind::Association}, known)));
    EXPECT_TRUE(std::holds_alternative<Drop>(
        fix_association_ends({"Hotel", std::nullopt, "Bar", std::nullopt, RelKind::Association}, known)));
}

TEST(RuleFour, MissingMultiplicityIsOne) {
    auto res = assemble({cls("Traveller"), cls("Hotel")}, {assoc("Traveller", std::nullopt, "Hotel", Multiplicity::many())});
    ASSERT_EQ(res.model.relationships.size(), 1u);
    EXPECT_EQ(res.model.relationships[0].source_mult, Multiplicity::one());
    EXPECT_EQ(res.model.relationships[0].target_mult, Multiplicity::many());
    EXPECT_EQ(res.fix_report.count(4), 1u);
}

TEST(RuleFive, ParentOfSeveralChildrenAppended) {
    auto res = assemble({cls("Admin"), cls("Customer")}, {inh("Admin", "User"), inh("Customer", "User")});
    ASSERT_NE(res.model.find_class("User"), nullptr);
    EXPECT_TRUE(res.model.find_class("User")->attributes.empty());
    EXPECT_TRUE(res.model.find_class("User")->provenance.raw_line.empty());
    EXPECT_NE(find_rel(res.model, RelKind::Inheritance, "Admin", "User"), nullptr);
    EXPECT_NE(find_rel(res.model, RelKind::Inheritance, "Customer", "User"), nullptr);
    bool appended = false;
    for (const auto& f : res.fix_report.applied) appended |= f.rule == 5 && f.after == kAppended;
    EXPECT_TRUE(appended);
}

TEST(RuleFive, SoleChildDropped) {
    auto res = assemble({cls("Driver")}, {inh("Driver", "Person")});
    EXPECT_EQ(res.model.find_class("Person"), nullptr);
    EXPECT_TRUE(res.model.relationships.empty());
    ASSERT_EQ(res.fix_report.count(5), 1u);
    EXPECT_EQ(res.fix_report.applied[0].after, kDropped);
}

TEST(RuleFive, KnownParentKept) {
    auto fix = fix_inheritance_ends({{"Driver", "Person"}}, {"Driver", "Person"});
    EXPECT_EQ(fix.kept.size(), 1u);
    EXPECT_TRUE(fix.appended_parents.empty());
    EXPECT_TRUE(fix.dropped.empty());
}

TEST(Dedupe, MergesAndCollapses) {
    auto res = assemble({cls("Hotel", {{"name", "String"}}), cls("Hotel", {{"stars", "Integer"}}), cls("Room")},
                        {assoc("Hotel", Multiplicity::one(), "Room", Multiplicity::many()),
                         assoc("Hotel", Multiplicity::one(), "Room", Multiplicity::many()),
                         assoc("Hotel", Multiplicity::one(), "Room", Multiplicity{1, std::nullopt})});
    ASSERT_EQ(res.model.classes.size(), 2u);
    ASSERT_EQ(res.model.find_class("Hotel")->attributes.size(), 2u);
    ASSERT_EQ(res.model.relationships.size(), 1u);
    EXPECT_EQ(res.model.relationships[0].target_mult, Multiplicity::many());
    bool noted = false;
    for (const auto& f : res.fix_report.applied) noted |= f.rule == 3 && !f.note.empty();
    EXPECT_TRUE(noted);
}

TEST(Cycles, LexicographicallyLastEdgeDropped) {
    auto res = assemble({cls("A"), cls("B"), cls("C")}, {inh("A", "B"), inh("B", "C"), inh("C", "A")});
    EXPECT_TRUE(validate_model(res.model).empty());
    EXPECT_EQ(res.model.relationships.size(), 2u);
    EXPECT_EQ(find_rel(res.model, RelKind::Inheritance, "C", "A"), nullptr);
}

TEST(Assemble, ProvenanceAndStatus) {
    AssembleContext ctx;
    ctx.run_id = "run-7";
    auto res = assemble({cls("Hotel")}, {}, ctx);
    EXPECT_EQ(res.model.classes[0].provenance.run_id, "run-7");
    EXPECT_EQ(res.model.classes[0].provenance.task, TaskKind::ClassTurn2);
    EXPECT_EQ(res.model.classes[0].provenance.raw_line, "class Hotel { }");
    EXPECT_EQ(res.model.classes[0].status, ReviewStatus::Proposed);
}

// --- fuzzing ---------------------------------------------------------------------

namespace {

DomainModel normalized(const DomainModel& m) { return canonical_order(without_provenance(m)); }

}  // namespace

TEST(RefineryFuzz, SoundAndIdempotent) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(4242);
    for (int i = 0; i < 1000; ++i) {
        auto [block, rels] = fuzz_input(rng);
        AssembleResult first;
        ASSERT_NO_THROW(first = assemble(block, rels)) << emit_lines(block) << emit_lines(rels);
        auto v = validate_model(first.model);
        ASSERT_TRUE(v.empty()) << v[0].description << "\n" << emit_lines(block) << emit_lines(rels);

        const auto lines = to_parsed_elements(first.model);
        auto second = assemble(lines.classes_block, lines.relationships);
        ASSERT_EQ(normalized(second.model), normalized(first.model))
            << emit_lines(block) << emit_lines(rels) << export_canonical(normalized(first.model))
            << export_canonical(normalized(second.model));
        EXPECT_TRUE(second.fix_report.empty());

        // Every element traces to an input line or to an APPENDED fix.
        std::set<std::string> raw;
        for (const auto& e : block) raw.insert(e.raw_line);
        for (const auto& e : rels) raw.insert(e.raw_line);
        std::set<std::string> appended;
        for (const auto& f : first.fix_report.applied)
            if (f.after == kAppended) appended.insert(f.element);
        for (const auto& c : first.model.classes) {
            if (c.provenance.raw_line.empty()) EXPECT_TRUE(appended.count("class " + c.name)) << c.name;
            else EXPECT_TRUE(raw.count(c.provenance.raw_line));
        }
        for (const auto& e : first.model.enums) EXPECT_TRUE(raw.count(e.provenance.raw_line));
        for (const auto& r : first.model.relationships) EXPECT_TRUE(raw.count(r.provenance.raw_line));
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(secs, 10.0);
}

TEST(RefineryFuzz, WellFormedModelsPassUnchanged) {
    std::mt19937 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto m = random_model(rng);
        auto lines = to_parsed_elements(m);
        auto res = assemble(lines.classes_block, lines.relationships);
        EXPECT_TRUE(res.fix_report.empty());
        EXPECT_EQ(normalized(res.model), normalized(m));
    }
}
