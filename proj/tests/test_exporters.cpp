#include <gtest/gtest.h>

#include "support.hpp"

using namespace domodel;
using namespace testsupport;

namespace {

DomainModel reviewed_model() {
    auto m = import_canonical(slurp(data_dir() / "minilibrary" / "oracle.model.json"));
    m.enums.push_back({"Genre", {"fiction", "science"}, {}, {}});
    m.find_class("Book")->attributes.push_back({"genre", "Genre"});
    return canonical_order(m);
}

}  // namespace

TEST(Canonical, RoundtripRandomModels) {
    std::mt19937 rng(8);
    for (int i = 0; i < 300; ++i) {
        auto m = random_model(rng);
        m.classes[0].status = ReviewStatus::Accepted;
        m.classes[0].provenance = {TaskKind::ClassSingleTurn, "r1", "class X { }"};
        const auto text = export_canonical(m);
        const auto back = import_canonical(text);
        EXPECT_EQ(back, canonical_order(m));
        EXPECT_EQ(export_canonical(back), text);
    }
}

TEST(Canonical, OrderIndependent) {
    std::mt19937 rng(9);
    for (int i = 0; i < 100; ++i) {
        auto m = random_model(rng);
        auto shuffled = m;
        std::shuffle(shuffled.classes.begin(), shuffled.classes.end(), rng);
        std::shuffle(shuffled.relationships.begin(), shuffled.relationships.end(), rng);
        EXPECT_EQ(export_canonical(m), export_canonical(shuffled));
    }
}

TEST(Canonical, ImportErrors) {
    EXPECT_THROW(import_canonical("{"), FormatError);
    EXPECT_THROW(import_canonical("[]"), SchemaError);
    EXPECT_THROW(import_canonical(R"({"classes": [], "enums": []})"), SchemaError);
    EXPECT_THROW(import_canonical(R"({"classes": [{"name": "A", "status": "MAYBE"}], "enums": [], "relationships": []})"),
                 SchemaError);
    EXPECT_THROW(import_canonical(R"({"classes": [{"name": "A"}], "enums": [],
        "relationships": [{"kind": "ASSOCIATION", "source": "A", "target": "B",
                           "source_multiplicity": "1", "target_multiplicity": "1"}]})"),
                 ValidationError);
    EXPECT_THROW(import_canonical(R"({"classes": [{"name": "A"}], "enums": [],
        "relationships": [{"kind": "ASSOCIATION", "source": "A", "target": "A", "source_multiplicity": "lots"}]})"),
                 SchemaError);
}

TEST(PlantUml, Shapes) {
    const auto text = to_plantuml(reviewed_model());
    EXPECT_EQ(text.rfind("@startuml\n", 0), 0u);
    EXPECT_NE(text.find("enum Genre {\n  fiction\n  science\n}\n"), std::string::npos);
    EXPECT_NE(text.find("class Book {\n  title : String\n"), std::string::npos);
    EXPECT_NE(text.find("Member <|-- Student\n"), std::string::npos);
    EXPECT_NE(text.find("Library \"1\" o-- \"0..*\" Book\n"), std::string::npos);
    EXPECT_NE(text.find("Member \"1\" --> \"0..*\" Book\n"), std::string::npos);
    EXPECT_EQ(text.substr(text.size() - 8), "@enduml\n");
}

TEST(AcceptedOnly, NoProposedOrRejectedAndClosedEnds) {
    std::mt19937 rng(10);
    const std::array<ReviewStatus, 3> st = {ReviewStatus::Proposed, ReviewStatus::Accepted, ReviewStatus::Rejected};
    for (int i = 0; i < 300; ++i) {
        auto m = random_model(rng);
        for (auto& c : m.classes) {
            c.status = st[static_cast<std::size_t>(roll(rng, 0, 2))];
            for (auto& a : c.attributes) a.status = st[static_cast<std::size_t>(roll(rng, 0, 2))];
        }
        for (auto& e : m.enums) e.status = st[static_cast<std::size_t>(roll(rng, 0, 2))];
        for (auto& r : m.relationships) r.status = st[static_cast<std::size_t>(roll(rng, 0, 2))];
        const auto out = import_canonical(export_canonical(accepted_only(m)));
        for (const auto& c : out.classes) {
            EXPECT_EQ(c.status, ReviewStatus::Accepted);
            for (const auto& a : c.attributes) EXPECT_EQ(a.status, ReviewStatus::Accepted);
        }
        for (const auto& e : out.enums) EXPECT_EQ(e.status, ReviewStatus::Accepted);
        for (const auto& r : out.relationships) {
            EXPECT_EQ(r.status, ReviewStatus::Accepted);
            ASSERT_NE(out.find_class(r.source), nullptr);
            ASSERT_NE(out.find_class(r.target), nullptr);
        }
    }
}

TEST(AcceptedOnly, PlantUmlContainsExactlyAcceptedClasses) {
    auto m = reviewed_model();
    m.find_class("Member")->status = ReviewStatus::Accepted;
    m.find_class("Book")->status = ReviewStatus::Accepted;
    const auto text = to_plantuml(m, true);
    EXPECT_NE(text.find("class Member"), std::string::npos);
    EXPECT_NE(text.find("class Book"), std::string::npos);
    EXPECT_EQ(text.find("class Library"), std::string::npos);
    EXPECT_EQ(text.find("class Student"), std::string::npos);
    EXPECT_EQ(text.find("-->"), std::string::npos);
}

TEST(AcceptedOnly, NothingAcceptedIsEmptyDiagram) {
    EXPECT_EQ(to_plantuml(reviewed_model(), true), "@startuml\n@enduml\n");
}
