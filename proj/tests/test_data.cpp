#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "kgec/data.hpp"
#include "support/synthetic_kg.hpp"

using namespace kgec;

namespace {

std::vector<Triple> load_str(const std::string& text, Vocab& v, bool grow = true) {
    std::istringstream in(text);
    return load_triples(in, v, grow, "mem");
}

}  // namespace

TEST(LoadTriples, AssignsIdsInFirstSeenOrder) {
    Vocab v;
    auto ts = load_str("a\tr\tb\nb\ts\tc\n", v);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0], (Triple{0, 0, 1}));
    EXPECT_EQ(ts[1], (Triple{1, 1, 2}));
    EXPECT_EQ(v.entities.size(), 3u);
    EXPECT_EQ(v.relations.name(1), "s");
}

TEST(LoadTriples, WrongFieldCountReportsLine) {
    Vocab v;
    try {
        load_str("a\tr\tb\na\tr\n", v);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(load_str("a\tr\tb\tc\n", v), ParseError);
}

TEST(LoadTriples, UnknownNameWithoutGrowth) {
    Vocab v;
    load_str("a\tr\tb\n", v);
    try {
        load_str("a\tr\tzz\n", v, false);
        FAIL() << "expected VocabError";
    } catch (const VocabError& e) {
        EXPECT_EQ(e.token(), "zz");
    }
}

TEST(LoadTriples, NamesAreOpaqueBytes) {
    Vocab v;
    auto ts = load_str("Foo \tr\tfoo\n", v);
    EXPECT_NE(ts[0].head, ts[0].tail);
    EXPECT_EQ(v.entities.name(0), "Foo ");
}

TEST(LoadTriples, DuplicatesKeptInSplit) {
    Vocab v;
    auto ts = load_str("a\tr\tb\na\tr\tb\n", v);
    EXPECT_EQ(ts.size(), 2u);
    KnownIndex idx{ts};
    EXPECT_EQ(idx.size(), 1u);
}

TEST(LoadTriples, RoundTripReproducesIds) {
    std::mt19937_64 rng(3);
    auto vocab = testkit::numbered_vocab(40, 6);
    auto ts = testkit::random_distinct_triples(40, 6, 300, rng);
    std::ostringstream out;
    write_triples(out, ts, vocab);
    std::istringstream in(out.str());
    auto back = load_triples(in, vocab, false, "rt");
    EXPECT_EQ(back, ts);
}

TEST(KnownIndex, SetSemantics) {
    std::vector<Triple> train{{0, 0, 1}}, test{{2, 0, 1}};
    KnownIndex idx{train, std::span<const Triple>{}, test};
    EXPECT_TRUE(idx.contains(0, 0, 1));
    EXPECT_TRUE(idx.contains(2, 0, 1));
    EXPECT_FALSE(idx.contains(1, 0, 0));
    auto heads = idx.heads(0, 1);
    EXPECT_EQ(std::vector<EntityId>(heads.begin(), heads.end()), (std::vector<EntityId>{0, 2}));
    EXPECT_TRUE(idx.tails(1, 0).empty());
}

TEST(KnownIndex, EmptyDataset) {
    Dataset ds;
    auto idx = build_known_index(ds);
    EXPECT_TRUE(idx.empty());
    EXPECT_FALSE(idx.contains(0, 0, 0));
}

TEST(KnownIndex, MatchesBruteForceScan) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<Triple> all;
        std::uniform_int_distribution<EntityId> e(0, 49);
        std::uniform_int_distribution<RelationId> r(0, 4);
        for (int i = 0; i < 3000; ++i) all.push_back({e(rng), r(rng), e(rng)});
        std::span<const Triple> s(all);
        KnownIndex idx{s.subspan(0, 2000), s.subspan(2000, 500), s.subspan(2500)};
        for (EntityId h = 0; h < 50; ++h)
            for (RelationId k = 0; k < 5; ++k)
                for (EntityId t = 0; t < 50; ++t) {
                    const bool scan = std::find(all.begin(), all.end(), Triple{h, k, t}) != all.end();
                    ASSERT_EQ(idx.contains(h, k, t), scan);
                }
        for (RelationId k = 0; k < 5; ++k)
            for (EntityId t = 0; t < 50; ++t) {
                std::set<EntityId> expect;
                for (const auto& x : all)
                    if (x.rel == k && x.tail == t) expect.insert(x.head);
                auto got = idx.heads(k, t);
                ASSERT_EQ(std::vector<EntityId>(got.begin(), got.end()), std::vector<EntityId>(expect.begin(), expect.end()));
            }
    }
}

TEST(LoadEntailments, InvertedPremise) {
    Vocab v;
    v.relations.get_or_add("hypernym");
    v.relations.get_or_add("hyponym");
    std::istringstream in("hypernym^-1\thyponym\t1.00\n");
    auto ents = load_entailments(in, v);
    ASSERT_EQ(ents.size(), 1u);
    EXPECT_EQ(ents[0], (Entailment{0, true, 1, 1.0}));
}

TEST(LoadEntailments, PlainPremise) {
    Vocab v;
    v.relations.get_or_add("owner");
    v.relations.get_or_add("owning_company");
    std::istringstream in("owner\towning_company\t0.95\n");
    auto ents = load_entailments(in, v);
    ASSERT_EQ(ents.size(), 1u);
    EXPECT_FALSE(ents[0].premise_inverted);
    EXPECT_DOUBLE_EQ(ents[0].lambda, 0.95);
}

TEST(LoadEntailments, Errors) {
    Vocab v;
    v.relations.get_or_add("p");
    v.relations.get_or_add("q");
    std::istringstream big("p\tq\t1.5\n");
    EXPECT_THROW(load_entailments(big, v), RangeError);
    std::istringstream zero("p\tq\t0\n");
    EXPECT_THROW(load_entailments(zero, v), RangeError);
    std::istringstream unknown("p\tnope\t0.9\n");
    EXPECT_THROW(load_entailments(unknown, v), VocabError);
    std::istringstream self("p\tp\t0.9\n");
    EXPECT_THROW(load_entailments(self, v), RangeError);
    std::istringstream inv_self("p^-1\tp\t0.9\n");
    EXPECT_EQ(load_entailments(inv_self, v).size(), 1u);
}

TEST(LoadDataset, WarnsAboutNamesMissingFromTrain) {
    testkit::TempDir dir("data");
    std::ofstream(dir / "train.txt") << "a\tr\tb\n";
    std::ofstream(dir / "valid.txt") << "a\tr\tb\n";
    std::ofstream(dir / "test.tsv") << "c\tr\tb\n";
    std::vector<std::string> warnings;
    ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
    auto ds = load_dataset(dir.path());
    EXPECT_EQ(ds.test.size(), 1u);
    EXPECT_EQ(ds.num_entities(), 3u);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("'c'"), std::string::npos);
}

TEST(LoadDataset, MissingSplitIsAnError) {
    testkit::TempDir dir("data");
    std::ofstream(dir / "train.txt") << "a\tr\tb\n";
    EXPECT_THROW(load_dataset(dir.path()), std::runtime_error);
}

TEST(VocabDump, LineNumberIsId) {
    testkit::TempDir dir("vocab");
    auto v = testkit::numbered_vocab(5, 2);
    write_names(dir / "e.txt", v.entities);
    auto back = read_names(dir / "e.txt");
    EXPECT_EQ(back, v.entities);
    EXPECT_EQ(back.at("e3"), 3u);
}
