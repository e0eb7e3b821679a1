#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "semloc/contrastive.hpp"
#include "semloc/projection.hpp"
#include "semloc/rerank.hpp"

using namespace semloc;

namespace {

/// `panos` panoramas with `views` views each, queries q0..q{nq-1}, and a complete RGB
/// table with random scores.
struct Toy {
    Dataset ds;
    RgbScoreTable table;
};

Toy make_toy(int panos, int views, int nq, semloc::Rng& rng) {
    Toy t;
    for (int p = 0; p < panos; ++p) {
        const std::string pid = "P" + std::to_string(p);
        t.ds.panoramas.push_back({pid, {30.0 * p, 0}, SemanticMask(8, 4, 9)});
        for (int k = 0; k < views; ++k) {
            t.ds.views.push_back({view_id(pid, k), pid, 360.0 * k / views, 90, {30.0 * p, 0},
                                  testutil::random_mask(8, 6, 9, rng)});
        }
    }
    for (int q = 0; q < nq; ++q) {
        t.ds.queries.push_back({"q" + std::to_string(q), {30.0 * (q % panos) + 1, 0}, testutil::random_mask(8, 6, 9, rng)});
        for (const auto& v : t.ds.views) t.table.add(t.ds.queries.back().id, v.id, rng.uniform());
    }
    t.ds.reindex();
    t.table.finalize();
    return t;
}

SemanticScorer constant_scorer(double v) {
    return [v](const QueryRecord&, const ViewRecord&) { return v; };
}

std::vector<std::string> ids(const CandidateList& l) {
    std::vector<std::string> out;
    for (const auto& e : l.entries) out.push_back(e.view_id);
    return out;
}

}  // namespace

TEST_CASE("normalize_scores") {
    CHECK(normalize_scores(std::vector<double>{2, 4, 6}) == std::vector<double>{-1, 0, 1});
    CHECK(normalize_scores(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});
    semloc::Rng rng(1);
    std::vector<double> raw(50);
    for (auto& v : raw) v = rng.uniform(-3, 9);
    const auto n = normalize_scores(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(n[i] >= -1.0);
        CHECK(n[i] <= 1.0);
        for (std::size_t j = 0; j < raw.size(); ++j)
            if (raw[i] < raw[j]) CHECK(n[i] < n[j]);
    }
}

TEST_CASE("RgbScoreTable") {
    RgbScoreTable t;
    t.add("q", "b", 0.5);
    t.add("q", "a", 0.5);
    t.add("q", "c", 0.9);
    t.finalize();
    const auto& r = t.ranked("q");
    CHECK(r[0].view_id == "c");
    CHECK(r[1].view_id == "a");
    CHECK(r[2].view_id == "b");
    CHECK(testutil::kind_of([&] { t.ranked("nope"); }) == ErrorKind::unknown_id);

    testutil::TempDir dir("rgb");
    t.save(dir / "rgb.csv");
    const auto back = RgbScoreTable::load(dir / "rgb.csv");
    CHECK(back.ranked("q").size() == 3);
    CHECK(back.ranked("q")[0].score == 0.9);

    RgbScoreTable dup;
    dup.add("q", "a", 1);
    dup.add("q", "a", 2);
    CHECK(testutil::kind_of([&] { dup.finalize(); }) == ErrorKind::duplicate_id);
    { std::ofstream(dir / "bad.csv") << "query_id,view_id,score\nq,a,high\n"; }
    CHECK(testutil::kind_of([&] { RgbScoreTable::load(dir / "bad.csv"); }) == ErrorKind::format);
}

TEST_CASE("candidate_pool sizes") {
    semloc::Rng rng(2);
    SUBCASE("top-10 from 10 distinct 12-view panoramas gives 120") {
        auto toy = make_toy(12, 12, 1, rng);
        RgbScoreTable t;
        for (int p = 0; p < 12; ++p) t.add("q0", view_id("P" + std::to_string(p), p % 12), 1.0 - 0.05 * p);
        t.finalize();
        CHECK(candidate_pool("q0", t, toy.ds, 10).size() == 120);
    }
    SUBCASE("all top-S from one panorama gives 12") {
        auto toy = make_toy(3, 12, 1, rng);
        RgbScoreTable t;
        for (int k = 0; k < 12; ++k) t.add("q0", view_id("P1", k), 1.0 - 0.01 * k);
        t.add("q0", view_id("P2", 0), 0.1);
        t.finalize();
        const auto pool = candidate_pool("q0", t, toy.ds, 10);
        CHECK(pool.size() == 12);
        for (const auto& id : pool) CHECK(toy.ds.view(id).parent_pano == "P1");
    }
    SUBCASE("S = 1 with a single-view panorama") {
        auto toy = make_toy(2, 1, 1, rng);
        CHECK(candidate_pool("q0", toy.table, toy.ds, 1).size() == 1);
    }
    SUBCASE("pool closure") {
        auto toy = make_toy(8, 6, 5, rng);
        for (const auto& q : toy.ds.queries) {
            std::set<std::string> parents;
            for (int k = 0; k < 4; ++k) parents.insert(toy.ds.view(toy.table.ranked(q.id)[k].view_id).parent_pano);
            for (const auto& id : candidate_pool(q.id, toy.table, toy.ds, 4)) CHECK(parents.count(toy.ds.view(id).parent_pano));
        }
    }
    SUBCASE("errors") {
        auto toy = make_toy(2, 2, 1, rng);
        CHECK(testutil::kind_of([&] { candidate_pool("zz", toy.table, toy.ds); }) == ErrorKind::unknown_id);
        CHECK_THROWS_AS(candidate_pool("q0", toy.table, toy.ds, 0), Error);
    }
}

TEST_CASE("fuse arithmetic") {
    // three candidates with rgb raw 0, 0.6, 1 -> normalised -1, 0.2, 1; semantic raw 0, 0.9, 1 -> -1, 0.8, 1
    Dataset ds;
    ds.panoramas.push_back({"P", {}, SemanticMask(8, 4, 9)});
    for (const char* id : {"a", "b", "c"}) ds.views.push_back({id, "P", 0, 90, {}, SemanticMask(4, 4, 9)});
    ds.queries.push_back({"q", {}, SemanticMask(4, 4, 9)});
    ds.reindex();
    RgbScoreTable t;
    t.add("q", "a", 0.0);
    t.add("q", "b", 0.6);
    t.add("q", "c", 1.0);
    t.finalize();
    const std::map<std::string, double> sem = {{"a", 0.0}, {"b", 0.9}, {"c", 1.0}};
    const SemanticScorer scorer = [&](const QueryRecord&, const ViewRecord& v) { return sem.at(v.id); };
    const auto pool = candidate_pool("q", t, ds, 3);
    const auto l = fuse(ds.queries[0], pool, t, ds, scorer, 0.25);
    const auto it = std::find_if(l.entries.begin(), l.entries.end(), [](const Candidate& c) { return c.view_id == "b"; });
    CHECK(it->rgb_norm == doctest::Approx(0.2));
    CHECK(it->sem_norm == doctest::Approx(0.8));
    CHECK(it->fused == doctest::Approx(0.4));
    CHECK(l.weight == 0.25);
    CHECK(testutil::kind_of([&] { fuse(ds.queries[0], pool, t, ds, scorer, -1); }) == ErrorKind::invalid_argument);
    CHECK_THROWS_AS(fuse(ds.queries[0], std::vector<std::string>{}, t, ds, scorer, 0.25), Error);
}

TEST_CASE("semantic winner breaks an RGB tie") {
    Dataset ds;
    ds.panoramas.push_back({"P", {}, SemanticMask(8, 4, 9)});
    for (const char* id : {"a", "b"}) ds.views.push_back({id, "P", 0, 90, {}, SemanticMask(4, 4, 9)});
    ds.queries.push_back({"q", {}, SemanticMask(4, 4, 9)});
    ds.reindex();
    RgbScoreTable t;
    t.add("q", "a", 0.7);
    t.add("q", "b", 0.7);
    t.finalize();
    const SemanticScorer scorer = [](const QueryRecord&, const ViewRecord& v) { return v.id == "b" ? 1.0 : -1.0; };
    for (double w : {1e-6, 0.25, 3.0}) {
        const auto l = fuse(ds.queries[0], candidate_pool("q", t, ds), t, ds, scorer, w);
        CHECK(l.entries[0].view_id == "b");
    }
    // with no semantic signal the tie falls back to the view id
    CHECK(fuse(ds.queries[0], candidate_pool("q", t, ds), t, ds, scorer, 0.0).entries[0].view_id == "a");
}

TEST_CASE("W = 0 reproduces the RGB ranking restricted to the pool") {
    semloc::Rng rng(3);
    auto toy = make_toy(10, 6, 8, rng);
    const auto res = rerank_all(toy.ds.queries, toy.table, toy.ds, make_pixel_scorer(), 0.0, 5);
    CHECK(res.size() == 8);
    for (const auto& [qid, list] : res) {
        const auto pool = candidate_pool(qid, toy.table, toy.ds, 5);
        const std::set<std::string> in_pool(pool.begin(), pool.end());
        std::vector<std::string> expected;
        for (const auto& e : toy.table.ranked(qid))
            if (in_pool.count(e.view_id)) expected.push_back(e.view_id);
        CHECK(ids(list) == expected);
        CHECK(list.entries[0].view_id == toy.table.ranked(qid)[0].view_id);
    }
}

TEST_CASE("sibling views missing from the RGB table get the pool minimum") {
    semloc::Rng rng(4);
    auto toy = make_toy(2, 4, 1, rng);
    RgbScoreTable t;
    t.add("q0", "P0_v00", 0.9);
    t.add("q0", "P0_v01", 0.5);
    t.add("q0", "P1_v00", 0.2);
    t.finalize();
    const auto pool = candidate_pool("q0", t, toy.ds, 2);
    CHECK(pool.size() == 4);
    const auto l = fuse(toy.ds.queries[0], pool, t, toy.ds, constant_scorer(0), 0.25);
    for (const auto& e : l.entries) {
        if (e.view_id == "P0_v02" || e.view_id == "P0_v03") CHECK(e.rgb_raw == 0.5);
    }
}

TEST_CASE("fusion invariants") {
    semloc::Rng rng(5);
    auto toy = make_toy(6, 4, 4, rng);
    const auto scorer = make_pixel_scorer(8, 6);
    SUBCASE("positive affine transforms of RGB scores leave the ranking unchanged") {
        RgbScoreTable t2;
        for (const auto& [q, rows] : toy.table.rows())
            for (const auto& e : rows) t2.add(q, e.view_id, 3.5 * e.score - 7.0);
        t2.finalize();
        const auto a = rerank_all(toy.ds.queries, toy.table, toy.ds, scorer, 0.3, 3);
        const auto b = rerank_all(toy.ds.queries, t2, toy.ds, scorer, 0.3, 3);
        for (const auto& [q, l] : a) CHECK(ids(l) == ids(b.at(q)));
    }
    SUBCASE("raising one candidate's semantic score never lowers its rank") {
        const auto& q = toy.ds.queries[0];
        const auto pool = candidate_pool(q.id, toy.table, toy.ds, 3);
        for (const auto& target : pool) {
            const auto base = fuse(q, pool, toy.table, toy.ds, scorer, 0.5);
            const SemanticScorer boosted = [&](const QueryRecord& qq, const ViewRecord& v) {
                return scorer(qq, v) + (v.id == target ? 0.3 : 0.0);
            };
            const auto up = fuse(q, pool, toy.table, toy.ds, boosted, 0.5);
            const auto ib = ids(base), iu = ids(up);
            CHECK(std::find(iu.begin(), iu.end(), target) - iu.begin() <= std::find(ib.begin(), ib.end(), target) - ib.begin());
        }
    }
    SUBCASE("thread count does not change results") {
        const auto a = rerank_all(toy.ds.queries, toy.table, toy.ds, scorer, 0.25, 3, 1);
        const auto b = rerank_all(toy.ds.queries, toy.table, toy.ds, scorer, 0.25, 3, 3);
        for (const auto& [q, l] : a) CHECK(ids(l) == ids(b.at(q)));
    }
    SUBCASE("empty query set") {
        CHECK(rerank_all(std::span<const QueryRecord>{}, toy.table, toy.ds, scorer, 0.25).empty());
    }
}

TEST_CASE("results CSV round trip") {
    semloc::Rng rng(6);
    auto toy = make_toy(4, 3, 3, rng);
    const auto res = rerank_all(toy.ds.queries, toy.table, toy.ds, make_pixel_scorer(8, 6), 0.25, 2);
    testutil::TempDir dir("res");
    save_results(res, dir / "r.csv");
    const auto back = load_results(dir / "r.csv");
    REQUIRE(back.size() == res.size());
    for (const auto& [q, l] : res) {
        CHECK(ids(back.at(q)) == ids(l));
        CHECK(back.at(q).entries[0].fused == l.entries[0].fused);
    }
}

TEST_CASE("embedding scorer") {
    semloc::Rng rng(7);
    auto toy = make_toy(3, 4, 2, rng);
    nn::ModelConfig mc;
    mc.input_w = 8;
    mc.input_h = 6;
    mc.conv_channels = {4};
    auto model = std::make_shared<const nn::EmbeddingModel>(nn::EmbeddingModel::make_default(mc));
    const auto scorer = make_embed_scorer(model, toy.ds.views, 1);
    const auto& q = toy.ds.queries[0];
    const auto& v = toy.ds.views[2];
    CHECK(scorer(q, v) == doctest::Approx(embed_similarity(*model, q.mask, v.mask)));
    CHECK(scorer(q, v) == scorer(q, v));
    CHECK_THROWS_AS(make_embed_scorer(nullptr, toy.ds.views), Error);
}
