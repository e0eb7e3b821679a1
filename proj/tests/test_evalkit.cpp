#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "semloc/evalkit.hpp"
#include "semloc/projection.hpp"
#include "semloc/synth.hpp"

using namespace semloc;

namespace {

CandidateList list_of(const std::string& qid, std::vector<std::string> views) {
    CandidateList l;
    l.query_id = qid;
    double s = 1.0;
    for (auto& v : views) l.entries.push_back({std::move(v), s, s, 0, 0, s}), s -= 0.1;
    return l;
}

GroundTruth simple_truth() {
    GroundTruth gt;
    gt.queries = {{"q1", {0, 0}}, {"q2", {0, 0}}};
    gt.views = {{"near3", {3, 0}}, {"far8", {8, 0}}, {"at5", {0, 5}}, {"near1", {0, 1}}};
    return gt;
}

SceneSpec small_spec() {
    SceneSpec s;
    s.n_scenes = 12;
    s.pano_w = 256;
    s.pano_h = 128;
    s.view_w = 40;
    s.view_h = 32;
    return s;
}

}  // namespace

TEST_CASE("recall_at_n examples") {
    const auto gt = simple_truth();
    RerankResults r;
    r["q1"] = list_of("q1", {"near3", "far8"});
    r["q2"] = list_of("q2", {"far8", "near1"});
    CHECK(recall_at_n(r, gt, 1, 5.0) == 0.5);
    CHECK(recall_at_n(r, gt, 2, 5.0) == 1.0);
    CHECK(recall_at_n(r, gt, 1, 0.0) == 0.0);
    CHECK(recall_at_n(r, gt, 1, 100.0) == 1.0);
    // strictly less than
    RerankResults b;
    b["q1"] = list_of("q1", {"at5"});
    CHECK(recall_at_n(b, gt, 1, 5.0) == 0.0);
    CHECK(recall_at_n(b, gt, 1, 5.0 + 1e-9) == 1.0);

    RerankResults bad;
    bad["q9"] = list_of("q9", {"near3"});
    CHECK(testutil::kind_of([&] { recall_at_n(bad, gt, 1, 5); }) == ErrorKind::unknown_id);
    CHECK_THROWS_AS(recall_at_n(r, gt, 0, 5), Error);
}

TEST_CASE("evaluation on a synthetic dataset") {
    const auto synth = generate_dataset(small_spec());
    const auto& ds = synth.dataset;
    const auto gt = GroundTruth::from(ds);
    const auto res = rerank_all(ds.queries, synth.rgb, ds, make_pixel_scorer(), 0.25, 10);

    SUBCASE("exhaustive retrieval reaches 1") {
        const auto all = rerank_all(ds.queries, synth.rgb, ds, make_pixel_scorer(), 0.0,
                                    static_cast<int>(ds.views.size()));
        CHECK(recall_at_n(all, gt, static_cast<int>(ds.views.size()), 5.0) == 1.0);
    }
    SUBCASE("report monotonicity") {
        EvalConfig cfg;
        cfg.thresholds_m = {5, 10, 15, 20, 25};
        const auto rep = evaluate(res, gt, "pixel", cfg);
        CHECK(rep.rows.size() == 25);
        CHECK_NOTHROW(rep.validate());
    }
    SUBCASE("threshold curve") {
        const std::vector<double> th = {5, 10, 15, 20, 25};
        const auto c = threshold_curve(res, gt, 1, th);
        REQUIRE(c.size() == 5);
        for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i].recall >= c[i - 1].recall);
        double diameter = 0;
        for (const auto& a : ds.panoramas)
            for (const auto& q : ds.queries) diameter = std::max(diameter, distance(a.position, q.position));
        const std::vector<double> beyond = {diameter + 1.0};
        CHECK(threshold_curve(res, gt, 1, beyond)[0].recall == 1.0);
        const std::vector<double> unsorted = {10, 5};
        CHECK_THROWS_AS(threshold_curve(res, gt, 1, unsorted), Error);
    }
    SUBCASE("single query gives 0 or 1") {
        RerankResults one;
        one.insert(*res.begin());
        for (double t : {1.0, 5.0, 40.0, 400.0}) {
            const double r = recall_at_n(one, gt, 1, t);
            CHECK((r == 0.0 || r == 1.0));
        }
    }
    SUBCASE("query order does not matter") {
        std::vector<QueryRecord> rev(ds.queries.rbegin(), ds.queries.rend());
        const auto r2 = rerank_all(rev, synth.rgb, ds, make_pixel_scorer(), 0.25, 10);
        CHECK(recall_at_n(r2, gt, 1, 5) == recall_at_n(res, gt, 1, 5));
    }
    SUBCASE("sweep_w") {
        PipelineInputs in{&ds, &synth.rgb, make_pixel_scorer(), 10, {}, 1};
        const std::vector<double> zero = {0.0};
        const auto t0 = sweep_w(in, zero);
        CHECK(t0.rows.size() == 5);
        const auto base = rerank_all(ds.queries, synth.rgb, ds, make_pixel_scorer(), 0.0, 10);
        CHECK(t0.recall(0.0, 1, 5.0) == recall_at_n(base, gt, 1, 5.0));
        CHECK(t0.rows[0].flag == "baseline");

        const std::vector<double> grid = {0.25, 0.25, 0.5};
        const auto t = sweep_w(in, grid);
        CHECK(t.rows.size() == 4 * 5);
        CHECK(t.rows[0].value == 0.0);
        for (int k = 0; k < 5; ++k) CHECK(t.rows[5 + k].recall == t.rows[10 + k].recall);
        CHECK(sweep_w(in, grid).rows.size() == t.rows.size());
        CHECK_THROWS_AS(sweep_w(in, std::vector<double>{}), Error);

        testutil::TempDir dir("sweep");
        t.save_csv(dir / "w.csv");
        std::ifstream f(dir / "w.csv");
        std::string header, first;
        std::getline(f, header);
        std::getline(f, first);
        CHECK(header == "W,N,threshold_m,recall,flag");
        CHECK(first.rfind("0,1,5,", 0) == 0);
        CHECK(first.find(",baseline") != std::string::npos);
        CHECK(t.to_text().find("[baseline]") != std::string::npos);
    }
    SUBCASE("sweep_crop_ratio") {
        semloc::Rng rng(3);
        std::vector<SemanticMask> masks;
        for (int i = 0; i < 8; ++i) masks.push_back(testutil::blocky_mask(40, 32, 9, rng));
        TrainConfig tc;
        tc.batch_n = 4;
        tc.epochs = 1;
        tc.augment.out_w = 20;
        tc.augment.out_h = 16;
        tc.model.conv_channels = {4};
        tc.model.embed_dim = 8;
        tc.model.proj_dim = 8;
        CropSweepInputs in{masks, tc, PipelineInputs{&ds, &synth.rgb, {}, 10, {}, 1}, 0.25};
        const std::vector<double> one = {0.6};
        CHECK(sweep_crop_ratio(in, one).rows.size() == 5);
        const std::vector<double> three = {0.3, 0.6, 0.9};
        const auto t = sweep_crop_ratio(in, three);
        CHECK(t.rows.size() == 15);
        CHECK(t.parameter == "min_crop_ratio");
        const auto again = sweep_crop_ratio(in, three);
        for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(t.rows[i].recall == again.rows[i].recall);

        in.train.augment.max_rotation_deg = 0.0;
        const std::vector<double> full = {1.0};
        const auto d = sweep_crop_ratio(in, full);
        CHECK(d.rows.size() == 5);
        CHECK(d.rows[0].flag == "degenerate");
        CHECK_THROWS_AS(sweep_crop_ratio(in, std::vector<double>{1.5}), Error);
    }
}

TEST_CASE("EvalReport validation and output") {
    EvalReport r;
    r.rows = {{"m", 1, 5, 0.5}, {"m", 2, 5, 0.4}};
    CHECK(testutil::kind_of([&] { r.validate(); }) == ErrorKind::numeric);
    r.rows = {{"m", 1, 5, 0.5}, {"m", 1, 10, 0.4}};
    CHECK_THROWS_AS(r.validate(), Error);
    r.rows = {{"m", 1, 5, 0.5}, {"m", 2, 5, 0.75}, {"m", 1, 10, 0.5}, {"m", 2, 10, 1.0}};
    CHECK_NOTHROW(r.validate());
    r.metadata = {{"W", "0.25"}};

    testutil::TempDir dir("rep");
    r.save_csv(dir / "r.csv");
    std::ifstream f(dir / "r.csv");
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == "# W=0.25\nmethod,N,threshold_m,recall\nm,1,5,0.5\nm,2,5,0.75\nm,1,10,0.5\nm,2,10,1\n");
    const auto text = r.to_text();
    CHECK(text.find("threshold 5 m") != std::string::npos);
    CHECK(text.find("0.7500") != std::string::npos);
}

TEST_CASE("EvalConfig validation") {
    EvalConfig c;
    CHECK_NOTHROW(c.validate());
    c.n_values = {2, 1};
    CHECK(testutil::kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.thresholds_m = {0};
    CHECK_THROWS_AS(c.validate(), Error);
}
