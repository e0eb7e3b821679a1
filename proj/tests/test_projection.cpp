#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "helpers.hpp"
#include "semloc/dataset.hpp"
#include "semloc/projection.hpp"
#include "semloc/synth.hpp"

using namespace semloc;

namespace {

constexpr double kPi = std::numbers::pi;

PanoramaRecord column_pano(int pw, std::size_t palette, const std::function<ClassId(int col, int row)>& paint) {
    SemanticMask m(pw, pw / 2, palette);
    for (int y = 0; y < pw / 2; ++y)
        for (int x = 0; x < pw; ++x) m.set(x, y, paint(x, y));
    return {"P", {0, 0}, m};
}

/// Continuous panorama coordinates hit by the ray through view pixel (x, y), computed from a
/// unit direction vector. Returns false when the sample lies within `eps` of a pixel border.
bool oracle_sample(const ViewSpec& s, int pw, int x, int y, int& col, int& row, double eps = 1e-6) {
    const double f = (s.out_w / 2.0) / std::tan(s.fov_deg * kPi / 360.0);
    // camera axes for yaw rotation about the vertical, pitch 0
    const double dx = x + 0.5 - s.out_w / 2.0;
    const double dy = s.out_h / 2.0 - (y + 0.5);
    const double n = std::sqrt(dx * dx + dy * dy + f * f);
    const double lon = s.yaw_deg + std::atan2(dx / n, f / n) * 180.0 / kPi;
    const double lat = std::asin(dy / n) * 180.0 / kPi;
    const double u = lon / 360.0 * pw;
    const double v = (90.0 - lat) / 180.0 * (pw / 2);
    if (std::abs(u - std::round(u)) < eps || std::abs(v - std::round(v)) < eps) return false;
    col = ((static_cast<int>(std::floor(u)) % pw) + pw) % pw;
    row = std::clamp(static_cast<int>(std::floor(v)), 0, pw / 2 - 1);
    return true;
}

}  // namespace

TEST_CASE("view ray geometry") {
    ViewSpec s{33.0, 0.0, 90.0, 640, 480};
    const auto c = view_ray(s, 320, 240);
    CHECK(c.lon_deg == doctest::Approx(33.0));
    CHECK(c.lat_deg == doctest::Approx(0.0));
    const auto edge = view_ray(s, 640, 240);
    CHECK(edge.lon_deg == doctest::Approx(78.0));
    const auto left = view_ray(s, 0, 240);
    CHECK(left.lon_deg == doctest::Approx(-12.0));
}

TEST_CASE("720x360 banded panorama, yaw 0 fov 90") {
    const auto pano = column_pano(720, 12, [](int c, int) { return static_cast<ClassId>((c / 60) % 12); });
    const auto v = gnomonic_view(pano, ViewSpec{0, 0, 90, 160, 120});
    CHECK(v.mask.class_set() == std::vector<ClassId>{0, 1, 10, 11});

    // per-pixel ray-cast oracle
    int checked = 0;
    for (int y = 0; y < 120; ++y) {
        for (int x = 0; x < 160; ++x) {
            int col = 0, row = 0;
            if (!oracle_sample(ViewSpec{0, 0, 90, 160, 120}, 720, x, y, col, row)) continue;
            REQUIRE(v.mask.at(x, y) == pano.mask.at(col, row));
            ++checked;
        }
    }
    CHECK(checked > 160 * 120 * 9 / 10);
}

TEST_CASE("ray-cast oracle on a random panorama at random yaws") {
    semloc::Rng rng(3);
    const auto pano = column_pano(256, 200, [&](int, int) { return static_cast<ClassId>(rng.below(200)); });
    for (int t = 0; t < 8; ++t) {
        ViewSpec s{rng.uniform(0, 360), 0, rng.uniform(20, 150), 64, 48};
        const auto v = gnomonic_view(pano, s);
        for (int y = 0; y < s.out_h; ++y) {
            for (int x = 0; x < s.out_w; ++x) {
                int col = 0, row = 0;
                if (!oracle_sample(s, 256, x, y, col, row)) continue;
                REQUIRE(v.mask.at(x, y) == pano.mask.at(col, row));
            }
        }
    }
}

TEST_CASE("constant panorama gives a constant view") {
    const auto pano = column_pano(200, 9, [](int, int) { return ClassId{4}; });
    for (double fov : {10.0, 90.0, 170.0}) {
        const auto v = gnomonic_view(pano, ViewSpec{123, 20, fov, 31, 17});
        CHECK(v.mask.class_set() == std::vector<ClassId>{4});
    }
}

TEST_CASE("invalid specs") {
    const auto pano = column_pano(64, 3, [](int, int) { return ClassId{0}; });
    CHECK(testutil::kind_of([&] { gnomonic_view(pano, ViewSpec{0, 0, 180, 8, 8}); }) == ErrorKind::invalid_argument);
    CHECK(testutil::kind_of([&] { gnomonic_view(pano, ViewSpec{0, 0, 0, 8, 8}); }) == ErrorKind::invalid_argument);
    CHECK(testutil::kind_of([&] { gnomonic_view(pano, ViewSpec{0, 0, 90, 0, 8}); }) == ErrorKind::invalid_argument);
    PanoramaRecord bad{"B", {}, SemanticMask(10, 4, 3)};
    CHECK(testutil::kind_of([&] { gnomonic_view(bad, ViewSpec{}); }) == ErrorKind::aspect);
}

TEST_CASE("generate_database_views yaws and ids") {
    const auto pano = column_pano(128, 3, [](int c, int) { return static_cast<ClassId>(c % 3); });
    const auto views = generate_database_views(pano, 12, 90, 16, 12);
    REQUIRE(views.size() == 12);
    for (int k = 0; k < 12; ++k) {
        CHECK(views[k].yaw_deg == doctest::Approx(30.0 * k));
        CHECK(views[k].id == view_id("P", k));
        CHECK(views[k].parent_pano == "P");
    }
    CHECK(views[3].id == "P_v03");
    const auto one = generate_database_views(pano, 1, 90, 16, 12);
    REQUIRE(one.size() == 1);
    CHECK(one[0].yaw_deg == 0.0);
    CHECK_THROWS_AS(generate_database_views(pano, 0), Error);
}

TEST_CASE("four 90 degree views cover the azimuth exactly once") {
    // columns encoded in two channels: low = c % 200, high = c / 200
    const int pw = 400;
    const auto lo = column_pano(pw, 200, [](int c, int) { return static_cast<ClassId>(c % 200); });
    const auto hi = column_pano(pw, 200, [](int c, int) { return static_cast<ClassId>(c / 200); });
    std::vector<int> owner(pw, -1);
    for (int k = 0; k < 4; ++k) {
        const ViewSpec s{90.0 * k, 0, 90, 400, 1};
        const auto a = gnomonic_view(lo, s), b = gnomonic_view(hi, s);
        for (int x = 0; x < s.out_w; ++x) {
            const int col = b.mask.at(x, 0) * 200 + a.mask.at(x, 0);
            CHECK((owner[col] == -1 || owner[col] == k));
            owner[col] = k;
        }
    }
    // the angular pixel pitch is finest at the view edge, widest (atan(1/200)) at its centre,
    // which is still below one panorama column
    CHECK(std::count(owner.begin(), owner.end(), -1) == 0);
}

TEST_CASE("yaw equivariance for whole-column shifts") {
    semloc::Rng rng(11);
    const int pw = 360;
    const auto pano = column_pano(pw, 50, [&](int, int) { return static_cast<ClassId>(rng.below(50)); });
    for (int shift : {1, 7, 90, 359}) {
        PanoramaRecord rolled = pano;
        for (int y = 0; y < pw / 2; ++y)
            for (int x = 0; x < pw; ++x) rolled.mask.set((x + shift) % pw, y, pano.mask.at(x, y));
        const double delta = shift * 360.0 / pw;
        const auto a = gnomonic_view(pano, ViewSpec{25.0, 0, 90, 64, 48});
        const auto b = gnomonic_view(rolled, ViewSpec{25.0 + delta, 0, 90, 64, 48});
        CHECK(a.mask == b.mask);
    }
}

TEST_CASE("neighbors_of") {
    const auto a = column_pano(64, 3, [](int, int) { return ClassId{1}; });
    PanoramaRecord b = a;
    b.id = "Q";
    auto views = generate_database_views(a, 12, 90, 8, 6);
    const auto vb = generate_database_views(b, 12, 90, 8, 6);
    views.insert(views.end(), vb.begin(), vb.end());
    const auto n = neighbors_of("P_v05", views);
    CHECK(n.size() == 12);
    for (const auto& v : n) CHECK(v.parent_pano == "P");
    const auto single = generate_database_views(a, 1, 90, 8, 6);
    CHECK(neighbors_of("P_v00", single).size() == 1);
    CHECK(testutil::kind_of([&] { neighbors_of("nope", views); }) == ErrorKind::unknown_id);
}

TEST_CASE("synthetic panoramas keep their classes") {
    SceneSpec spec;
    for (int i = 0; i < 3; ++i) {
        const auto pano = generate_scene(spec, i);
        const auto pc = pano.mask.class_set();
        for (const auto& v : generate_database_views(pano, 12, 90, 64, 48)) {
            const auto vc = v.mask.class_set();
            CHECK(std::includes(pc.begin(), pc.end(), vc.begin(), vc.end()));
            CHECK(v.mask.palette_id() == pano.mask.palette_id());
        }
    }
}
