#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "semloc/augment.hpp"

using namespace semloc;

TEST_CASE("config validation") {
    AugmentConfig c;
    CHECK_NOTHROW(c.validate());
    c.min_crop_ratio = 0.0;
    CHECK(testutil::kind_of([&] { c.validate(); }) == ErrorKind::config);
    c.min_crop_ratio = 1.2;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.max_rotation_deg = -1;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("full crop is the identity") {
    semloc::Rng rng(4), gen(5);
    const auto m = testutil::random_mask(80, 64, 9, gen);
    for (int t = 0; t < 10; ++t) {
        const auto r = random_resized_crop(m, 1.0, rng);
        CHECK(r.mask == m);
        CHECK(r.rect.w == 80);
        CHECK(r.rect.h == 64);
    }
}

TEST_CASE("crop area never falls below the ratio") {
    semloc::Rng rng(6), gen(7);
    for (double ratio : {0.1, 0.3, 0.6, 0.9}) {
        for (int t = 0; t < 500; ++t) {
            const int w = 8 + static_cast<int>(gen.below(120)), h = 8 + static_cast<int>(gen.below(120));
            const SemanticMask m(w, h, 3);
            const auto r = random_resized_crop(m, ratio, rng);
            REQUIRE(r.rect.area_fraction(w, h) >= ratio);
            CHECK(r.rect.x >= 0);
            CHECK(r.rect.y >= 0);
            CHECK(r.rect.x + r.rect.w <= w);
            CHECK(r.rect.y + r.rect.h <= h);
            CHECK(r.mask.width() == w);
            CHECK(r.mask.height() == h);
        }
    }
}

TEST_CASE("crop is the nearest resize of the rectangle") {
    semloc::Rng rng(8), gen(9);
    const auto m = testutil::random_mask(40, 30, 9, gen);
    const auto r = random_resized_crop(m, 0.5, rng);
    SemanticMask rect(r.rect.w, r.rect.h, 9);
    for (int y = 0; y < r.rect.h; ++y)
        for (int x = 0; x < r.rect.w; ++x) rect.set(x, y, m.at(r.rect.x + x, r.rect.y + y));
    CHECK(r.mask == resize_nearest(rect, 40, 30));
}

TEST_CASE("seeded determinism") {
    semloc::Rng gen(10);
    const auto m = testutil::blocky_mask(80, 64, 9, gen);
    AugmentConfig cfg;
    semloc::Rng a(77), b(77);
    for (int t = 0; t < 5; ++t) {
        const auto pa = make_pair(m, cfg, a);
        const auto pb = make_pair(m, cfg, b);
        CHECK(pa.first == pb.first);
        CHECK(pa.second == pb.second);
        CHECK(pa.angles_deg[0] == pb.angles_deg[0]);
    }
}

TEST_CASE("rotation") {
    semloc::Rng gen(12);
    const auto m = testutil::blocky_mask(80, 64, 9, gen);
    SUBCASE("zero angle and max 0 are identities") {
        CHECK(rotate_mask(m, 0.0) == m);
        semloc::Rng rng(1);
        const auto r = random_rotation(m, 0.0, rng);
        CHECK(r.angle_deg == 0.0);
        CHECK(r.mask == m);
    }
    SUBCASE("inverse-rotation oracle") {
        for (double angle : {-3.0, 1.7, 25.0}) {
            const auto r = rotate_mask(m, angle, 0);
            const double a = angle * std::numbers::pi / 180.0;
            for (int y = 0; y < 64; ++y) {
                for (int x = 0; x < 80; ++x) {
                    // rotate the output pixel centre by -angle about the frame centre
                    const double px = x + 0.5 - 40, py = y + 0.5 - 32;
                    const double sx = 40 + px * std::cos(-a) - py * std::sin(-a);
                    const double sy = 32 + px * std::sin(-a) + py * std::cos(-a);
                    if (std::abs(sx - std::round(sx)) < 1e-9 || std::abs(sy - std::round(sy)) < 1e-9) continue;
                    const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
                    const ClassId want = (ix >= 0 && ix < 80 && iy >= 0 && iy < 64) ? m.at(ix, iy) : ClassId{0};
                    REQUIRE(r.at(x, y) == want);
                }
            }
        }
    }
    SUBCASE("constant mask keeps its interior") {
        const SemanticMask c(80, 64, 9, ClassId{5});
        const auto r = rotate_mask(c, 3.0, 0);
        for (int y = 8; y < 56; ++y)
            for (int x = 8; x < 72; ++x) REQUIRE(r.at(x, y) == 5);
        const auto cs = r.class_set();
        CHECK(std::includes(std::vector<ClassId>{0, 5}.begin(), std::vector<ClassId>{0, 5}.end(), cs.begin(),
                            cs.end()));
    }
    SUBCASE("+theta then -theta stays within 5% of identity") {
        semloc::Rng rng(13);
        for (int t = 0; t < 20; ++t) {
            const auto src = testutil::blocky_mask(80, 64, 9, rng, 10);
            const double theta = rng.uniform(0.0, 3.0);
            const auto back = rotate_mask(rotate_mask(src, theta), -theta);
            long diff = 0;
            for (std::size_t i = 0; i < src.size(); ++i) diff += src.classes()[i] != back.classes()[i] ? 1 : 0;
            CHECK(static_cast<double>(diff) / src.size() <= 0.05);
        }
    }
}

TEST_CASE("make_pair") {
    semloc::Rng gen(20);
    const auto m = testutil::blocky_mask(160, 128, 9, gen, 12);
    SUBCASE("degenerate augmentation equals the plain resize") {
        AugmentConfig cfg;
        cfg.min_crop_ratio = 1.0;
        cfg.max_rotation_deg = 0.0;
        semloc::Rng rng(1);
        const auto p = make_pair(m, cfg, rng);
        CHECK(p.first == resize_nearest(m, 80, 64));
        CHECK(p.second == resize_nearest(m, 80, 64));
    }
    SUBCASE("outputs have the configured size and classes") {
        AugmentConfig cfg;
        cfg.out_w = 33;
        cfg.out_h = 21;
        cfg.fill_class = 8;
        semloc::Rng rng(2);
        auto allowed = m.class_set();
        allowed.push_back(8);
        std::sort(allowed.begin(), allowed.end());
        for (int t = 0; t < 50; ++t) {
            const auto p = make_pair(m, cfg, rng);
            for (const auto* o : {&p.first, &p.second}) {
                CHECK(o->width() == 33);
                CHECK(o->height() == 21);
                const auto cs = o->class_set();
                CHECK(std::includes(allowed.begin(), allowed.end(), cs.begin(), cs.end()));
            }
            CHECK(p.crops[0].area_fraction(160, 128) >= 0.6);
            CHECK(std::abs(p.angles_deg[1]) <= 3.0);
        }
    }
    SUBCASE("distinct seeds give distinct pairs") {
        AugmentConfig cfg;
        int differ = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            semloc::Rng a(2 * s + 1), b(2 * s + 2);
            const auto pa = make_pair(m, cfg, a);
            const auto pb = make_pair(m, cfg, b);
            differ += (pa.first != pb.first || pa.second != pb.second) ? 1 : 0;
        }
        CHECK(differ >= 95);
    }
}
