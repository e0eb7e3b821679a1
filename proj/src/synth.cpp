#include "semloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "semloc/error.hpp"
#include "semloc/projection.hpp"
#include "semloc/text.hpp"

namespace semloc {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::config, std::string(name) + " must lie in [0, 1]");
    };
    prob(flip_prob, "flip_prob");
    prob(object_change_prob, "object_change_prob");
    prob(corruption, "corruption");
    if (n_scenes < 1) throw Error(ErrorKind::config, "n_scenes must be >= 1");
    if (pano_h < 16 || pano_w != 2 * pano_h) throw Error(ErrorKind::config, "pano size must satisfy w = 2h, h >= 16");
    if (view_w < 8 || view_h < 8) throw Error(ErrorKind::config, "view size must be at least 8x8");
    if (view_count < 1) throw Error(ErrorKind::config, "view_count must be >= 1");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw Error(ErrorKind::config, "fov_deg must lie in (0, 180)");
    if (!(yaw_jitter_deg >= 0.0) || !(position_jitter_m >= 0.0) || !(pano_jitter_m >= 0.0)) {
        throw Error(ErrorKind::config, "jitter bounds must be >= 0");
    }
    if (!(grid_spacing_m > 2.0 * pano_jitter_m)) throw Error(ErrorKind::config, "grid spacing must exceed 2 * pano jitter");
    if (queries_per_scene < 0) throw Error(ErrorKind::config, "queries_per_scene must be >= 0");
    if (top_s < 1) throw Error(ErrorKind::config, "top_s must be >= 1");
    for (const char* name : {"road", "sidewalk", "building", "sky", "tree", "car", "sign", "pole"}) {
        if (palette.index_of(name) < 0) {
            throw Error(ErrorKind::config, std::string("scene palette lacks class '") + name + "'");
        }
    }
}

double yaw_difference(double a_deg, double b_deg) {
    const double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

namespace {

struct StreetClasses {
    ClassId road, sidewalk, building, sky, tree, car, sign, pole;

    explicit StreetClasses(const ClassPalette& p)
        : road(id(p, "road")),
          sidewalk(id(p, "sidewalk")),
          building(id(p, "building")),
          sky(id(p, "sky")),
          tree(id(p, "tree")),
          car(id(p, "car")),
          sign(id(p, "sign")),
          pole(id(p, "pole")) {}

    static ClassId id(const ClassPalette& p, const char* name) { return static_cast<ClassId>(p.index_of(name)); }
};

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Raster with column wrap-around for painting on the panorama cylinder.
class Canvas {
public:
    Canvas(int w, int h, ClassId fill) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h, fill) {}

    void fill_rect(int x0, int y0, int width, int height, ClassId c) {
        for (int y = std::max(0, y0); y < std::min(h_, y0 + height); ++y) {
            for (int dx = 0; dx < width; ++dx) px_[idx(x0 + dx, y)] = c;
        }
    }

    void fill_disc(double cx, double cy, double r, ClassId c) {
        for (int y = std::max(0, static_cast<int>(cy - r)); y <= std::min(h_ - 1, static_cast<int>(cy + r)); ++y) {
            for (int x = static_cast<int>(std::floor(cx - r)); x <= static_cast<int>(std::ceil(cx + r)); ++x) {
                const double dx = x + 0.5 - cx;
                const double dy = y + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r) px_[idx(x, y)] = c;
            }
        }
    }

    std::vector<ClassId> take() && { return std::move(px_); }

private:
    std::size_t idx(int x, int y) const {
        const int wx = ((x % w_) + w_) % w_;
        return static_cast<std::size_t>(y) * w_ + wx;
    }

    int w_;
    int h_;
    std::vector<ClassId> px_;
};

Position scene_position(const SceneSpec& spec, int index, Rng& rng) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_scenes))));
    const double gx = (index % cols) * spec.grid_spacing_m;
    const double gy = (index / cols) * spec.grid_spacing_m;
    return {gx + rng.uniform(-spec.pano_jitter_m, spec.pano_jitter_m),
            gy + rng.uniform(-spec.pano_jitter_m, spec.pano_jitter_m)};
}

std::string scene_id(const SceneSpec& spec, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", index);
    return spec.id_prefix + buf;
}

}  // namespace

PanoramaRecord generate_scene(const SceneSpec& spec, int index) {
    spec.validate();
    const StreetClasses cls(spec.palette);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
    const int w = spec.pano_w;
    const int h = spec.pano_h;
    const int horizon = h / 2;
    const double sx = w / 512.0;
    auto rows = [h](double frac) { return std::max(1, static_cast<int>(std::lround(frac * h))); };

    PanoramaRecord pano;
    pano.id = scene_id(spec, index);
    pano.position = scene_position(spec, index, rng);

    Canvas canvas(w, h, cls.sky);
    const int walk = rows(0.1);
    canvas.fill_rect(0, horizon, w, walk, cls.sidewalk);
    canvas.fill_rect(0, horizon + walk, w, h - horizon - walk, cls.road);

    // Skyline: buildings, gaps and hedges of random width along the azimuth.
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
    for (int col = 0; col < w;) {
        const int seg = std::min(w - col, uniform_int(rng, static_cast<int>(16 * sx), static_cast<int>(64 * sx)));
        const double kind = rng.uniform();
        if (kind < 0.7) {
            const int height = rows(rng.uniform(0.08, 0.4));
            canvas.fill_rect(start + col, horizon - height, seg, height, cls.building);
        } else if (kind < 0.85) {
            const int height = rows(rng.uniform(0.05, 0.2));
            canvas.fill_rect(start + col, horizon - height, seg, height, cls.tree);
        }
        col += seg;
    }
    for (int t = uniform_int(rng, 1, 4); t > 0; --t) {
        const double r = rng.uniform(0.025, 0.065) * h;
        const double cx = rng.uniform(0.0, w);
        const double cy = horizon - r - rng.uniform(0.02, 0.1) * h;
        canvas.fill_disc(cx, cy, r, cls.tree);
        canvas.fill_rect(static_cast<int>(cx) - 1, static_cast<int>(cy), std::max(2, static_cast<int>(2 * sx)),
                         horizon + rows(0.02) - static_cast<int>(cy), cls.tree);
    }
    for (int p = uniform_int(rng, 1, 3); p > 0; --p) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int top = horizon - rows(rng.uniform(0.12, 0.22));
        canvas.fill_rect(x, top, std::max(2, static_cast<int>(2 * sx)), horizon + rows(0.05) - top, cls.pole);
        canvas.fill_rect(x - static_cast<int>(3 * sx), top - rows(0.03), static_cast<int>(8 * sx) + 1, rows(0.03),
                         cls.sign);
    }
    for (int c = uniform_int(rng, 2, 5); c > 0; --c) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int width = uniform_int(rng, static_cast<int>(14 * sx), static_cast<int>(30 * sx));
        canvas.fill_rect(x, horizon + walk + rows(0.005), width, rows(rng.uniform(0.05, 0.08)), cls.car);
    }

    pano.mask = SemanticMask(w, h, spec.palette.size(), std::move(canvas).take(), spec.palette.id());
    return pano;
}

SynthQuery generate_query(const PanoramaRecord& pano, const SceneSpec& spec, Rng& rng, const std::string& query_id) {
    spec.validate();
    const StreetClasses cls(spec.palette);
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.view_count)));
    const double step = 360.0 / spec.view_count;
    const double yaw = normalize_yaw(k * step + rng.uniform(-spec.yaw_jitter_deg, spec.yaw_jitter_deg));

    ViewSpec vs;
    vs.yaw_deg = yaw;
    vs.fov_deg = spec.fov_deg;
    vs.out_w = spec.view_w;
    vs.out_h = spec.view_h;
    ViewRecord view = gnomonic_view(pano, vs);

    const int vw = spec.view_w;
    const int vh = spec.view_h;
    std::vector<ClassId> px(view.mask.classes().begin(), view.mask.classes().end());
    if (rng.bernoulli(spec.object_change_prob)) {
        Canvas overlay(vw, vh, 0);
        const bool car = rng.bernoulli(0.5);
        const int ow = std::max(2, static_cast<int>(vw * rng.uniform(0.15, 0.3)));
        const int oh = std::max(2, static_cast<int>(vh * rng.uniform(0.08, 0.15)));
        const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(vw - ow + 1)));
        const int oy = car ? vh / 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, vh / 2 - oh))))
                           : static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, vh / 2 - oh))));
        for (int y = oy; y < std::min(vh, oy + oh); ++y) {
            for (int x = ox; x < ox + ow; ++x) px[static_cast<std::size_t>(y) * vw + x] = car ? cls.car : cls.tree;
        }
    }
    const auto n_classes = static_cast<int>(spec.palette.size());
    for (auto& c : px) {
        if (!rng.bernoulli(spec.flip_prob)) continue;
        // Uniform over non-void classes other than the current one.
        const int choices = n_classes - 1 - (c != 0 ? 1 : 0);
        int pick = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(choices)));
        if (c != 0 && pick >= c) ++pick;
        c = static_cast<ClassId>(pick);
    }

    const double r = spec.position_jitter_m * std::sqrt(rng.uniform());
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);

    SynthQuery q;
    q.record.id = query_id;
    q.record.position = {pano.position.x + r * std::cos(theta), pano.position.y + r * std::sin(theta)};
    q.record.mask = SemanticMask(vw, vh, spec.palette.size(), std::move(px), spec.palette.id());
    q.truth.query_id = query_id;
    q.truth.pano_id = pano.id;
    q.truth.yaw_deg = yaw;
    int best = 0;
    for (int v = 1; v < spec.view_count; ++v) {
        if (yaw_difference(yaw, v * step) < yaw_difference(yaw, best * step)) best = v;
    }
    q.truth.true_view = view_id(pano.id, best);
    return q;
}

RgbScoreTable synth_rgb_scores(const Dataset& dataset, const std::vector<QueryTruth>& truth, const SceneSpec& spec,
                               std::vector<std::string>* corrupted) {
    spec.validate();
    const std::size_t nq = truth.size();
    const auto n_bad = static_cast<std::size_t>(std::llround(spec.corruption * static_cast<double>(nq)));
    std::vector<std::size_t> order(nq);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng pick(derive_seed(spec.seed, 0xC0FFEE));
    pick.shuffle(std::span<std::size_t>(order));
    std::vector<bool> demote(nq, false);
    for (std::size_t i = 0; i < n_bad; ++i) demote[order[i]] = true;

    RgbScoreTable table;
    for (std::size_t qi = 0; qi < nq; ++qi) {
        const QueryTruth& t = truth[qi];
        Rng rng(derive_seed(spec.seed, 0x5C0BE000 + qi));
        std::map<std::string, double> score;
        double correct = 0.0;
        for (const auto& v : dataset.views) {
            if (v.parent_pano == t.pano_id) {
                const double overlap = std::max(0.0, 1.0 - yaw_difference(t.yaw_deg, v.yaw_deg) / v.fov_deg);
                score[v.id] = 0.55 + 0.4 * overlap;
            } else {
                score[v.id] = rng.uniform(0.0, 0.4);
            }
        }
        correct = score.at(t.true_view);

        if (demote[qi]) {
            std::vector<std::string> others;
            for (const auto& p : dataset.panoramas) {
                if (p.id != t.pano_id) others.push_back(p.id);
            }
            rng.shuffle(std::span<std::string>(others));
            const int rank = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.top_s - 1 > 0 ? spec.top_s - 1 : 1)));
            const int n_distract = std::min<int>(rank - 1, static_cast<int>(others.size()));
            for (int k = 0; k < n_distract; ++k) {
                std::vector<const ViewRecord*> views;
                for (const auto& v : dataset.views) {
                    if (v.parent_pano == others[k]) views.push_back(&v);
                }
                const auto* v = views[rng.below(views.size())];
                score[v->id] = correct + 0.005 * (n_distract - k);
            }
            if (corrupted) corrupted->push_back(t.query_id);
        }
        for (const auto& [vid, s] : score) table.add(t.query_id, vid, s);
    }
    table.finalize();
    return table;
}

SynthDataset generate_dataset(const SceneSpec& spec) {
    spec.validate();
    SynthDataset out;
    Dataset& ds = out.dataset;
    for (int i = 0; i < spec.n_scenes; ++i) ds.panoramas.push_back(generate_scene(spec, i));
    for (const auto& p : ds.panoramas) {
        auto views = generate_database_views(p, spec.view_count, spec.fov_deg, spec.view_w, spec.view_h);
        std::move(views.begin(), views.end(), std::back_inserter(ds.views));
    }
    for (int i = 0; i < spec.n_scenes; ++i) {
        for (int k = 0; k < spec.queries_per_scene; ++k) {
            Rng rng(derive_seed(spec.seed, 0x9E000000ULL + static_cast<std::uint64_t>(i) * 1000 + k));
            char id[32];
            std::snprintf(id, sizeof id, "q%03d_%d", i, k);
            SynthQuery q = generate_query(ds.panoramas[i], spec, rng, id);
            ds.queries.push_back(std::move(q.record));
            out.truth.push_back(std::move(q.truth));
        }
    }
    ds.reindex();
    out.rgb = synth_rgb_scores(ds, out.truth, spec, &out.corrupted);
    return out;
}

std::vector<SemanticMask> generate_training_masks(const SceneSpec& spec, std::size_t count) {
    spec.validate();
    std::vector<PanoramaRecord> scenes;
    for (int i = 0; i < spec.n_scenes; ++i) scenes.push_back(generate_scene(spec, i));
    std::vector<SemanticMask> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Rng rng(derive_seed(spec.seed, 0x7A000000ULL + k));
        out.push_back(generate_query(scenes[k % scenes.size()], spec, rng, "t").record.mask);
    }
    return out;
}

void write_synth_dataset(const SynthDataset& synth, const ClassPalette& palette, const fs::path& dir) {
    fs::create_directories(dir);
    save_dataset(synth.dataset, palette, dir / "manifest.csv");
    synth.rgb.save(dir / "rgb_scores.csv");
    std::ofstream out(dir / "truth.csv");
    if (!out) throw Error(ErrorKind::io, "cannot write truth.csv");
    out << "query_id,pano_id,yaw_deg,true_view\n";
    for (const auto& t : synth.truth) {
        out << t.query_id << ',' << t.pano_id << ',' << text::format_double(t.yaw_deg) << ',' << t.true_view << '\n';
    }
}

std::vector<QueryTruth> load_truth(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "query_id,pano_id,yaw_deg,true_view") {
        throw Error(ErrorKind::format, path.string() + ": expected header 'query_id,pano_id,yaw_deg,true_view'");
    }
    std::vector<QueryTruth> out;
    while (std::getline(in, line)) {
        const auto t = text::trim(line);
        if (t.empty()) continue;
        const auto c = text::split(t, ',');
        if (c.size() != 4) throw Error(ErrorKind::format, path.string() + ": expected 4 columns");
        out.push_back({c[0], c[1], text::parse_double(c[2], "yaw_deg"), c[3]});
    }
    return out;
}

}  // namespace semloc
