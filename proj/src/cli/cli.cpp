#include "semloc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "semloc/configs.hpp"
#include "semloc/contrastive.hpp"
#include "semloc/dataset.hpp"
#include "semloc/error.hpp"
#include "semloc/evalkit.hpp"
#include "semloc/parallel.hpp"
#include "semloc/pixelsim.hpp"
#include "semloc/projection.hpp"
#include "semloc/rerank.hpp"
#include "semloc/synth.hpp"
#include "semloc/text.hpp"

namespace semloc::cli {

namespace fs = std::filesystem;

std::vector<int> parse_n_list(const std::string& s) {
    std::vector<int> out;
    try {
        if (const auto dots = s.find(".."); dots != std::string::npos) {
            const auto lo = text::parse_int(s.substr(0, dots), "N range");
            const auto hi = text::parse_int(s.substr(dots + 2), "N range");
            for (auto n = lo; n <= hi; ++n) out.push_back(static_cast<int>(n));
        } else {
            for (const auto& tok : text::split(s, ',')) out.push_back(static_cast<int>(text::parse_int(tok, "N list")));
        }
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
    if (out.empty()) throw Error(ErrorKind::config, "empty N list '" + s + "'");
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    try {
        const auto parts = text::split(s, ':');
        if (parts.size() == 3) {
            const double lo = text::parse_double(parts[0], "grid start");
            const double hi = text::parse_double(parts[1], "grid end");
            const double step = text::parse_double(parts[2], "grid step");
            if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::config, "grid needs lo <= hi and step > 0");
            const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
            for (long long k = 0; k <= count; ++k) out.push_back(std::round((lo + k * step) * 1e9) / 1e9);
        } else if (parts.size() == 1) {
            for (const auto& tok : text::split(s, ',')) out.push_back(text::parse_double(tok, "grid"));
        } else {
            throw Error(ErrorKind::config, "grid must be lo:hi:step or a comma list");
        }
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
    return out;
}

namespace {

struct Globals {
    std::uint64_t seed = 7;
    bool seed_given = false;
    unsigned threads = 0;
    std::string log_level = "warn";
    std::string config;
};

KeyValueConfig load_config(const Globals& g) {
    return g.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config);
}

std::optional<ClassPalette> palette_option(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return ClassPalette::load(path);
}

/// Dataset with views; generates them when the manifest has none.
Dataset dataset_with_views(LoadedDataset& loaded, int view_w, int view_h) {
    Dataset ds = std::move(loaded.dataset);
    if (ds.views.empty()) {
        spdlog::info("manifest has no view rows; generating 12 views per panorama");
        for (const auto& p : ds.panoramas) {
            auto views = generate_database_views(p, 12, loaded.meta.view_fov_deg, view_w, view_h);
            std::move(views.begin(), views.end(), std::back_inserter(ds.views));
        }
        ds.reindex();
    }
    return ds;
}

std::vector<SemanticMask> load_mask_dir(const fs::path& dir, const std::optional<ClassPalette>& palette_opt) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a directory: " + dir.string());
    ClassPalette palette = palette_opt ? *palette_opt
                                       : (fs::exists(dir / "palette.txt") ? ClassPalette::load(dir / "palette.txt")
                                                                          : ClassPalette::street());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SemanticMask> masks;
    masks.reserve(files.size());
    for (const auto& f : files) masks.push_back(load_mask(f, palette));
    if (masks.empty()) throw Error(ErrorKind::io, "no .png or .pgm masks in " + dir.string());
    return masks;
}

void write_history(const std::vector<double>& history, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) out << (e + 1) << ',' << text::format_double(history[e]) << '\n';
}

SemanticScorer zero_scorer() {
    return [](const QueryRecord&, const ViewRecord&) { return 0.0; };
}

SemanticScorer scorer_from(const std::string& kind, const std::string& ckpt, const Dataset& ds, unsigned threads) {
    if (kind == "pixel") return make_pixel_scorer();
    if (kind == "embed") {
        if (ckpt.empty()) throw Error(ErrorKind::config, "--scorer embed requires --ckpt");
        auto model = std::make_shared<const nn::EmbeddingModel>(nn::EmbeddingModel::load(ckpt));
        return make_embed_scorer(model, ds.views, threads);
    }
    throw Error(ErrorKind::config, "unknown scorer '" + kind + "' (pixel or embed)");
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << body;
}

std::vector<double> parse_thresholds(const std::string& s) { return parse_grid(s); }

struct E2eOptions {
    std::string out = "e2e_out";
    int train_masks = 200;
    double weight = 0.25;
    int top_s = 10;
    std::string n_values = "1..5";
    std::string thresholds = "5,10,15,20,25";
};

int run_e2e(const Globals& g, const E2eOptions& o, std::ostream& out) {
    KeyValueConfig kv = load_config(g);
    std::set<std::string> known = train_config_keys();
    known.insert(scene_spec_keys().begin(), scene_spec_keys().end());
    known.insert({"train_masks", "w", "s", "n_values", "thresholds"});
    kv.check_known(known);
    if (g.seed_given) kv.set("seed", std::to_string(g.seed));
    if (!kv.has("seed")) kv.set("seed", std::to_string(g.seed));

    const SceneSpec spec = scene_spec_from(kv);
    TrainConfig tc = train_config_from(kv);
    tc.threads = g.threads;
    const int n_train = static_cast<int>(kv.get_int("train_masks", o.train_masks));
    const double weight = kv.get_double("w", o.weight);
    const int top_s = static_cast<int>(kv.get_int("s", o.top_s));
    EvalConfig ec;
    ec.n_values = parse_n_list(kv.get_string("n_values", o.n_values));
    ec.thresholds_m = parse_thresholds(kv.get_string("thresholds", o.thresholds));
    ec.validate();
    if (n_train < 1) throw Error(ErrorKind::config, "train_masks must be >= 1");

    const fs::path root = o.out;
    fs::create_directories(root);

    spdlog::info("e2e: synthesising {} scenes", spec.n_scenes);
    SynthDataset synth = generate_dataset(spec);
    {
        SynthDataset no_views = synth;
        no_views.dataset.views.clear();
        no_views.dataset.reindex();
        write_synth_dataset(no_views, spec.palette, root / "synth");
    }

    spdlog::info("e2e: projecting gnomonic views");
    LoadedDataset loaded = load_dataset(root / "synth" / "manifest.csv");
    Dataset ds = std::move(loaded.dataset);
    for (const auto& p : ds.panoramas) {
        auto views = generate_database_views(p, spec.view_count, spec.fov_deg, spec.view_w, spec.view_h);
        std::move(views.begin(), views.end(), std::back_inserter(ds.views));
    }
    ds.reindex();
    save_dataset(ds, loaded.palette, root / "project" / "manifest.csv");

    spdlog::info("e2e: training on {} masks", n_train);
    SceneSpec train_spec = spec;
    train_spec.seed = derive_seed(spec.seed, 0x7472);
    train_spec.id_prefix = "t";
    const auto masks = generate_training_masks(train_spec, static_cast<std::size_t>(n_train));
    TrainResult trained = train(masks, tc);
    trained.model.save(root / "model.ckpt");
    write_history(trained.loss_history, root / "loss_history.csv");

    spdlog::info("e2e: re-ranking");
    const RgbScoreTable rgb = RgbScoreTable::load(root / "synth" / "rgb_scores.csv");
    rgb.check_views(ds);
    auto model = std::make_shared<const nn::EmbeddingModel>(std::move(trained.model));
    const GroundTruth truth = GroundTruth::from(ds);
    struct Method {
        const char* label;
        SemanticScorer scorer;
        double weight;
    };
    const Method methods[] = {{"rgb-only", zero_scorer(), 0.0},
                              {"pixel-wise", make_pixel_scorer(), weight},
                              {"contrastive", make_embed_scorer(model, ds.views, g.threads), weight}};
    EvalReport report;
    for (const auto& m : methods) {
        const auto results = rerank_all(ds.queries, rgb, ds, m.scorer, m.weight, top_s, g.threads);
        save_results(results, root / (std::string("results_") + m.label + ".csv"));
        report.append(evaluate(results, truth, m.label, ec));
    }
    report.metadata = {{"seed", std::to_string(spec.seed)},
                       {"W", text::format_double(weight)},
                       {"S", std::to_string(top_s)},
                       {"epochs", std::to_string(tc.epochs)},
                       {"train_masks", std::to_string(n_train)}};
    report.save_csv(root / "report.csv");
    write_text(root / "report.txt", report.to_text());
    out << report.to_text();
    return 0;
}

void emit_error(std::ostream& err, const char* kind, const std::string& message, int code) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    j["exit_code"] = code;
    err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semantic verification and re-ranking for visual localization"};
    app.name(args.empty() ? "semloc" : fs::path(args.front()).filename().string());
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version",
                         std::string("semloc ") + kVersion + " (manifest format " + std::to_string(kManifestFormat) +
                             ", checkpoint format " + std::to_string(kCheckpointFormat) + ")");

    Globals g;
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { g.seed = s; g.seed_given = true; }, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
    app.add_option("--config", g.config, "Key-value config file");

    // synth
    std::string spec_path, out_dir;
    int synth_train_masks = 0;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "Scene spec file");
    synth->add_option("--out", out_dir, "Output directory")->required();
    synth->add_option("--train-masks", synth_train_masks, "Also write this many training masks to <out>/train_masks");

    // project
    std::string dataset_path;
    int view_count = 12, view_w = 640, view_h = 480;
    double fov = 90.0;
    auto* project = app.add_subcommand("project", "Generate gnomonic database views");
    project->add_option("--dataset", dataset_path, "Manifest with panoramas")->required();
    project->add_option("--out", out_dir, "Output directory")->required();
    project->add_option("--count", view_count, "Views per panorama");
    project->add_option("--fov", fov, "Horizontal field of view in degrees");
    project->add_option("--width", view_w, "View width");
    project->add_option("--height", view_h, "View height");

    // pixelsim
    std::string query_path, db_path, palette_path;
    auto* pixelsim = app.add_subcommand("pixelsim", "Pixel-wise similarity of two masks");
    pixelsim->add_option("--query", query_path)->required();
    pixelsim->add_option("--db", db_path)->required();
    pixelsim->add_option("--palette", palette_path, "Palette file (default: street)");

    // train
    std::string masks_dir, ckpt_out, history_path;
    auto* trainc = app.add_subcommand("train", "Self-supervised contrastive training");
    trainc->add_option("--masks", masks_dir, "Directory of training masks")->required();
    trainc->add_option("--out", ckpt_out, "Checkpoint path")->required();
    trainc->add_option("--history", history_path, "Loss history CSV (default: <out>.loss.csv)");
    trainc->add_option("--palette", palette_path);

    // finetune
    std::string ckpt_path, pairs_path;
    auto* fine = app.add_subcommand("finetune", "Fine-tune on labelled query/database pairs");
    fine->add_option("--ckpt", ckpt_path)->required();
    fine->add_option("--pairs", pairs_path, "CSV query_mask,db_mask")->required();
    fine->add_option("--out", ckpt_out, "Output checkpoint")->required();
    std::string finetune_mode;
    fine->add_option("--mode", finetune_mode, "Overrides finetune_mode");
    fine->add_option("--palette", palette_path);

    // rerank
    std::string rgb_path, scorer_kind = "pixel", results_out;
    double weight = 0.25;
    int top_s = 10;
    auto* rerank = app.add_subcommand("rerank", "Fuse RGB and semantic scores");
    rerank->add_option("--rgb", rgb_path)->required();
    rerank->add_option("--dataset", dataset_path)->required();
    rerank->add_option("--scorer", scorer_kind)->check(CLI::IsMember({"pixel", "embed"}));
    rerank->add_option("--ckpt", ckpt_path);
    rerank->add_option("--w", weight)->check(CLI::NonNegativeNumber);
    rerank->add_option("--s", top_s)->check(CLI::PositiveNumber);
    rerank->add_option("--out", results_out, "Results CSV")->required();

    // eval
    std::vector<std::string> result_specs;
    std::string n_spec = "1..5", threshold_spec = "5", report_out;
    auto* evalc = app.add_subcommand("eval", "Recall@N of one or more result files");
    evalc->add_option("--results", result_specs, "[label=]results.csv (repeatable)")->required();
    evalc->add_option("--dataset", dataset_path)->required();
    evalc->add_option("--n", n_spec);
    evalc->add_option("--thresholds", threshold_spec);
    evalc->add_option("--out", report_out, "Report CSV");

    // sweep-w
    std::string grid_spec;
    auto* sweepw = app.add_subcommand("sweep-w", "Recall@N across semantic weights");
    sweepw->add_option("--rgb", rgb_path)->required();
    sweepw->add_option("--dataset", dataset_path)->required();
    sweepw->add_option("--scorer", scorer_kind)->check(CLI::IsMember({"pixel", "embed"}));
    sweepw->add_option("--ckpt", ckpt_path);
    sweepw->add_option("--grid", grid_spec, "lo:hi:step or list")->default_val("0.10:0.50:0.05");
    sweepw->add_option("--s", top_s);
    sweepw->add_option("--n", n_spec);
    sweepw->add_option("--thresholds", threshold_spec);
    sweepw->add_option("--out", report_out);

    // sweep-crop
    std::string crop_grid;
    auto* sweepc = app.add_subcommand("sweep-crop", "Recall@N across minimum crop ratios");
    sweepc->add_option("--masks", masks_dir)->required();
    sweepc->add_option("--rgb", rgb_path)->required();
    sweepc->add_option("--dataset", dataset_path)->required();
    sweepc->add_option("--grid", crop_grid)->default_val("0.3:0.9:0.1");
    sweepc->add_option("--w", weight);
    sweepc->add_option("--s", top_s);
    sweepc->add_option("--n", n_spec);
    sweepc->add_option("--thresholds", threshold_spec);
    sweepc->add_option("--out", report_out);
    sweepc->add_option("--palette", palette_path);

    // e2e
    E2eOptions e2e_opts;
    auto* e2e = app.add_subcommand("e2e", "synth -> project -> train -> rerank -> eval");
    e2e->add_option("--out", e2e_opts.out);
    e2e->add_option("--train-masks", e2e_opts.train_masks);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << app.help();
        emit_error(err, "usage", e.what(), 2);
        return 2;
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("semloc", sink);
    logger->set_level(spdlog::level::from_str(g.log_level));
    logger->set_pattern("[%l] %v");
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct RestoreLogger {
        std::shared_ptr<spdlog::logger> prev;
        ~RestoreLogger() { spdlog::set_default_logger(prev); }
    } restore{previous};
    set_default_threads(g.threads);

    try {
        if (synth->parsed()) {
            KeyValueConfig kv = spec_path.empty() ? load_config(g) : KeyValueConfig::load(spec_path);
            kv.check_known(scene_spec_keys());
            if (g.seed_given) kv.set("seed", std::to_string(g.seed));
            const SceneSpec spec = scene_spec_from(kv);
            const SynthDataset ds = generate_dataset(spec);
            write_synth_dataset(ds, spec.palette, out_dir);
            if (synth_train_masks > 0) {
                SceneSpec ts = spec;
                ts.seed = derive_seed(spec.seed, 0x7472);
                ts.id_prefix = "t";
                const fs::path dir = fs::path(out_dir) / "train_masks";
                fs::create_directories(dir);
                spec.palette.save(dir / "palette.txt");
                const auto masks = generate_training_masks(ts, static_cast<std::size_t>(synth_train_masks));
                for (std::size_t i = 0; i < masks.size(); ++i) {
                    char name[32];
                    std::snprintf(name, sizeof name, "t%05zu.png", i);
                    save_mask(masks[i], dir / name);
                }
            }
            out << "wrote " << ds.dataset.panoramas.size() << " panoramas, " << ds.dataset.queries.size()
                << " queries, " << ds.dataset.views.size() << " views to " << out_dir << '\n';
        } else if (project->parsed()) {
            LoadedDataset loaded = load_dataset(dataset_path);
            Dataset ds = std::move(loaded.dataset);
            ds.views.clear();
            for (const auto& p : ds.panoramas) {
                auto views = generate_database_views(p, view_count, fov, view_w, view_h);
                std::move(views.begin(), views.end(), std::back_inserter(ds.views));
            }
            ds.reindex();
            save_dataset(ds, loaded.palette, fs::path(out_dir) / "manifest.csv");
            out << "wrote " << ds.views.size() << " views to " << out_dir << '\n';
        } else if (pixelsim->parsed()) {
            const ClassPalette palette = palette_path.empty() ? ClassPalette::street() : ClassPalette::load(palette_path);
            out << text::format_double(pixelwise_similarity(load_mask(query_path, palette), load_mask(db_path, palette)))
                << '\n';
        } else if (trainc->parsed()) {
            KeyValueConfig kv = load_config(g);
            kv.check_known(train_config_keys());
            if (g.seed_given) kv.set("seed", std::to_string(g.seed));
            TrainConfig tc = train_config_from(kv);
            tc.threads = g.threads;
            const auto masks = load_mask_dir(masks_dir, palette_option(palette_path));
            TrainResult r = train(masks, tc);
            r.model.save(ckpt_out);
            write_history(r.loss_history, history_path.empty() ? ckpt_out + ".loss.csv" : history_path);
            out << "trained " << r.loss_history.size() << " epochs; final mean loss "
                << (r.loss_history.empty() ? 0.0 : r.loss_history.back()) << '\n';
        } else if (fine->parsed()) {
            KeyValueConfig kv = load_config(g);
            kv.check_known(train_config_keys());
            if (g.seed_given) kv.set("seed", std::to_string(g.seed));
            if (!finetune_mode.empty()) kv.set("finetune_mode", finetune_mode);
            if (!kv.has("finetune_mode")) kv.set("finetune_mode", "all_layers");
            TrainConfig tc = train_config_from(kv);
            tc.threads = g.threads;
            const ClassPalette palette = palette_path.empty() ? ClassPalette::street() : ClassPalette::load(palette_path);
            std::ifstream in(pairs_path);
            if (!in) throw Error(ErrorKind::io, "cannot open " + pairs_path);
            std::string line;
            if (!std::getline(in, line) || text::trim(line) != "query_mask,db_mask") {
                throw Error(ErrorKind::format, pairs_path + ": expected header 'query_mask,db_mask'");
            }
            const fs::path base = fs::path(pairs_path).parent_path();
            std::vector<LabeledPair> pairs;
            while (std::getline(in, line)) {
                const auto t = text::trim(line);
                if (t.empty()) continue;
                const auto c = text::split(t, ',');
                if (c.size() != 2) throw Error(ErrorKind::format, pairs_path + ": expected 2 columns");
                pairs.push_back({load_mask(base / c[0], palette), load_mask(base / c[1], palette)});
            }
            TrainResult r = finetune(nn::EmbeddingModel::load(ckpt_path), pairs, tc);
            r.model.save(ckpt_out);
            write_history(r.loss_history, ckpt_out + ".loss.csv");
            out << "fine-tuned (" << to_string(tc.finetune_mode) << ") for " << r.loss_history.size() << " epochs\n";
        } else if (rerank->parsed()) {
            LoadedDataset loaded = load_dataset(dataset_path);
            const Dataset ds = dataset_with_views(loaded, view_w, view_h);
            const RgbScoreTable rgb = RgbScoreTable::load(rgb_path);
            rgb.check_views(ds);
            const auto scorer = scorer_from(scorer_kind, ckpt_path, ds, g.threads);
            const auto results = rerank_all(ds.queries, rgb, ds, scorer, weight, top_s, g.threads);
            save_results(results, results_out);
            out << "re-ranked " << results.size() << " queries\n";
        } else if (evalc->parsed()) {
            LoadedDataset loaded = load_dataset(dataset_path);
            const Dataset ds = dataset_with_views(loaded, view_w, view_h);
            const GroundTruth truth = GroundTruth::from(ds);
            EvalConfig ec;
            ec.n_values = parse_n_list(n_spec);
            ec.thresholds_m = parse_thresholds(threshold_spec);
            EvalReport report;
            for (const auto& spec : result_specs) {
                const auto eq = spec.find('=');
                const std::string label = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
                const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
                report.append(evaluate(load_results(path), truth, label, ec));
            }
            if (!report_out.empty()) report.save_csv(report_out);
            out << report.to_text();
        } else if (sweepw->parsed()) {
            LoadedDataset loaded = load_dataset(dataset_path);
            const Dataset ds = dataset_with_views(loaded, view_w, view_h);
            const RgbScoreTable rgb = RgbScoreTable::load(rgb_path);
            rgb.check_views(ds);
            PipelineInputs in{&ds, &rgb, scorer_from(scorer_kind, ckpt_path, ds, g.threads), top_s, {}, g.threads};
            in.eval.n_values = parse_n_list(n_spec);
            in.eval.thresholds_m = parse_thresholds(threshold_spec);
            const auto grid = parse_grid(grid_spec);
            const SweepTable table = sweep_w(in, grid);
            if (!report_out.empty()) table.save_csv(report_out);
            out << table.to_text();
        } else if (sweepc->parsed()) {
            KeyValueConfig kv = load_config(g);
            kv.check_known(train_config_keys());
            if (g.seed_given) kv.set("seed", std::to_string(g.seed));
            TrainConfig tc = train_config_from(kv);
            tc.threads = g.threads;
            const auto masks = load_mask_dir(masks_dir, palette_option(palette_path));
            LoadedDataset loaded = load_dataset(dataset_path);
            const Dataset ds = dataset_with_views(loaded, view_w, view_h);
            const RgbScoreTable rgb = RgbScoreTable::load(rgb_path);
            rgb.check_views(ds);
            CropSweepInputs in{masks, tc, PipelineInputs{&ds, &rgb, {}, top_s, {}, g.threads}, weight};
            in.pipeline.eval.n_values = parse_n_list(n_spec);
            in.pipeline.eval.thresholds_m = parse_thresholds(threshold_spec);
            const auto grid = parse_grid(crop_grid);
            const SweepTable table = sweep_crop_ratio(in, grid);
            if (!report_out.empty()) table.save_csv(report_out);
            out << table.to_text();
        } else if (e2e->parsed()) {
            return run_e2e(g, e2e_opts, out);
        }
    } catch (const Error& e) {
        const int code = e.kind() == ErrorKind::config ? 3 : 1;
        emit_error(err, to_string(e.kind()), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        emit_error(err, "runtime", e.what(), 1);
        return 1;
    }
    return 0;
}

}  // namespace semloc::cli
