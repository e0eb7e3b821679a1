#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semloc/dataset.hpp"
#include "semloc/rerank.hpp"
#include "semloc/rng.hpp"

namespace semloc {

/// Procedural street-scene generator settings.
struct SceneSpec {
    std::uint64_t seed = 7;
    int n_scenes = 50;
    std::string id_prefix = "p";
    ClassPalette palette = ClassPalette::street();

    int pano_w = 512;
    int pano_h = 256;
    int view_w = 160;
    int view_h = 128;
    int view_count = 12;
    double fov_deg = 90.0;

    double grid_spacing_m = 30.0;  ///< panoramas sit on a square grid ...
    double pano_jitter_m = 5.0;    ///< ... displaced by up to this much per axis

    int queries_per_scene = 1;
    double yaw_jitter_deg = 10.0;
    double position_jitter_m = 2.0;  ///< radius of the query displacement disc
    double flip_prob = 0.02;         ///< per-pixel class change
    double object_change_prob = 0.3; ///< chance of inserting one object into a query

    double corruption = 0.2;  ///< fraction of queries whose correct view is demoted
    int top_s = 10;

    void validate() const;
};

/// Hidden truth of a generated query.
struct QueryTruth {
    std::string query_id;
    std::string pano_id;
    double yaw_deg = 0.0;
    std::string true_view;  ///< database view with the nearest yaw
};

struct SynthQuery {
    QueryRecord record;
    QueryTruth truth;
};

struct SynthDataset {
    Dataset dataset;  ///< panoramas, their database views, queries
    std::vector<QueryTruth> truth;
    RgbScoreTable rgb;
    std::vector<std::string> corrupted;  ///< queries whose correct view was demoted
};

/// Deterministic panorama for scene `index`.
PanoramaRecord generate_scene(const SceneSpec& spec, int index);

/// Gnomonic view of `pano` at a jittered database yaw with class flips and object changes.
SynthQuery generate_query(const PanoramaRecord& pano, const SceneSpec& spec, Rng& rng, const std::string& query_id);

/// Overlap-based RGB scores with exactly round(corruption * queries) planted demotions.
/// Fills `corrupted` with the ids of the demoted queries when non-null.
RgbScoreTable synth_rgb_scores(const Dataset& dataset, const std::vector<QueryTruth>& truth, const SceneSpec& spec,
                               std::vector<std::string>* corrupted = nullptr);

SynthDataset generate_dataset(const SceneSpec& spec);

/// Query-like masks (jittered views with flips) from `spec`'s scenes, for self-supervised training.
std::vector<SemanticMask> generate_training_masks(const SceneSpec& spec, std::size_t count);

/// Smallest angle between two yaws, in [0, 180].
double yaw_difference(double a_deg, double b_deg);

/// Writes manifest.csv, palette.txt, masks/, rgb_scores.csv and truth.csv under `dir`.
void write_synth_dataset(const SynthDataset& synth, const ClassPalette& palette, const std::filesystem::path& dir);

/// `query_id,pano_id,yaw_deg,true_view`.
std::vector<QueryTruth> load_truth(const std::filesystem::path& path);

}  // namespace semloc
