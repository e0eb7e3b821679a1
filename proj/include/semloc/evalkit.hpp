#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semloc/contrastive.hpp"
#include "semloc/dataset.hpp"
#include "semloc/rerank.hpp"

namespace semloc {

/// Query positions and, for every database view, the position of its parent panorama.
struct GroundTruth {
    std::map<std::string, Position> queries;
    std::map<std::string, Position> views;

    static GroundTruth from(const Dataset& dataset);
};

struct EvalConfig {
    std::vector<int> n_values = {1, 2, 3, 4, 5};
    std::vector<double> thresholds_m = {5.0};

    void validate() const;
};

/// Fraction of queries whose top-N holds a view strictly closer than `threshold_m`.
double recall_at_n(const RerankResults& results, const GroundTruth& truth, int n, double threshold_m);

struct EvalRow {
    std::string method;
    int n = 1;
    double threshold_m = 5.0;
    double recall = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::map<std::string, std::string> metadata;

    /// Throws Error(numeric) if recall decreases in N or threshold for any method.
    void validate() const;

    /// `method,N,threshold_m,recall`.
    void save_csv(const std::filesystem::path& path) const;
    std::string to_text() const;

    void append(const EvalReport& other);
};

EvalReport evaluate(const RerankResults& results, const GroundTruth& truth, const std::string& method,
                    const EvalConfig& config = {});

struct ThresholdPoint {
    double threshold_m = 0.0;
    double recall = 0.0;
};

/// Recall@N along ascending thresholds; the output is checked to be nondecreasing.
std::vector<ThresholdPoint> threshold_curve(const RerankResults& results, const GroundTruth& truth, int n,
                                            std::span<const double> thresholds);

/// Everything needed to re-rank and score one configuration.
struct PipelineInputs {
    const Dataset* dataset = nullptr;
    const RgbScoreTable* table = nullptr;
    SemanticScorer scorer;
    int top_s = 10;
    EvalConfig eval;
    unsigned threads = 0;
};

struct SweepRow {
    double value = 0.0;  ///< swept parameter
    int n = 1;
    double threshold_m = 5.0;
    double recall = 0.0;
    std::string flag;
};

struct SweepTable {
    std::string parameter;
    std::vector<SweepRow> rows;

    /// `<parameter>,N,threshold_m,recall,flag`.
    void save_csv(const std::filesystem::path& path) const;
    std::string to_text() const;
    /// Recall of the row for (value, n, threshold); throws if missing.
    double recall(double value, int n, double threshold_m) const;
};

/// Re-ranks and evaluates once per W. W = 0 (the RGB-only baseline) is always included,
/// prepended when the grid lacks it.
SweepTable sweep_w(const PipelineInputs& inputs, std::span<const double> w_grid);

struct CropSweepInputs {
    std::span<const SemanticMask> train_masks;
    TrainConfig train;
    PipelineInputs pipeline;  ///< scorer is replaced by each trained model
    double weight = 0.25;
};

/// One full train + evaluate per minimum crop ratio, same seed throughout. Rows whose
/// augmentation is the identity (ratio 1, no rotation) are flagged "degenerate".
SweepTable sweep_crop_ratio(const CropSweepInputs& inputs, std::span<const double> ratio_grid);

}  // namespace semloc
