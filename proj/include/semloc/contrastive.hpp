#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semloc/augment.hpp"
#include "semloc/mask.hpp"
#include "semloc/nn.hpp"

namespace semloc {

enum class FinetuneMode { none, last_two_dense, add_two_dense, all_layers };

FinetuneMode parse_finetune_mode(const std::string& s);
const char* to_string(FinetuneMode mode);

/// How per-anchor losses are combined into the optimised scalar.
enum class LossReduction { sum, mean };

struct TrainConfig {
    int batch_n = 16;            ///< source images per batch; the batch holds 2N views
    double temperature = 0.07;
    double lr = 0.05;
    int epochs = 30;
    std::uint64_t seed = 0;
    double momentum = 0.0;
    bool cosine_decay = false;
    LossReduction reduction = LossReduction::mean;
    FinetuneMode finetune_mode = FinetuneMode::none;
    AugmentConfig augment;
    nn::ModelConfig model;
    unsigned threads = 0;

    void validate() const;
};

/// 2N embeddings and the partner involution j(i).
struct Batch {
    std::vector<std::vector<double>> z;
    std::vector<std::size_t> partner;

    /// Pairs (0,1), (2,3), ...; z.size() must be even.
    static Batch adjacent_pairs(std::vector<std::vector<double>> z);

    /// Throws unless partner is a fixed-point-free involution over equal-length embeddings.
    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    std::vector<std::vector<double>> grad;  ///< dLoss/dz_i
};

/// Summed InfoNCE loss over all 2N anchors with its exact gradient. Each anchor's
/// denominator runs over the 2N - 1 other embeddings.
LossResult info_nce_loss(const Batch& batch, double temperature);

struct TrainResult {
    nn::EmbeddingModel model;
    std::vector<double> loss_history;  ///< mean per-anchor loss of each epoch
};

/// Self-supervised training on augmented pairs with plain SGD.
TrainResult train(std::span<const SemanticMask> dataset, const TrainConfig& config);

/// Same, starting from an existing model.
TrainResult train(nn::EmbeddingModel model, std::span<const SemanticMask> dataset, const TrainConfig& config);

struct LabeledPair {
    SemanticMask query;
    SemanticMask db;
};

/// Retrains with true (query, db) pairs as positives. Which parameters move depends on
/// config.finetune_mode.
TrainResult finetune(nn::EmbeddingModel model, std::span<const LabeledPair> pairs, const TrainConfig& config);

/// z for one mask (unit norm when the model uses cosine similarity). The mask must already
/// have the model's input size.
std::vector<double> embed(const nn::EmbeddingModel& model, const SemanticMask& mask);

double embed_similarity(const nn::EmbeddingModel& model, const SemanticMask& a, const SemanticMask& b);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace semloc
