#include "semloc/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "semloc/error.hpp"
#include "semloc/parallel.hpp"
#include "semloc/rng.hpp"

namespace semloc {

FinetuneMode parse_finetune_mode(const std::string& s) {
    if (s == "none") return FinetuneMode::none;
    if (s == "last_two_dense") return FinetuneMode::last_two_dense;
    if (s == "add_two_dense") return FinetuneMode::add_two_dense;
    if (s == "all_layers") return FinetuneMode::all_layers;
    throw Error(ErrorKind::config, "unknown finetune mode '" + s + "'");
}

const char* to_string(FinetuneMode mode) {
    switch (mode) {
        case FinetuneMode::none: return "none";
        case FinetuneMode::last_two_dense: return "last_two_dense";
        case FinetuneMode::add_two_dense: return "add_two_dense";
        case FinetuneMode::all_layers: return "all_layers";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (batch_n < 2) throw Error(ErrorKind::config, "batch_n must be >= 2 so every anchor has a negative");
    if (!(temperature > 0.0)) throw Error(ErrorKind::config, "temperature must be > 0");
    if (!(lr >= 0.0)) throw Error(ErrorKind::config, "learning rate must be >= 0");
    if (epochs < 0) throw Error(ErrorKind::config, "epochs must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::config, "momentum must lie in [0, 1)");
    augment.validate();
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Batch Batch::adjacent_pairs(std::vector<std::vector<double>> z) {
    if (z.size() % 2 != 0) throw Error(ErrorKind::invalid_argument, "paired batch needs an even count");
    Batch b;
    b.partner.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) b.partner[i] = i ^ 1U;
    b.z = std::move(z);
    return b;
}

void Batch::validate() const {
    const std::size_t n = z.size();
    if (n < 2) throw Error(ErrorKind::invalid_argument, "batch needs at least 2 embeddings");
    if (partner.size() != n) throw Error(ErrorKind::invalid_argument, "partner index length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = partner[i];
        if (j >= n || j == i || partner[j] != i) {
            throw Error(ErrorKind::invalid_argument, "partner index is not a fixed-point-free involution");
        }
        if (z[i].size() != z[0].size()) throw Error(ErrorKind::shape, "embeddings differ in length");
        for (double v : z[i]) {
            if (std::isnan(v)) throw Error(ErrorKind::numeric, "NaN in embedding " + std::to_string(i));
        }
    }
}

LossResult info_nce_loss(const Batch& batch, double temperature) {
    if (!(temperature > 0.0)) throw Error(ErrorKind::invalid_argument, "temperature must be > 0");
    batch.validate();
    const std::size_t n = batch.z.size();
    const std::size_t dim = batch.z[0].size();
    const double inv_t = 1.0 / temperature;

    std::vector<double> sim(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = i; a < n; ++a) {
            const double s = dot(batch.z[i], batch.z[a]) * inv_t;
            sim[i * n + a] = s;
            sim[a * n + i] = s;
        }
    }

    LossResult out;
    out.grad.assign(n, std::vector<double>(dim, 0.0));
    std::vector<double> prob(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &sim[i * n];
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) m = std::max(m, row[a]);
        }
        double acc = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) acc += std::exp(row[a] - m);
        }
        const double lse = m + std::log(acc);
        const std::size_t j = batch.partner[i];
        out.loss += lse - row[j];

        for (std::size_t a = 0; a < n; ++a) prob[a] = a == i ? 0.0 : std::exp(row[a] - lse);
        // dL_i/dz_i = (sum_a p_ia z_a - z_j) / tau ; dL_i/dz_a = (p_ia - [a == j]) z_i / tau
        auto& gi = out.grad[i];
        for (std::size_t a = 0; a < n; ++a) {
            if (a == i) continue;
            const double coeff = (prob[a] - (a == j ? 1.0 : 0.0)) * inv_t;
            const auto& za = batch.z[a];
            auto& ga = out.grad[a];
            const auto& zi = batch.z[i];
            for (std::size_t d = 0; d < dim; ++d) {
                gi[d] += coeff * za[d];
                ga[d] += coeff * zi[d];
            }
        }
    }
    return out;
}

std::vector<double> embed(const nn::EmbeddingModel& model, const SemanticMask& mask) {
    const auto& in = model.input_shape();
    if (mask.width() != in.w || mask.height() != in.h) {
        throw Error(ErrorKind::shape, "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                          ", model expects " + std::to_string(in.w) + "x" + std::to_string(in.h));
    }
    auto fwd = model.forward(nn::one_hot_encode(mask, static_cast<std::size_t>(in.c)));
    if (!model.cosine()) return std::move(fwd.z.data);
    return nn::l2_normalize(fwd.z.data);
}

double embed_similarity(const nn::EmbeddingModel& model, const SemanticMask& a, const SemanticMask& b) {
    return dot(embed(model, a), embed(model, b));
}

namespace {

/// Parameter ranges that receive SGD updates.
using Trainable = std::vector<nn::EmbeddingModel::ParamRange>;

Trainable all_params(const nn::EmbeddingModel& model) { return {{0, model.param_count()}}; }

/// One SGD step on 2N views laid out as adjacent positive pairs. Returns the reduced loss.
class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, Trainable trainable, std::size_t n_params)
        : cfg_(cfg), trainable_(std::move(trainable)), velocity_(n_params, 0.0) {}

    double step(nn::EmbeddingModel& model, const std::vector<SemanticMask>& views, double lr) {
        const std::size_t n = views.size();
        const auto channels = static_cast<std::size_t>(model.input_shape().c);
        std::vector<nn::Trace> traces(n);
        std::vector<std::vector<double>> raw(n);
        parallel_for(
            n,
            [&](std::size_t i) {
                auto fwd = model.forward(nn::one_hot_encode(views[i], channels));
                raw[i] = fwd.z.data;
                traces[i] = std::move(fwd.trace);
            },
            cfg_.threads);

        std::vector<std::vector<double>> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = model.cosine() ? nn::l2_normalize(raw[i]) : raw[i];
        LossResult loss = info_nce_loss(Batch::adjacent_pairs(std::move(z)), cfg_.temperature);
        const double scale = cfg_.reduction == LossReduction::mean ? 1.0 / static_cast<double>(n) : 1.0;

        std::vector<std::vector<double>> dz(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& g : loss.grad[i]) g *= scale;
            dz[i] = model.cosine() ? nn::l2_normalize_backward(raw[i], loss.grad[i]) : loss.grad[i];
        }
        const double reduced = loss.loss * scale;
        if (!std::isfinite(reduced)) {
            std::ostringstream msg;
            msg << "non-finite loss " << reduced << " (temperature " << cfg_.temperature << ", lr " << lr
                << ", batch " << n << ")";
            throw Error(ErrorKind::numeric, msg.str());
        }
        const std::vector<double> grad = nn::backward_batch(model, traces, dz, cfg_.threads);
        auto params = model.params();
        for (const auto& range : trainable_) {
            for (std::size_t k = range.offset; k < range.offset + range.count; ++k) {
                if (!std::isfinite(grad[k])) throw Error(ErrorKind::numeric, "non-finite gradient");
                velocity_[k] = cfg_.momentum * velocity_[k] + grad[k];
                params[k] -= lr * velocity_[k];
            }
        }
        return reduced;
    }

private:
    const TrainConfig& cfg_;
    Trainable trainable_;
    std::vector<double> velocity_;
};

double epoch_lr(const TrainConfig& cfg, int epoch) {
    if (!cfg.cosine_decay || cfg.epochs <= 1) return cfg.lr;
    return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs));
}

}  // namespace

TrainResult train(std::span<const SemanticMask> dataset, const TrainConfig& config) {
    if (dataset.empty()) throw Error(ErrorKind::invalid_argument, "training set is empty");
    nn::ModelConfig mc = config.model;
    mc.input_w = config.augment.out_w;
    mc.input_h = config.augment.out_h;
    mc.input_channels = static_cast<int>(dataset.front().palette_size());
    mc.seed = derive_seed(config.seed, 0);
    return train(nn::EmbeddingModel::make_default(mc), dataset, config);
}

TrainResult train(nn::EmbeddingModel model, std::span<const SemanticMask> dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw Error(ErrorKind::invalid_argument, "training set is empty");
    const auto& in = model.input_shape();
    if (in.w != config.augment.out_w || in.h != config.augment.out_h) {
        throw Error(ErrorKind::config, "augmentation output size must equal the model input size");
    }
    for (const auto& m : dataset) {
        if (m.palette_size() > static_cast<std::size_t>(in.c)) {
            throw Error(ErrorKind::palette, "training mask palette exceeds model input channels");
        }
    }
    const std::size_t n_batches = dataset.size() / static_cast<std::size_t>(config.batch_n);
    if (n_batches == 0) {
        throw Error(ErrorKind::config, "training set of " + std::to_string(dataset.size()) +
                                           " masks is smaller than batch_n " + std::to_string(config.batch_n));
    }

    Rng rng(derive_seed(config.seed, 1) ^ config.augment.seed);
    Optimizer opt(config, all_params(model), model.param_count());
    std::vector<std::size_t> order(dataset.size());
    TrainResult result{std::move(model), {}};
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        const double lr = epoch_lr(config, epoch);
        double total = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            std::vector<SemanticMask> views;
            views.reserve(2 * config.batch_n);
            for (int k = 0; k < config.batch_n; ++k) {
                const auto& src = dataset[order[b * config.batch_n + k]];
                AugmentedPair pair = make_pair(src, config.augment, rng);
                views.push_back(std::move(pair.first));
                views.push_back(std::move(pair.second));
            }
            total += opt.step(result.model, views, lr);
        }
        result.loss_history.push_back(total / static_cast<double>(n_batches));
    }
    return result;
}

namespace {

/// Indices of the last two dense layers that belong to the projection head.
std::vector<std::size_t> head_dense_layers(const nn::EmbeddingModel& model) {
    std::vector<std::size_t> out;
    for (std::size_t i = model.encoder_layers(); i < model.layer_count(); ++i) {
        if (model.layer(i).kind == nn::LayerKind::dense) out.push_back(i);
    }
    return out;
}

}  // namespace

TrainResult finetune(nn::EmbeddingModel model, std::span<const LabeledPair> pairs, const TrainConfig& config) {
    config.validate();
    if (config.finetune_mode == FinetuneMode::none) {
        throw Error(ErrorKind::config, "finetune requires a finetune_mode other than none");
    }
    if (pairs.size() < 2) throw Error(ErrorKind::invalid_argument, "finetune needs at least 2 labelled pairs");

    Trainable trainable;
    switch (config.finetune_mode) {
        case FinetuneMode::last_two_dense: {
            const auto dense = head_dense_layers(model);
            if (dense.size() < 2) {
                throw Error(ErrorKind::config, "last_two_dense needs a projection head with two dense layers");
            }
            for (std::size_t k = dense.size() - 2; k < dense.size(); ++k) trainable.push_back(model.param_range(dense[k]));
            break;
        }
        case FinetuneMode::add_two_dense: {
            const int width = model.proj_dim();
            const std::size_t before = model.layer_count();
            model.append_head_dense(width, true, derive_seed(config.seed, 101));
            model.append_head_dense(width, true, derive_seed(config.seed, 102));
            for (std::size_t i = before; i < model.layer_count(); ++i) {
                if (model.layer(i).kind == nn::LayerKind::dense) trainable.push_back(model.param_range(i));
            }
            break;
        }
        case FinetuneMode::all_layers:
            trainable = all_params(model);
            break;
        case FinetuneMode::none:
            break;
    }

    const auto& in = model.input_shape();
    std::vector<LabeledPair> prepared;
    prepared.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (p.query.width() != p.db.width() || p.query.height() != p.db.height()) {
            throw Error(ErrorKind::shape, "labelled query and database masks must share dimensions");
        }
        prepared.push_back({resize_nearest(p.query, in.w, in.h), resize_nearest(p.db, in.w, in.h)});
    }

    const std::size_t per_batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_n), prepared.size());
    const std::size_t n_batches = prepared.size() / per_batch;
    Rng rng(derive_seed(config.seed, 3));
    Optimizer opt(config, trainable, model.param_count());
    std::vector<std::size_t> order(prepared.size());
    TrainResult result{std::move(model), {}};
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        const double lr = epoch_lr(config, epoch);
        double total = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            std::vector<SemanticMask> views;
            for (std::size_t k = 0; k < per_batch; ++k) {
                const auto& p = prepared[order[b * per_batch + k]];
                views.push_back(p.query);
                views.push_back(p.db);
            }
            total += opt.step(result.model, views, lr);
        }
        result.loss_history.push_back(total / static_cast<double>(n_batches));
    }
    return result;
}

}  // namespace semloc
