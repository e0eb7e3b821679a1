#include "semloc/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "semloc/error.hpp"
#include "semloc/parallel.hpp"
#include "semloc/rng.hpp"

namespace semloc::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

int conv_out(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

/// cols[(c*k + ky)*k + kx][oy*ow + ox] = in[c][oy*s + ky - p][ox*s + kx - p] (0 outside).
void im2col(std::span<const double> in, const Shape& is, const LayerSpec& l, const Shape& os,
            std::vector<double>& cols) {
    const int k = l.kernel;
    const std::size_t p = static_cast<std::size_t>(os.h) * os.w;
    cols.assign(static_cast<std::size_t>(is.c) * k * k * p, 0.0);
    for (int c = 0; c < is.c; ++c) {
        const double* plane = in.data() + static_cast<std::size_t>(c) * is.h * is.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols.data() + (static_cast<std::size_t>(c * k + ky) * k + kx) * p;
                for (int oy = 0; oy < os.h; ++oy) {
                    const int iy = oy * l.stride + ky - l.padding;
                    if (iy < 0 || iy >= is.h) continue;
                    for (int ox = 0; ox < os.w; ++ox) {
                        const int ix = ox * l.stride + kx - l.padding;
                        if (ix < 0 || ix >= is.w) continue;
                        row[oy * os.w + ox] = plane[iy * is.w + ix];
                    }
                }
            }
        }
    }
}

void col2im(std::span<const double> cols, const Shape& is, const LayerSpec& l, const Shape& os,
            std::span<double> din) {
    const int k = l.kernel;
    const std::size_t p = static_cast<std::size_t>(os.h) * os.w;
    for (int c = 0; c < is.c; ++c) {
        double* plane = din.data() + static_cast<std::size_t>(c) * is.h * is.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols.data() + (static_cast<std::size_t>(c * k + ky) * k + kx) * p;
                for (int oy = 0; oy < os.h; ++oy) {
                    const int iy = oy * l.stride + ky - l.padding;
                    if (iy < 0 || iy >= is.h) continue;
                    for (int ox = 0; ox < os.w; ++ox) {
                        const int ix = ox * l.stride + kx - l.padding;
                        if (ix < 0 || ix >= is.w) continue;
                        plane[iy * is.w + ix] += row[oy * os.w + ox];
                    }
                }
            }
        }
    }
}

/// Forward of one layer. `cache` may be null when no backward pass follows.
std::vector<double> layer_forward(const LayerSpec& l, const Shape& is, const Shape& os,
                                  std::span<const double> w, std::span<const double> in,
                                  Trace::LayerCache* cache) {
    std::vector<double> out(os.size());
    switch (l.kind) {
        case LayerKind::conv: {
            std::vector<double> local_cols;
            std::vector<double>& cols = cache ? cache->cols : local_cols;
            im2col(in, is, l, os, cols);
            const std::size_t ck = static_cast<std::size_t>(is.c) * l.kernel * l.kernel;
            const std::size_t p = static_cast<std::size_t>(os.h) * os.w;
            CMapR weights(w.data(), os.c, static_cast<Eigen::Index>(ck));
            CMapR x(cols.data(), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(p));
            MapR y(out.data(), os.c, static_cast<Eigen::Index>(p));
            y.noalias() = weights * x;
            CVec bias(w.data() + os.c * ck, os.c);
            y.colwise() += bias;
            break;
        }
        case LayerKind::relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        case LayerKind::maxpool: {
            if (cache) cache->argmax.assign(out.size(), 0);
            for (int c = 0; c < os.c; ++c) {
                for (int oy = 0; oy < os.h; ++oy) {
                    for (int ox = 0; ox < os.w; ++ox) {
                        int best = -1;
                        double best_v = 0.0;
                        for (int ky = 0; ky < l.kernel; ++ky) {
                            for (int kx = 0; kx < l.kernel; ++kx) {
                                const int idx = (c * is.h + oy * l.stride + ky) * is.w + ox * l.stride + kx;
                                if (best < 0 || in[idx] > best_v) {
                                    best = idx;
                                    best_v = in[idx];
                                }
                            }
                        }
                        const std::size_t o = (static_cast<std::size_t>(c) * os.h + oy) * os.w + ox;
                        out[o] = best_v;
                        if (cache) cache->argmax[o] = best;
                    }
                }
            }
            break;
        }
        case LayerKind::globalavgpool: {
            const std::size_t hw = static_cast<std::size_t>(is.h) * is.w;
            for (int c = 0; c < is.c; ++c) {
                const double* plane = in.data() + c * hw;
                out[c] = std::accumulate(plane, plane + hw, 0.0) / static_cast<double>(hw);
            }
            break;
        }
        case LayerKind::dense: {
            const auto n_in = static_cast<Eigen::Index>(is.size());
            CMapR weights(w.data(), os.c, n_in);
            CVec x(in.data(), n_in);
            CVec bias(w.data() + static_cast<std::size_t>(os.c) * n_in, os.c);
            Vec y(out.data(), os.c);
            y.noalias() = weights * x + bias;
            break;
        }
    }
    return out;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw Error(ErrorKind::shape, "tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    data.assign(n, 0.0);
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_) : Tensor(std::move(shape_)) {
    if (data_.size() != data.size()) throw Error(ErrorKind::shape, "tensor data length does not match shape");
    data = std::move(data_);
}

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::globalavgpool: return "globalavgpool";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

LayerSpec LayerSpec::conv(int channels, int kernel, int stride, int padding) {
    return {LayerKind::conv, channels, kernel, stride, padding < 0 ? kernel / 2 : padding};
}

EmbeddingModel::EmbeddingModel(Shape input, std::vector<LayerSpec> encoder, std::vector<LayerSpec> head,
                               std::uint64_t seed, bool cosine)
    : input_(input), encoder_count_(encoder.size()), cosine_(cosine) {
    if (encoder.empty() || head.empty()) {
        throw Error(ErrorKind::shape, "model needs at least one encoder layer and one head layer");
    }
    layers_ = std::move(encoder);
    layers_.insert(layers_.end(), head.begin(), head.end());
    build_shapes();
    for (std::size_t i = 0; i < layers_.size(); ++i) init_layer(i, derive_seed(seed, i));
}

EmbeddingModel EmbeddingModel::make_default(const ModelConfig& cfg) {
    std::vector<LayerSpec> encoder;
    for (int ch : cfg.conv_channels) {
        encoder.push_back(LayerSpec::conv(ch, 3, 2, 1));
        encoder.push_back(LayerSpec::relu());
    }
    encoder.push_back(LayerSpec::globalavgpool());
    encoder.push_back(LayerSpec::dense(cfg.embed_dim));
    std::vector<LayerSpec> head = {LayerSpec::dense(cfg.embed_dim), LayerSpec::relu(),
                                   LayerSpec::dense(cfg.proj_dim)};
    return EmbeddingModel({cfg.input_channels, cfg.input_h, cfg.input_w}, std::move(encoder), std::move(head),
                          cfg.seed, cfg.cosine);
}

void EmbeddingModel::build_shapes() {
    if (input_.c <= 0 || input_.h <= 0 || input_.w <= 0) throw Error(ErrorKind::shape, "input shape must be positive");
    shapes_.assign(1, input_);
    ranges_.clear();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const Shape is = shapes_.back();
        Shape os = is;
        std::size_t count = 0;
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
        switch (l.kind) {
            case LayerKind::conv:
                if (l.units <= 0 || l.kernel <= 0 || l.stride <= 0 || l.padding < 0) {
                    throw Error(ErrorKind::shape, where + ": invalid hyperparameters");
                }
                os = {l.units, conv_out(is.h, l.kernel, l.stride, l.padding),
                      conv_out(is.w, l.kernel, l.stride, l.padding)};
                if (is.h + 2 * l.padding < l.kernel || is.w + 2 * l.padding < l.kernel) {
                    throw Error(ErrorKind::shape, where + ": input smaller than kernel");
                }
                count = static_cast<std::size_t>(l.units) * is.c * l.kernel * l.kernel + l.units;
                break;
            case LayerKind::relu:
                break;
            case LayerKind::maxpool:
                if (l.kernel <= 0 || l.stride <= 0 || is.h < l.kernel || is.w < l.kernel) {
                    throw Error(ErrorKind::shape, where + ": window does not fit input");
                }
                os = {is.c, conv_out(is.h, l.kernel, l.stride, 0), conv_out(is.w, l.kernel, l.stride, 0)};
                break;
            case LayerKind::globalavgpool:
                os = {is.c, 1, 1};
                break;
            case LayerKind::dense:
                if (l.units <= 0) throw Error(ErrorKind::shape, where + ": width must be positive");
                os = {l.units, 1, 1};
                count = static_cast<std::size_t>(l.units) * is.size() + l.units;
                break;
        }
        shapes_.push_back(os);
        ranges_.push_back({offset, count});
        offset += count;
    }
    params_.resize(offset, 0.0);
}

void EmbeddingModel::init_layer(std::size_t i, std::uint64_t seed) {
    const LayerSpec& l = layers_[i];
    const ParamRange range = ranges_[i];
    if (range.count == 0) return;
    const Shape& is = shapes_[i];
    std::size_t n_weights = 0;
    double fan_in = 0.0;
    double fan_out = 0.0;
    if (l.kind == LayerKind::conv) {
        n_weights = range.count - l.units;
        fan_in = static_cast<double>(is.c) * l.kernel * l.kernel;
        fan_out = static_cast<double>(l.units) * l.kernel * l.kernel;
    } else {
        n_weights = range.count - l.units;
        fan_in = static_cast<double>(is.size());
        fan_out = l.units;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed);
    for (std::size_t k = 0; k < n_weights; ++k) params_[range.offset + k] = rng.uniform(-limit, limit);
    for (std::size_t k = n_weights; k < range.count; ++k) params_[range.offset + k] = 0.0;
}

void EmbeddingModel::append_head_dense(int width, bool relu_before, std::uint64_t seed) {
    if (relu_before) layers_.push_back(LayerSpec::relu());
    layers_.push_back(LayerSpec::dense(width));
    std::vector<double> old = std::move(params_);
    build_shapes();
    std::copy(old.begin(), old.end(), params_.begin());
    init_layer(layers_.size() - 1, seed);
}

ForwardResult EmbeddingModel::forward(const Tensor& input) const {
    if (input.size() != input_.size()) {
        throw Error(ErrorKind::shape, "input has " + std::to_string(input.size()) + " values, model expects " +
                                          std::to_string(input_.size()));
    }
    ForwardResult result;
    Trace& trace = result.trace;
    trace.layers.resize(layers_.size());
    std::vector<double> act = input.data;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto w = std::span<const double>(params_).subspan(ranges_[i].offset, ranges_[i].count);
        std::vector<double> next = layer_forward(layers_[i], shapes_[i], shapes_[i + 1], w, act, &trace.layers[i]);
        trace.layers[i].input = std::move(act);
        act = std::move(next);
        if (i + 1 == encoder_count_) trace.r = act;
    }
    trace.z = act;
    result.r = Tensor({static_cast<int>(trace.r.size())}, trace.r);
    result.z = Tensor({static_cast<int>(trace.z.size())}, trace.z);
    return result;
}

std::vector<double> EmbeddingModel::forward_from(std::size_t first, std::span<const double> activation,
                                                 std::vector<std::vector<double>>* inputs) const {
    if (first >= layers_.size() || activation.size() != shapes_[first].size()) {
        throw Error(ErrorKind::shape, "activation does not match layer input");
    }
    std::vector<double> act(activation.begin(), activation.end());
    if (inputs) inputs->clear();
    for (std::size_t i = first; i < layers_.size(); ++i) {
        if (inputs) inputs->push_back(act);
        const auto w = std::span<const double>(params_).subspan(ranges_[i].offset, ranges_[i].count);
        act = layer_forward(layers_[i], shapes_[i], shapes_[i + 1], w, act, nullptr);
    }
    return act;
}

void EmbeddingModel::backward(const Trace& trace, std::span<const double> dz, std::span<double> grad) const {
    if (trace.empty() || trace.layers.size() != layers_.size()) {
        throw Error(ErrorKind::invalid_argument, "backward called without a matching forward pass");
    }
    if (dz.size() != shapes_.back().size()) throw Error(ErrorKind::shape, "upstream gradient has wrong length");
    if (grad.size() != params_.size()) throw Error(ErrorKind::shape, "gradient buffer has wrong length");

    std::vector<double> dout(dz.begin(), dz.end());
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const LayerSpec& l = layers_[i];
        const Shape& is = shapes_[i];
        const Shape& os = shapes_[i + 1];
        const auto& cache = trace.layers[i];
        const ParamRange range = ranges_[i];
        const bool need_din = i > 0;
        std::vector<double> din;
        switch (l.kind) {
            case LayerKind::conv: {
                const auto ck = static_cast<Eigen::Index>(is.c) * l.kernel * l.kernel;
                const auto p = static_cast<Eigen::Index>(os.h) * os.w;
                CMapR dy(dout.data(), os.c, p);
                CMapR x(cache.cols.data(), ck, p);
                MapR dw(grad.data() + range.offset, os.c, ck);
                dw.noalias() += dy * x.transpose();
                Vec db(grad.data() + range.offset + os.c * ck, os.c);
                db += dy.rowwise().sum();
                if (need_din) {
                    CMapR weights(params_.data() + range.offset, os.c, ck);
                    std::vector<double> dcols(static_cast<std::size_t>(ck * p));
                    MapR dc(dcols.data(), ck, p);
                    dc.noalias() = weights.transpose() * dy;
                    din.assign(is.size(), 0.0);
                    col2im(dcols, is, l, os, din);
                }
                break;
            }
            case LayerKind::relu:
                din.resize(is.size());
                for (std::size_t k = 0; k < din.size(); ++k) din[k] = cache.input[k] > 0.0 ? dout[k] : 0.0;
                break;
            case LayerKind::maxpool:
                din.assign(is.size(), 0.0);
                for (std::size_t k = 0; k < dout.size(); ++k) din[cache.argmax[k]] += dout[k];
                break;
            case LayerKind::globalavgpool: {
                const std::size_t hw = static_cast<std::size_t>(is.h) * is.w;
                din.resize(is.size());
                for (int c = 0; c < is.c; ++c) {
                    const double g = dout[c] / static_cast<double>(hw);
                    std::fill(din.begin() + c * hw, din.begin() + (c + 1) * hw, g);
                }
                break;
            }
            case LayerKind::dense: {
                const auto n_in = static_cast<Eigen::Index>(is.size());
                CVec dy(dout.data(), os.c);
                CVec x(cache.input.data(), n_in);
                MapR dw(grad.data() + range.offset, os.c, n_in);
                dw.noalias() += dy * x.transpose();
                Vec db(grad.data() + range.offset + static_cast<std::size_t>(os.c) * n_in, os.c);
                db += dy;
                if (need_din) {
                    CMapR weights(params_.data() + range.offset, os.c, n_in);
                    din.resize(is.size());
                    Vec dx(din.data(), n_in);
                    dx.noalias() = weights.transpose() * dy;
                }
                break;
            }
        }
        dout = std::move(din);
    }
}

namespace {

constexpr const char* kMagic = "semloc-model";
constexpr int kFormatVersion = 1;

LayerKind parse_kind(const std::string& s) {
    for (LayerKind k : {LayerKind::conv, LayerKind::relu, LayerKind::maxpool, LayerKind::globalavgpool,
                        LayerKind::dense}) {
        if (s == to_string(k)) return k;
    }
    throw Error(ErrorKind::format, "unknown layer kind '" + s + "' in checkpoint");
}

}  // namespace

void EmbeddingModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write checkpoint " + path.string());
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "input " << input_.c << ' ' << input_.h << ' ' << input_.w << '\n';
    out << "cosine " << (cosine_ ? 1 : 0) << '\n';
    auto write_layers = [&](const char* name, std::size_t begin, std::size_t end) {
        out << name << ' ' << (end - begin) << '\n';
        for (std::size_t i = begin; i < end; ++i) {
            const auto& l = layers_[i];
            out << to_string(l.kind) << ' ' << l.units << ' ' << l.kernel << ' ' << l.stride << ' ' << l.padding
                << '\n';
        }
    };
    write_layers("encoder", 0, encoder_count_);
    write_layers("head", encoder_count_, layers_.size());
    out << "params " << params_.size() << '\n';
    char buf[40];
    for (double v : params_) {
        std::snprintf(buf, sizeof buf, "%a", v);
        out << buf << '\n';
    }
    if (!out) throw Error(ErrorKind::io, "failed writing checkpoint " + path.string());
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());
    auto expect = [&](const std::string& word) {
        std::string got;
        if (!(in >> got) || got != word) {
            throw Error(ErrorKind::format, path.string() + ": expected '" + word + "' in checkpoint");
        }
    };
    expect(kMagic);
    int version = 0;
    in >> version;
    if (version != kFormatVersion) {
        throw Error(ErrorKind::format, path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    Shape input;
    int cosine = 1;
    expect("input");
    in >> input.c >> input.h >> input.w;
    expect("cosine");
    in >> cosine;
    auto read_layers = [&](const char* name) {
        expect(name);
        std::size_t n = 0;
        in >> n;
        std::vector<LayerSpec> layers(n);
        for (auto& l : layers) {
            std::string kind;
            in >> kind >> l.units >> l.kernel >> l.stride >> l.padding;
            l.kind = parse_kind(kind);
        }
        return layers;
    };
    auto encoder = read_layers("encoder");
    auto head = read_layers("head");
    if (!in) throw Error(ErrorKind::format, path.string() + ": malformed checkpoint header");
    EmbeddingModel model(input, std::move(encoder), std::move(head), 0, cosine != 0);
    expect("params");
    std::size_t n = 0;
    in >> n;
    if (n != model.param_count()) {
        throw Error(ErrorKind::shape, path.string() + ": checkpoint has " + std::to_string(n) +
                                          " parameters, layers imply " + std::to_string(model.param_count()));
    }
    std::string tok;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(in >> tok)) throw Error(ErrorKind::format, path.string() + ": truncated parameter list");
        char* end = nullptr;
        model.params_[k] = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(model.params_[k])) {
            throw Error(ErrorKind::format, path.string() + ": bad parameter value '" + tok + "'");
        }
    }
    return model;
}

Tensor one_hot_encode(const SemanticMask& mask, std::size_t palette_size) {
    if (palette_size < mask.palette_size()) {
        throw Error(ErrorKind::palette, "one-hot channel count smaller than the mask palette");
    }
    Tensor t({static_cast<int>(palette_size), mask.height(), mask.width()});
    const std::size_t hw = mask.size();
    const auto classes = mask.classes();
    for (std::size_t i = 0; i < hw; ++i) t.data[classes[i] * hw + i] = 1.0;
    return t;
}

std::vector<double> l2_normalize(std::span<const double> z) {
    double sq = 0.0;
    for (double v : z) sq += v * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw Error(ErrorKind::degenerate, "cannot normalise a zero or non-finite vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * inv;
    return out;
}

std::vector<double> l2_normalize_backward(std::span<const double> z, std::span<const double> grad_normalized) {
    const std::vector<double> n = l2_normalize(z);
    double norm = 0.0;
    for (double v : z) norm += v * v;
    norm = std::sqrt(norm);
    double dot = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) dot += n[i] * grad_normalized[i];
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < n.size(); ++i) out[i] = (grad_normalized[i] - n[i] * dot) / norm;
    return out;
}

std::vector<double> backward_batch(const EmbeddingModel& model, std::span<const Trace> traces,
                                   std::span<const std::vector<double>> dz, unsigned threads) {
    if (traces.size() != dz.size()) throw Error(ErrorKind::shape, "one upstream gradient per trace required");
    std::vector<std::vector<double>> per_sample(traces.size());
    parallel_for(
        traces.size(),
        [&](std::size_t i) {
            per_sample[i].assign(model.param_count(), 0.0);
            model.backward(traces[i], dz[i], per_sample[i]);
        },
        threads);
    std::vector<double> total(model.param_count(), 0.0);
    for (const auto& g : per_sample) {
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += g[k];
    }
    return total;
}

}  // namespace semloc::nn
