#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semloc/mask.hpp"

namespace semloc::nn {

/// Row-major dense array of doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_);
    Tensor(std::vector<int> shape_, std::vector<double> data_);

    std::size_t size() const noexcept { return data.size(); }
};

/// (channels, height, width). Dense outputs are (width, 1, 1).
struct Shape {
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
    bool operator==(const Shape&) const = default;
};

enum class LayerKind { conv, relu, maxpool, globalavgpool, dense };

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int units = 0;    ///< conv output channels or dense width
    int kernel = 0;   ///< conv / maxpool window
    int stride = 1;
    int padding = 0;

    static LayerSpec conv(int channels, int kernel = 3, int stride = 1, int padding = -1);
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec maxpool(int kernel = 2, int stride = 2) { return {LayerKind::maxpool, 0, kernel, stride, 0}; }
    static LayerSpec globalavgpool() { return {LayerKind::globalavgpool}; }
    static LayerSpec dense(int width) { return {LayerKind::dense, width}; }

    bool operator==(const LayerSpec&) const = default;
};

/// Architecture knobs for the default conv encoder + dense projection head.
struct ModelConfig {
    int input_w = 80;
    int input_h = 64;
    int input_channels = 9;  ///< palette size
    std::vector<int> conv_channels = {16, 32, 64};
    int embed_dim = 64;      ///< r
    int proj_dim = 128;      ///< z
    bool cosine = true;      ///< L2-normalise z before dot products
    std::uint64_t seed = 0;
};

/// Per-sample record of a forward pass, consumed by backward().
struct Trace {
    struct LayerCache {
        std::vector<double> input;
        std::vector<double> cols;  ///< conv: im2col matrix
        std::vector<int> argmax;   ///< maxpool: flat input index per output
    };
    std::vector<LayerCache> layers;
    std::vector<double> r;
    std::vector<double> z;

    bool empty() const noexcept { return layers.empty(); }
};

struct ForwardResult {
    Tensor r;
    Tensor z;
    Trace trace;
};

/// Encoder followed by projection head, with all parameters in one flat vector.
///
/// Layers [0, encoder_layers()) form the encoder whose output is r; the remaining layers
/// form the head whose output is z. Each parameterised layer stores its weights
/// (row-major, output-major) followed by its biases.
class EmbeddingModel {
public:
    struct ParamRange {
        std::size_t offset = 0;
        std::size_t count = 0;

        bool operator==(const ParamRange&) const = default;
    };

    EmbeddingModel(Shape input, std::vector<LayerSpec> encoder, std::vector<LayerSpec> head,
                   std::uint64_t seed = 0, bool cosine = true);

    static EmbeddingModel make_default(const ModelConfig& config);

    const Shape& input_shape() const noexcept { return input_; }
    int embed_dim() const noexcept { return static_cast<int>(shapes_[encoder_count_].size()); }
    int proj_dim() const noexcept { return static_cast<int>(shapes_.back().size()); }
    bool cosine() const noexcept { return cosine_; }
    void set_cosine(bool cosine) noexcept { cosine_ = cosine; }

    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t encoder_layers() const noexcept { return encoder_count_; }
    const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
    const Shape& input_shape_of(std::size_t i) const { return shapes_.at(i); }
    const Shape& output_shape_of(std::size_t i) const { return shapes_.at(i + 1); }
    ParamRange param_range(std::size_t i) const { return ranges_.at(i); }

    std::size_t param_count() const noexcept { return params_.size(); }
    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }

    /// Appends a freshly initialised dense layer (and optionally a ReLU before it) to the head.
    void append_head_dense(int width, bool relu_before, std::uint64_t seed);

    ForwardResult forward(const Tensor& input) const;

    /// Runs layers [first, layer_count()) on an activation shaped like input_shape_of(first)
    /// and returns z. When `inputs` is given, it receives the input of every layer run.
    std::vector<double> forward_from(std::size_t first, std::span<const double> activation,
                                     std::vector<std::vector<double>>* inputs = nullptr) const;

    /// Accumulates dLoss/dparams for one sample into `grad` given dLoss/dz.
    void backward(const Trace& trace, std::span<const double> dz, std::span<double> grad) const;

    void save(const std::filesystem::path& path) const;
    static EmbeddingModel load(const std::filesystem::path& path);

    bool operator==(const EmbeddingModel&) const = default;

private:
    void build_shapes();
    void init_layer(std::size_t i, std::uint64_t seed);

    Shape input_;
    std::vector<LayerSpec> layers_;
    std::size_t encoder_count_ = 0;
    bool cosine_ = true;
    std::vector<Shape> shapes_;          ///< shapes_[i] is the input of layer i; back() is z
    std::vector<ParamRange> ranges_;
    std::vector<double> params_;
};

/// Mask as (palette_size, h, w) one-hot channels.
Tensor one_hot_encode(const SemanticMask& mask, std::size_t palette_size);

/// Unit-norm copy; throws Error(degenerate) for the zero vector.
std::vector<double> l2_normalize(std::span<const double> z);

/// Given n = z/|z| and dL/dn, returns dL/dz.
std::vector<double> l2_normalize_backward(std::span<const double> z, std::span<const double> grad_normalized);

/// Sum of per-sample gradients, reduced in sample order so the result is independent of
/// `threads`.
std::vector<double> backward_batch(const EmbeddingModel& model, std::span<const Trace> traces,
                                   std::span<const std::vector<double>> dz, unsigned threads = 0);

}  // namespace semloc::nn
