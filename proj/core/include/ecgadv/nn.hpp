#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "ecgadv/data.hpp"

namespace ecgadv {

/// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  double& operator[](std::size_t i) noexcept { return data[i]; }
  double operator[](std::size_t i) const noexcept { return data[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Layer vocabulary. Conv1D uses valid padding: out_len = (in_len - k) / stride + 1.
// MaxPool uses non-overlapping windows of `width`; a trailing partial window is dropped.
// Dense flattens a (channels, length) activation in row-major order.
struct Conv1D {
  std::size_t out_channels;
  std::size_t kernel_size;
  std::size_t stride = 1;
  friend bool operator==(const Conv1D&, const Conv1D&) = default;
};
struct ReLU {
  friend bool operator==(const ReLU&, const ReLU&) = default;
};
struct MaxPool {
  std::size_t width;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};
struct GlobalAveragePool {
  friend bool operator==(const GlobalAveragePool&, const GlobalAveragePool&) = default;
};
struct Dense {
  std::size_t out_features;
  friend bool operator==(const Dense&, const Dense&) = default;
};

using Layer = std::variant<Conv1D, ReLU, MaxPool, GlobalAveragePool, Dense>;

/// Ordered layer list over a single-channel input of fixed length.
///
/// The constructor walks the layers once and rejects any chain whose shapes
/// do not line up or whose final output is not `n_classes` logits.
class ModelSpec {
 public:
  ModelSpec(std::vector<Layer> layers, std::size_t input_length, std::size_t n_classes = kNumClasses);

  /// 4 x [Conv1D(k=7, stride 2) -> ReLU] with 8/16/32/32 channels, then
  /// GlobalAveragePool and Dense(4).
  static ModelSpec default_architecture(std::size_t input_length = 512);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t input_length() const noexcept { return input_length_; }
  std::size_t n_classes() const noexcept { return n_classes_; }

  /// Activation shape entering layer i (index 0 is the input, {1, input_length});
  /// the last entry is the logits shape {n_classes}.
  const std::vector<std::vector<std::size_t>>& activation_shapes() const noexcept { return shapes_; }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.layers_ == b.layers_ && a.input_length_ == b.input_length_ && a.n_classes_ == b.n_classes_;
  }

 private:
  std::vector<Layer> layers_;
  std::size_t input_length_;
  std::size_t n_classes_;
  std::vector<std::vector<std::size_t>> shapes_;
};

struct LayerParams {
  Tensor weight;  // Conv1D: {out, in, k}; Dense: {out, in}; empty otherwise
  Tensor bias;    // {out}; empty for parameter-free layers
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Per-layer weights, indexed by layer position in the ModelSpec.
struct ModelParams {
  std::vector<LayerParams> layers;

  /// Zero tensors with the shapes `spec` requires.
  static ModelParams zeros(const ModelSpec& spec);

  std::size_t parameter_count() const noexcept;
  bool all_finite() const noexcept;
  /// this += scale * other; shapes must match.
  void add_scaled(const ModelParams& other, double scale);
  void scale(double factor);
  /// Throws ConfigurationError unless shapes match `spec`.
  void check_against(const ModelSpec& spec) const;

  /// Visits every scalar (weights before bias, layer by layer).
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& lp : layers) {
      for (double& v : lp.weight.data) fn(v);
      for (double& v : lp.bias.data) fn(v);
    }
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Model {
  ModelSpec spec;
  ModelParams params;
};

/// Activations from one forward pass; `activations[0]` is the fitted input and
/// `activations.back()` the logits.
struct ForwardTrace {
  std::vector<Tensor> activations;
};

struct ForwardResult {
  Tensor logits;
  ForwardTrace trace;
};

/// `input` must already have spec.input_length samples.
ForwardResult forward(const ModelSpec& spec, const ModelParams& params, std::span<const double> input);
/// Pads or truncates the signal to spec.input_length first.
ForwardResult forward(const ModelSpec& spec, const ModelParams& params, const Signal& x);
std::vector<Tensor> forward_batch(const ModelSpec& spec, const ModelParams& params, std::span<const Signal> xs);

std::vector<double> softmax(std::span<const double> logits);
/// Cross-entropy of softmax(logits) against y.
double loss(std::span<const double> logits, RhythmClass y);
/// d loss / d logits = softmax(logits) - onehot(y).
std::vector<double> loss_gradient(std::span<const double> logits, RhythmClass y);

/// Reverse pass from an arbitrary upstream gradient on the logits. Returns the
/// gradient w.r.t. the (fitted) input; accumulates parameter gradients into
/// `param_grad` when non-null.
///
/// ReLU's subgradient at 0 is 0. MaxPool routes the gradient to the earliest
/// maximum in each window.
Tensor backward(const ModelSpec& spec, const ModelParams& params, const ForwardTrace& trace,
                std::span<const double> logit_grad, ModelParams* param_grad = nullptr);

/// Gradient of loss(forward(x), y) w.r.t. the signal samples. The result has
/// x.size() entries; samples past input_length do not reach the model and get 0.
Tensor grad_input(const ModelSpec& spec, const ModelParams& params, std::span<const double> x, RhythmClass y);
Tensor grad_input(const ModelSpec& spec, const ModelParams& params, const Signal& x, RhythmClass y);

ModelParams grad_params(const ModelSpec& spec, const ModelParams& params, const Signal& x, RhythmClass y);

struct BatchGradient {
  ModelParams grad;  // mean over the batch
  double mean_loss;
};

/// Mean gradient over a batch, summed with a fixed pairwise tree so the result
/// does not depend on evaluation order.
BatchGradient grad_params_batch(const ModelSpec& spec, const ModelParams& params,
                                std::span<const LabeledExample* const> batch);

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

struct TrainHyper {
  int epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 4e-3;
  std::uint64_t seed = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Mini-batch SGD with a fixed learning rate, reshuffling every epoch.
/// Throws TrainingError when the loss or any parameter becomes non-finite.
ModelParams train(const ModelSpec& spec, const Dataset& dataset, const TrainHyper& hyper,
                  const EpochCallback& on_epoch = {});

struct Prediction {
  RhythmClass cls;
  double confidence;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// argmax of softmax; ties go to the lowest class index.
Prediction predict_from_logits(std::span<const double> logits);
Prediction predict(const ModelSpec& spec, const ModelParams& params, const Signal& x);
Prediction predict(const ModelSpec& spec, const ModelParams& params, std::span<const double> x);

// Weights file ("SAPW" container). Layout in docs/weights-format.md.
inline constexpr std::uint32_t kWeightsFormatVersion = 1;
void save_params(const std::filesystem::path& path, const ModelSpec& spec, const ModelParams& params);
Model load_params(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_params(const ModelSpec& spec, const ModelParams& params);
Model decode_params(std::span<const std::uint8_t> bytes);

}  // namespace ecgadv
