#include "ecgadv/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include <boost/crc.hpp>

#include "ecgadv/error.hpp"

namespace ecgadv {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "}";
}

// Weight and bias shapes for layer `layer` given its input shape; empty for
// parameter-free layers.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> param_shapes(const Layer& layer,
                                                                          const std::vector<std::size_t>& in) {
  return std::visit(
      overloaded{
          [&](const Conv1D& c) {
            return std::pair{std::vector<std::size_t>{c.out_channels, in[0], c.kernel_size},
                             std::vector<std::size_t>{c.out_channels}};
          },
          [&](const Dense& d) {
            return std::pair{std::vector<std::size_t>{d.out_features, product(in)},
                             std::vector<std::size_t>{d.out_features}};
          },
          [](const auto&) { return std::pair{std::vector<std::size_t>{}, std::vector<std::size_t>{}}; },
      },
      layer);
}

void conv_forward(const Tensor& in, const LayerParams& p, const Conv1D& c, Tensor& out) {
  const std::size_t cin = in.shape[0], len = in.shape[1];
  const std::size_t k = c.kernel_size, stride = c.stride;
  const std::size_t lout = out.shape[1];
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    double* dst = out.data.data() + o * lout;
    std::fill(dst, dst + lout, p.bias[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* w = p.weight.data.data() + (o * cin + i) * k;
      const double* src = in.data.data() + i * len;
      for (std::size_t t = 0; t < lout; ++t) {
        const double* s = src + t * stride;
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += w[j] * s[j];
        dst[t] += acc;
      }
    }
  }
}

void conv_backward(const Tensor& in, const LayerParams& p, const Conv1D& c, const Tensor& grad_out,
                   Tensor& grad_in, LayerParams* grad_p) {
  const std::size_t cin = in.shape[0], len = in.shape[1];
  const std::size_t k = c.kernel_size, stride = c.stride;
  const std::size_t lout = grad_out.shape[1];
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    const double* g = grad_out.data.data() + o * lout;
    if (grad_p) {
      double bsum = 0.0;
      for (std::size_t t = 0; t < lout; ++t) bsum += g[t];
      grad_p->bias[o] += bsum;
    }
    for (std::size_t i = 0; i < cin; ++i) {
      const double* w = p.weight.data.data() + (o * cin + i) * k;
      const double* src = in.data.data() + i * len;
      double* dsrc = grad_in.data.data() + i * len;
      double* dw = grad_p ? grad_p->weight.data.data() + (o * cin + i) * k : nullptr;
      for (std::size_t t = 0; t < lout; ++t) {
        const double gt = g[t];
        if (gt == 0.0) continue;
        const std::size_t base = t * stride;
        for (std::size_t j = 0; j < k; ++j) dsrc[base + j] += gt * w[j];
        if (dw) {
          for (std::size_t j = 0; j < k; ++j) dw[j] += gt * src[base + j];
        }
      }
    }
  }
}

void dense_forward(const Tensor& in, const LayerParams& p, Tensor& out) {
  const std::size_t nin = in.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const double* w = p.weight.data.data() + o * nin;
    double acc = p.bias[o];
    for (std::size_t i = 0; i < nin; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
}

void dense_backward(const Tensor& in, const LayerParams& p, const Tensor& grad_out, Tensor& grad_in,
                    LayerParams* grad_p) {
  const std::size_t nin = in.size();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    const double g = grad_out[o];
    const double* w = p.weight.data.data() + o * nin;
    for (std::size_t i = 0; i < nin; ++i) grad_in[i] += g * w[i];
    if (grad_p) {
      double* dw = grad_p->weight.data.data() + o * nin;
      for (std::size_t i = 0; i < nin; ++i) dw[i] += g * in[i];
      grad_p->bias[o] += g;
    }
  }
}

// Index of the earliest maximum inside window `w` of channel row `row`.
std::size_t pool_argmax(const double* row, std::size_t w, std::size_t width) {
  std::size_t best = w * width;
  for (std::size_t j = w * width + 1; j < (w + 1) * width; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

void check_input_length(const ModelSpec& spec, std::size_t n) {
  if (n != spec.input_length()) {
    throw ConfigurationError("input has " + std::to_string(n) + " samples, model expects " +
                             std::to_string(spec.input_length()));
  }
}

ModelParams tree_sum(std::vector<ModelParams>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  ModelParams left = tree_sum(parts, lo, mid);
  ModelParams right = tree_sum(parts, mid, hi);
  left.add_scaled(right, 1.0);
  return left;
}

double tree_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() == 1) return values[0];
  const std::size_t mid = values.size() / 2;
  return tree_sum(values.first(mid)) + tree_sum(values.subspan(mid));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, double fill) : shape(std::move(shape_)), data(product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (product(shape) != data.size()) {
    throw InvalidArgument("tensor shape " + shape_string(shape) + " does not match " +
                          std::to_string(data.size()) + " values");
  }
}

ModelSpec::ModelSpec(std::vector<Layer> layers, std::size_t input_length, std::size_t n_classes)
    : layers_(std::move(layers)), input_length_(input_length), n_classes_(n_classes) {
  if (n_classes_ != kNumClasses) {
    throw ConfigurationError("n_classes must be " + std::to_string(kNumClasses));
  }
  if (input_length_ == 0) throw ConfigurationError("input_length must be positive");
  if (layers_.empty()) throw ConfigurationError("model has no layers");

  std::vector<std::size_t> shape{1, input_length_};
  shapes_.push_back(shape);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto where = "layer " + std::to_string(li) + ": ";
    shape = std::visit(
        overloaded{
            [&](const Conv1D& c) -> std::vector<std::size_t> {
              if (shape.size() != 2) throw ConfigurationError(where + "Conv1D needs a (channels, length) input");
              if (c.out_channels == 0 || c.kernel_size == 0 || c.stride == 0) {
                throw ConfigurationError(where + "Conv1D sizes must be positive");
              }
              if (shape[1] < c.kernel_size) {
                throw ConfigurationError(where + "Conv1D kernel " + std::to_string(c.kernel_size) +
                                         " exceeds input length " + std::to_string(shape[1]));
              }
              return {c.out_channels, (shape[1] - c.kernel_size) / c.stride + 1};
            },
            [&](const ReLU&) { return shape; },
            [&](const MaxPool& m) -> std::vector<std::size_t> {
              if (shape.size() != 2) throw ConfigurationError(where + "MaxPool needs a (channels, length) input");
              if (m.width == 0 || shape[1] < m.width) {
                throw ConfigurationError(where + "MaxPool width must be in [1, input length]");
              }
              return {shape[0], shape[1] / m.width};
            },
            [&](const GlobalAveragePool&) -> std::vector<std::size_t> {
              if (shape.size() != 2) {
                throw ConfigurationError(where + "GlobalAveragePool needs a (channels, length) input");
              }
              return {shape[0]};
            },
            [&](const Dense& d) -> std::vector<std::size_t> {
              if (d.out_features == 0) throw ConfigurationError(where + "Dense needs out_features > 0");
              return {d.out_features};
            },
        },
        layers_[li]);
    shapes_.push_back(shape);
  }
  if (shape.size() != 1 || shape[0] != n_classes_) {
    throw ConfigurationError("final layer outputs " + shape_string(shape) + ", expected {" +
                             std::to_string(n_classes_) + "} logits");
  }
}

ModelSpec ModelSpec::default_architecture(std::size_t input_length) {
  return ModelSpec(
      {
          Conv1D{8, 7, 2}, ReLU{},
          Conv1D{16, 7, 2}, ReLU{},
          Conv1D{32, 7, 2}, ReLU{},
          Conv1D{32, 7, 2}, ReLU{},
          GlobalAveragePool{}, Dense{kNumClasses},
      },
      input_length);
}

ModelParams ModelParams::zeros(const ModelSpec& spec) {
  ModelParams p;
  p.layers.reserve(spec.layers().size());
  for (std::size_t i = 0; i < spec.layers().size(); ++i) {
    auto [w, b] = param_shapes(spec.layers()[i], spec.activation_shapes()[i]);
    LayerParams lp;
    if (!w.empty()) {
      lp.weight = Tensor(std::move(w));
      lp.bias = Tensor(std::move(b));
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& lp : layers) n += lp.weight.size() + lp.bias.size();
  return n;
}

bool ModelParams::all_finite() const noexcept {
  for (const auto& lp : layers) {
    for (double v : lp.weight.data) if (!std::isfinite(v)) return false;
    for (double v : lp.bias.data) if (!std::isfinite(v)) return false;
  }
  return true;
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  if (other.layers.size() != layers.size()) throw ConfigurationError("parameter sets have different layer counts");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.weight.shape != b.weight.shape || a.bias.shape != b.bias.shape) {
      throw ConfigurationError("parameter shapes differ at layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < a.weight.size(); ++i) a.weight[i] += scale * b.weight[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * b.bias[i];
  }
}

void ModelParams::scale(double factor) {
  for_each([factor](double& v) { v *= factor; });
}

void ModelParams::check_against(const ModelSpec& spec) const {
  if (layers.size() != spec.layers().size()) {
    throw ConfigurationError("params have " + std::to_string(layers.size()) + " layers, spec has " +
                             std::to_string(spec.layers().size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto [w, b] = param_shapes(spec.layers()[i], spec.activation_shapes()[i]);
    if (layers[i].weight.shape != w || layers[i].bias.shape != b) {
      throw ConfigurationError("layer " + std::to_string(i) + ": weight shape " +
                               shape_string(layers[i].weight.shape) + " expected " + shape_string(w));
    }
  }
}

ForwardResult forward(const ModelSpec& spec, const ModelParams& params, std::span<const double> input) {
  check_input_length(spec, input.size());
  params.check_against(spec);

  ForwardTrace trace;
  trace.activations.reserve(spec.layers().size() + 1);
  trace.activations.emplace_back(spec.activation_shapes()[0], std::vector<double>(input.begin(), input.end()));

  for (std::size_t li = 0; li < spec.layers().size(); ++li) {
    const Tensor& in = trace.activations.back();
    Tensor out(spec.activation_shapes()[li + 1]);
    const LayerParams& p = params.layers[li];
    std::visit(overloaded{
                   [&](const Conv1D& c) { conv_forward(in, p, c, out); },
                   [&](const ReLU&) {
                     for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
                   },
                   [&](const MaxPool& m) {
                     const std::size_t len = in.shape[1], lout = out.shape[1];
                     for (std::size_t ch = 0; ch < in.shape[0]; ++ch) {
                       const double* row = in.data.data() + ch * len;
                       for (std::size_t w = 0; w < lout; ++w) out[ch * lout + w] = row[pool_argmax(row, w, m.width)];
                     }
                   },
                   [&](const GlobalAveragePool&) {
                     const std::size_t len = in.shape[1];
                     for (std::size_t ch = 0; ch < in.shape[0]; ++ch) {
                       const double* row = in.data.data() + ch * len;
                       out[ch] = std::accumulate(row, row + len, 0.0) / static_cast<double>(len);
                     }
                   },
                   [&](const Dense&) { dense_forward(in, p, out); },
               },
               spec.layers()[li]);
    trace.activations.push_back(std::move(out));
  }
  Tensor logits = trace.activations.back();
  return {std::move(logits), std::move(trace)};
}

ForwardResult forward(const ModelSpec& spec, const ModelParams& params, const Signal& x) {
  const auto fitted = fit_length(x.samples(), spec.input_length());
  return forward(spec, params, std::span<const double>(fitted));
}

std::vector<Tensor> forward_batch(const ModelSpec& spec, const ModelParams& params, std::span<const Signal> xs) {
  std::vector<Tensor> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(spec, params, x).logits);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

double loss(std::span<const double> logits, RhythmClass y) {
  if (logits.size() != kNumClasses) throw ConfigurationError("loss expects 4 logits");
  const std::size_t yi = index_of(y);
  const std::size_t top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double m = logits[top];
  // log-sum-exp minus the true logit; log1p keeps precision when the top
  // logit dominates.
  double rest = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != top) rest += std::exp(logits[i] - m);
  }
  return (m - logits[yi]) + std::log1p(rest);
}

std::vector<double> loss_gradient(std::span<const double> logits, RhythmClass y) {
  if (logits.size() != kNumClasses) throw ConfigurationError("loss expects 4 logits");
  auto g = softmax(logits);
  g[index_of(y)] -= 1.0;
  return g;
}

Tensor backward(const ModelSpec& spec, const ModelParams& params, const ForwardTrace& trace,
                std::span<const double> logit_grad, ModelParams* param_grad) {
  if (trace.activations.size() != spec.layers().size() + 1) {
    throw ConfigurationError("trace does not match model depth");
  }
  if (logit_grad.size() != spec.n_classes()) throw ConfigurationError("logit gradient has wrong length");
  if (param_grad) param_grad->check_against(spec);

  Tensor grad(spec.activation_shapes().back(), std::vector<double>(logit_grad.begin(), logit_grad.end()));
  for (std::size_t li = spec.layers().size(); li-- > 0;) {
    const Tensor& in = trace.activations[li];
    Tensor grad_in(in.shape);
    const LayerParams& p = params.layers[li];
    LayerParams* gp = param_grad ? &param_grad->layers[li] : nullptr;
    std::visit(overloaded{
                   [&](const Conv1D& c) { conv_backward(in, p, c, grad, grad_in, gp); },
                   [&](const ReLU&) {
                     for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > 0.0 ? grad[i] : 0.0;
                   },
                   [&](const MaxPool& m) {
                     const std::size_t len = in.shape[1], lout = grad.shape[1];
                     for (std::size_t ch = 0; ch < in.shape[0]; ++ch) {
                       const double* row = in.data.data() + ch * len;
                       for (std::size_t w = 0; w < lout; ++w) {
                         grad_in[ch * len + pool_argmax(row, w, m.width)] += grad[ch * lout + w];
                       }
                     }
                   },
                   [&](const GlobalAveragePool&) {
                     const std::size_t len = in.shape[1];
                     const double inv = 1.0 / static_cast<double>(len);
                     for (std::size_t ch = 0; ch < in.shape[0]; ++ch) {
                       std::fill_n(grad_in.data.begin() + static_cast<std::ptrdiff_t>(ch * len), len, grad[ch] * inv);
                     }
                   },
                   [&](const Dense&) { dense_backward(in, p, grad, grad_in, gp); },
               },
               spec.layers()[li]);
    grad = std::move(grad_in);
  }
  return grad;
}

Tensor grad_input(const ModelSpec& spec, const ModelParams& params, std::span<const double> x, RhythmClass y) {
  std::vector<double> fitted(spec.input_length(), 0.0);
  std::copy_n(x.begin(), std::min(x.size(), fitted.size()), fitted.begin());
  auto fr = forward(spec, params, std::span<const double>(fitted));
  const auto g_logits = loss_gradient(fr.logits.data, y);
  Tensor g = backward(spec, params, fr.trace, g_logits);

  Tensor out({x.size()});
  std::copy_n(g.data.begin(), std::min(x.size(), g.size()), out.data.begin());
  return out;
}

Tensor grad_input(const ModelSpec& spec, const ModelParams& params, const Signal& x, RhythmClass y) {
  return grad_input(spec, params, std::span<const double>(x.samples()), y);
}

ModelParams grad_params(const ModelSpec& spec, const ModelParams& params, const Signal& x, RhythmClass y) {
  auto fr = forward(spec, params, x);
  ModelParams g = ModelParams::zeros(spec);
  backward(spec, params, fr.trace, loss_gradient(fr.logits.data, y), &g);
  return g;
}

BatchGradient grad_params_batch(const ModelSpec& spec, const ModelParams& params,
                                std::span<const LabeledExample* const> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  std::vector<ModelParams> parts;
  std::vector<double> losses;
  parts.reserve(batch.size());
  losses.reserve(batch.size());
  for (const LabeledExample* ex : batch) {
    auto fr = forward(spec, params, ex->signal);
    losses.push_back(loss(fr.logits.data, ex->label));
    ModelParams g = ModelParams::zeros(spec);
    backward(spec, params, fr.trace, loss_gradient(fr.logits.data, ex->label), &g);
    parts.push_back(std::move(g));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  ModelParams sum = tree_sum(parts, 0, parts.size());
  sum.scale(inv);
  return {std::move(sum), tree_sum(losses) * inv};
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& w = p.layers[i].weight;
    if (w.empty()) continue;
    double fan_in = 0.0, fan_out = 0.0;
    if (w.shape.size() == 3) {  // conv {out, in, k}
      fan_in = static_cast<double>(w.shape[1] * w.shape[2]);
      fan_out = static_cast<double>(w.shape[0] * w.shape[2]);
    } else {
      fan_in = static_cast<double>(w.shape[1]);
      fan_out = static_cast<double>(w.shape[0]);
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.data) v = dist(rng);
  }
  return p;
}

ModelParams train(const ModelSpec& spec, const Dataset& dataset, const TrainHyper& hyper,
                  const EpochCallback& on_epoch) {
  if (hyper.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (hyper.epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (!(hyper.learning_rate >= 0.0) || !std::isfinite(hyper.learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and non-negative");
  }

  ModelParams params = init_params(spec, hyper.seed);
  std::vector<const LabeledExample*> order;
  order.reserve(dataset.size());
  for (const auto& ex : dataset) order.push_back(&ex);

  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> batch_losses;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t n = std::min(hyper.batch_size, order.size() - start);
      auto bg = grad_params_batch(spec, params, std::span(order).subspan(start, n));
      if (!std::isfinite(bg.mean_loss)) throw TrainingError("loss became non-finite", epoch);
      batch_losses.push_back(bg.mean_loss);
      if (hyper.learning_rate != 0.0) params.add_scaled(bg.grad, -hyper.learning_rate);
    }
    if (!params.all_finite()) throw TrainingError("parameters became non-finite", epoch);
    if (on_epoch) on_epoch(epoch, tree_sum(batch_losses) / static_cast<double>(batch_losses.size()));
  }
  return params;
}

Prediction predict_from_logits(std::span<const double> logits) {
  const auto p = softmax(logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return {class_at(best), p[best]};
}

Prediction predict(const ModelSpec& spec, const ModelParams& params, const Signal& x) {
  return predict_from_logits(forward(spec, params, x).logits.data);
}

Prediction predict(const ModelSpec& spec, const ModelParams& params, std::span<const double> x) {
  std::vector<double> fitted(spec.input_length(), 0.0);
  std::copy_n(x.begin(), std::min(x.size(), fitted.size()), fitted.begin());
  return predict_from_logits(forward(spec, params, std::span<const double>(fitted)).logits.data);
}

// ---------------------------------------------------------------------------
// Weights container

namespace {

constexpr char kMagic[4] = {'S', 'A', 'P', 'W'};

enum class LayerTag : std::uint8_t { Conv1D = 1, ReLU = 2, MaxPool = 3, GlobalAveragePool = 4, Dense = 5 };

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw IntegrityError("weights file truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

void write_tensor(Writer& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u64(d);
  for (double v : t.data) w.f64(v);
}

Tensor read_tensor(Reader& r) {
  const auto ndim = r.u32();
  if (ndim > 8) throw IntegrityError("implausible tensor rank " + std::to_string(ndim));
  std::vector<std::size_t> shape(ndim);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(r.u64());
    count *= d;
  }
  r.need(count * 8);
  std::vector<double> data(count);
  for (double& v : data) v = r.f64();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

std::vector<std::uint8_t> encode_params(const ModelSpec& spec, const ModelParams& params) {
  params.check_against(spec);
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kWeightsFormatVersion);
  w.u64(spec.input_length());
  w.u32(static_cast<std::uint32_t>(spec.n_classes()));
  w.u32(static_cast<std::uint32_t>(spec.layers().size()));
  for (const auto& layer : spec.layers()) {
    std::visit(overloaded{
                   [&](const Conv1D& c) {
                     w.u8(static_cast<std::uint8_t>(LayerTag::Conv1D));
                     w.u64(c.out_channels);
                     w.u64(c.kernel_size);
                     w.u64(c.stride);
                   },
                   [&](const ReLU&) { w.u8(static_cast<std::uint8_t>(LayerTag::ReLU)); },
                   [&](const MaxPool& m) {
                     w.u8(static_cast<std::uint8_t>(LayerTag::MaxPool));
                     w.u64(m.width);
                   },
                   [&](const GlobalAveragePool&) { w.u8(static_cast<std::uint8_t>(LayerTag::GlobalAveragePool)); },
                   [&](const Dense& d) {
                     w.u8(static_cast<std::uint8_t>(LayerTag::Dense));
                     w.u64(d.out_features);
                   },
               },
               layer);
  }
  for (const auto& lp : params.layers) {
    const bool has = !lp.weight.empty();
    w.u8(has ? 1 : 0);
    if (has) {
      write_tensor(w, lp.weight);
      write_tensor(w, lp.bias);
    }
  }
  const auto checksum = crc32(w.buffer());
  w.u32(checksum);
  return std::move(w.buffer());
}

Model decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw IntegrityError("not a SAPW weights file (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.u32();
  if (version != kWeightsFormatVersion) {
    throw UnsupportedVersion("unsupported weights format version " + std::to_string(version) + " (expected " +
                                 std::to_string(kWeightsFormatVersion) + ")",
                             version);
  }
  if (bytes.size() < 8 + 4) throw IntegrityError("weights file truncated");
  const auto stored = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    return v;
  }();
  const auto body = bytes.first(bytes.size() - 4);

  const auto input_length = static_cast<std::size_t>(r.u64());
  const auto n_classes = r.u32();
  const auto n_layers = r.u32();
  if (n_layers > 4096) throw IntegrityError("implausible layer count");
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    switch (static_cast<LayerTag>(r.u8())) {
      case LayerTag::Conv1D: {
        const auto out = r.u64(), k = r.u64(), s = r.u64();
        layers.emplace_back(Conv1D{out, k, s});
        break;
      }
      case LayerTag::ReLU: layers.emplace_back(ReLU{}); break;
      case LayerTag::MaxPool: layers.emplace_back(MaxPool{r.u64()}); break;
      case LayerTag::GlobalAveragePool: layers.emplace_back(GlobalAveragePool{}); break;
      case LayerTag::Dense: layers.emplace_back(Dense{r.u64()}); break;
      default: throw IntegrityError("unknown layer tag in weights file");
    }
  }
  ModelParams params;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerParams lp;
    if (r.u8() == 1) {
      lp.weight = read_tensor(r);
      lp.bias = read_tensor(r);
    }
    params.layers.push_back(std::move(lp));
  }
  if (r.pos() + 4 + 4 != bytes.size()) {
    throw IntegrityError("weights file size mismatch: truncated or trailing bytes");
  }
  if (crc32(body) != stored) throw IntegrityError("weights file checksum mismatch");

  ModelSpec spec(std::move(layers), input_length, n_classes);
  params.check_against(spec);
  return {std::move(spec), std::move(params)};
}

void save_params(const std::filesystem::path& path, const ModelSpec& spec, const ModelParams& params) {
  const auto bytes = encode_params(spec, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write weights file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

Model load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open weights file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

}  // namespace ecgadv
