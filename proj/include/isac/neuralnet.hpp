#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/rng.hpp"

namespace isac {

enum class LayerKind : std::uint32_t { conv1d = 1, dense = 2 };
enum class Activation : std::uint32_t { linear = 0, tanh_act = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;   // filters for conv1d, output units for dense
  std::size_t kernel = 0;  // conv1d only
  std::size_t stride = 1;  // conv1d only
  Activation activation = Activation::linear;
};

inline std::size_t conv_output_len(std::size_t input_len, std::size_t kernel, std::size_t stride) {
  if (kernel < 1 || stride < 1) throw std::invalid_argument("conv1d: kernel and stride must be >= 1");
  if (input_len < kernel) throw std::invalid_argument("conv1d: input shorter than kernel");
  return (input_len - kernel) / stride + 1;
}

/// Weights, biases and Adam moments for a feedforward stack of conv1d and
/// dense layers. Convolution output ([filter][position]) is implicitly
/// flattened filter-major before the next layer.
struct NetworkState {
  std::vector<LayerSpec> specs;
  std::size_t input_len = 0;
  std::vector<std::size_t> layer_input_len;   // flattened input length per layer
  std::vector<std::size_t> layer_output_len;  // flattened output length per layer
  std::vector<std::vector<double>> weights;   // conv: units*kernel, dense: units*input
  std::vector<std::vector<double>> biases;    // units
  std::vector<std::vector<double>> adam_mw, adam_vw, adam_mb, adam_vb;
  std::uint64_t adam_steps = 0;

  std::size_t output_len() const { return layer_output_len.empty() ? 0 : layer_output_len.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
  }
};

namespace detail {

inline void init_moments(NetworkState& net) {
  net.adam_mw.clear();
  net.adam_vw.clear();
  net.adam_mb.clear();
  net.adam_vb.clear();
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    net.adam_mw.emplace_back(net.weights[i].size(), 0.0);
    net.adam_vw.emplace_back(net.weights[i].size(), 0.0);
    net.adam_mb.emplace_back(net.biases[i].size(), 0.0);
    net.adam_vb.emplace_back(net.biases[i].size(), 0.0);
  }
  net.adam_steps = 0;
}

}  // namespace detail

/// Allocate a network for the given layer stack; Glorot-uniform weights,
/// zero biases.
inline NetworkState build_network(std::vector<LayerSpec> specs, std::size_t input_len, std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("build_network: no layers");
  NetworkState net;
  net.specs = std::move(specs);
  net.input_len = input_len;
  constexpr std::uint64_t kInitTag = 0x6e6eULL;
  Rng rng = substream(seed, kInitTag);

  std::size_t current = input_len;
  for (const LayerSpec& spec : net.specs) {
    net.layer_input_len.push_back(current);
    std::size_t weight_count = 0;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    if (spec.kind == LayerKind::conv1d) {
      const std::size_t positions = conv_output_len(current, spec.kernel, spec.stride);
      weight_count = spec.units * spec.kernel;
      fan_in = spec.kernel;
      fan_out = spec.kernel * spec.units;
      current = spec.units * positions;
    } else {
      weight_count = spec.units * current;
      fan_in = current;
      fan_out = spec.units;
      current = spec.units;
    }
    net.layer_output_len.push_back(current);
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::vector<double> w(weight_count);
    for (double& x : w) x = (2.0 * uniform01(rng) - 1.0) * limit;
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(spec.units, 0.0);
  }
  detail::init_moments(net);
  return net;
}

/// Direct-estimation layer stack: one tanh conv layer (128 filters, kernel
/// 4, stride 1), one hidden dense layer of 200 units, linear output.
inline std::vector<LayerSpec> de_cnn_specs(std::size_t output_len) {
  return {
      LayerSpec{LayerKind::conv1d, 128, 4, 1, Activation::tanh_act},
      LayerSpec{LayerKind::dense, 200, 0, 1, Activation::linear},
      LayerSpec{LayerKind::dense, output_len, 0, 1, Activation::linear},
  };
}

/// Reflected-estimation layer stack: two tanh conv layers (128 then 64
/// filters, kernel 4); the second one slides over the flattened output of
/// the first. Dense layers of 600 and 900 units, linear output.
inline std::vector<LayerSpec> re_cnn_specs(std::size_t output_len) {
  return {
      LayerSpec{LayerKind::conv1d, 128, 4, 1, Activation::tanh_act},
      LayerSpec{LayerKind::conv1d, 64, 4, 1, Activation::tanh_act},
      LayerSpec{LayerKind::dense, 600, 0, 1, Activation::linear},
      LayerSpec{LayerKind::dense, 900, 0, 1, Activation::linear},
      LayerSpec{LayerKind::dense, output_len, 0, 1, Activation::linear},
  };
}

/// Parameter count of a layer stack without allocating its tensors.
inline std::size_t planned_parameter_count(std::span<const LayerSpec> specs, std::size_t input_len) {
  std::size_t current = input_len;
  std::size_t total = 0;
  for (const LayerSpec& spec : specs) {
    if (spec.kind == LayerKind::conv1d) {
      const std::size_t positions = conv_output_len(current, spec.kernel, spec.stride);
      total += spec.units * spec.kernel + spec.units;
      current = spec.units * positions;
    } else {
      total += spec.units * current + spec.units;
      current = spec.units;
    }
  }
  return total;
}

inline NetworkState build_de_cnn(std::size_t input_len, std::size_t output_len, std::uint64_t seed) {
  return build_network(de_cnn_specs(output_len), input_len, seed);
}

inline NetworkState build_re_cnn(std::size_t input_len, std::size_t output_len, std::uint64_t seed) {
  return build_network(re_cnn_specs(output_len), input_len, seed);
}

namespace detail {

inline double activate(double z, Activation a) { return a == Activation::tanh_act ? std::tanh(z) : z; }

// derivative expressed through the activation output
inline double activation_grad(double post, Activation a) {
  return a == Activation::tanh_act ? 1.0 - post * post : 1.0;
}

inline void layer_forward(const NetworkState& net, std::size_t li, std::span<const double> in,
                          std::vector<double>& post) {
  const LayerSpec& spec = net.specs[li];
  const std::vector<double>& w = net.weights[li];
  const std::vector<double>& b = net.biases[li];
  post.assign(net.layer_output_len[li], 0.0);
  if (spec.kind == LayerKind::conv1d) {
    const std::size_t positions = net.layer_output_len[li] / spec.units;
    for (std::size_t f = 0; f < spec.units; ++f) {
      const double* wf = w.data() + f * spec.kernel;
      double* out = post.data() + f * positions;
      for (std::size_t p = 0; p < positions; ++p) {
        double z = b[f];
        const double* xs = in.data() + p * spec.stride;
        for (std::size_t t = 0; t < spec.kernel; ++t) z += wf[t] * xs[t];
        out[p] = activate(z, spec.activation);
      }
    }
  } else {
    const std::size_t in_len = net.layer_input_len[li];
    for (std::size_t u = 0; u < spec.units; ++u) {
      double z = b[u];
      const double* wu = w.data() + u * in_len;
      for (std::size_t i = 0; i < in_len; ++i) z += wu[i] * in[i];
      post[u] = activate(z, spec.activation);
    }
  }
}

}  // namespace detail

/// Forward pass; fills trace with each layer's activation output when given.
inline std::vector<double> forward(const NetworkState& net, std::span<const double> input,
                                   std::vector<std::vector<double>>* trace = nullptr) {
  if (input.size() != net.input_len) throw std::invalid_argument("forward: input length mismatch");
  std::vector<double> current(input.begin(), input.end());
  if (trace) trace->clear();
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    std::vector<double> next;
    detail::layer_forward(net, li, current, next);
    if (trace) trace->push_back(next);
    current = std::move(next);
  }
  return current;
}

/// Gradient accumulator mirroring the weight/bias tensors.
struct Gradients {
  std::vector<std::vector<double>> w, b;

  static Gradients zeros_like(const NetworkState& net) {
    Gradients g;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      g.w.emplace_back(net.weights[i].size(), 0.0);
      g.b.emplace_back(net.biases[i].size(), 0.0);
    }
    return g;
  }

  void reset() {
    for (auto& t : w) std::fill(t.begin(), t.end(), 0.0);
    for (auto& t : b) std::fill(t.begin(), t.end(), 0.0);
  }
};

/// One (input, target) view into preprocessed sample storage.
struct Sample {
  std::span<const double> input;
  std::span<const double> target;
};

namespace detail {

inline void layer_backward(const NetworkState& net, std::size_t li, std::span<const double> in,
                           std::span<const double> post, std::vector<double>& delta, Gradients& grads,
                           std::vector<double>& delta_in) {
  const LayerSpec& spec = net.specs[li];
  // fold the activation derivative into the incoming deltas
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= activation_grad(post[i], spec.activation);

  std::vector<double>& gw = grads.w[li];
  std::vector<double>& gb = grads.b[li];
  delta_in.assign(in.size(), 0.0);
  if (spec.kind == LayerKind::conv1d) {
    const std::size_t positions = net.layer_output_len[li] / spec.units;
    const std::vector<double>& w = net.weights[li];
    for (std::size_t f = 0; f < spec.units; ++f) {
      const double* df = delta.data() + f * positions;
      double* gwf = gw.data() + f * spec.kernel;
      const double* wf = w.data() + f * spec.kernel;
      double bias_sum = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        const double d = df[p];
        bias_sum += d;
        const double* xs = in.data() + p * spec.stride;
        double* dx = delta_in.data() + p * spec.stride;
        for (std::size_t t = 0; t < spec.kernel; ++t) {
          gwf[t] += d * xs[t];
          dx[t] += d * wf[t];
        }
      }
      gb[f] += bias_sum;
    }
  } else {
    const std::size_t in_len = in.size();
    const std::vector<double>& w = net.weights[li];
    for (std::size_t u = 0; u < spec.units; ++u) {
      const double d = delta[u];
      gb[u] += d;
      const double* wu = w.data() + u * in_len;
      double* gwu = gw.data() + u * in_len;
      for (std::size_t i = 0; i < in_len; ++i) {
        gwu[i] += d * in[i];
        delta_in[i] += d * wu[i];
      }
    }
  }
}

}  // namespace detail

/// Mean-squared-error loss over the batch (mean over samples of the
/// per-sample mean over output entries) and its gradients via
/// backpropagation. Gradients are overwritten, not accumulated across calls.
inline double loss_and_grad(const NetworkState& net, std::span<const Sample> batch, Gradients& grads) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  grads.reset();
  const std::size_t out_len = net.output_len();
  double loss = 0.0;
  std::vector<std::vector<double>> trace;
  for (const Sample& sample : batch) {
    if (sample.target.size() != out_len) throw std::invalid_argument("loss_and_grad: target length mismatch");
    const std::vector<double> prediction = forward(net, sample.input, &trace);
    std::vector<double> delta(out_len);
    const double scale = 2.0 / (double(batch.size()) * double(out_len));
    for (std::size_t d = 0; d < out_len; ++d) {
      const double err = prediction[d] - sample.target[d];
      loss += err * err / (double(batch.size()) * double(out_len));
      delta[d] = scale * err;
    }
    for (std::size_t li = net.specs.size(); li-- > 0;) {
      const std::span<const double> in =
          li == 0 ? sample.input : std::span<const double>(trace[li - 1]);
      std::vector<double> delta_in;
      detail::layer_backward(net, li, in, trace[li], delta, grads, delta_in);
      delta = std::move(delta_in);
    }
  }
  return loss;
}

/// Standard Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with bias
/// correction; increments the shared step counter.
inline void adam_step(NetworkState& net, const Gradients& grads, double learning_rate) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  net.adam_steps += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, double(net.adam_steps));
  const double bc2 = 1.0 - std::pow(kBeta2, double(net.adam_steps));
  auto update = [&](std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                    const std::vector<double>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      w[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
    }
  };
  for (std::size_t li = 0; li < net.weights.size(); ++li) {
    update(net.weights[li], net.adam_mw[li], net.adam_vw[li], grads.w[li]);
    update(net.biases[li], net.adam_mb[li], net.adam_vb[li], grads.b[li]);
  }
}

inline double evaluate_mse(const NetworkState& net, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate_mse: empty sample list");
  double total = 0.0;
  for (const Sample& sample : samples) {
    const std::vector<double> prediction = forward(net, sample.input);
    double mse = 0.0;
    for (std::size_t d = 0; d < prediction.size(); ++d) {
      const double err = prediction[d] - sample.target[d];
      mse += err * err;
    }
    total += mse / double(prediction.size());
  }
  return total / double(samples.size());
}

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  double validation_fraction = 0.1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double best_val_mse = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
};

/// Minibatch Adam training with early stopping: stops once the monitored MSE
/// has not strictly improved for `patience` consecutive epochs, or at
/// max_epochs. Returns the history and leaves the best-epoch weights in the
/// network. Validation MSE is monitored; with an empty validation set the
/// training MSE is used instead.
inline TrainHistory train(NetworkState& net, std::span<const Sample> train_set,
                          std::span<const Sample> val_set, const TrainConfig& cfg,
                          std::uint64_t shuffle_seed) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw std::invalid_argument("train: batch size, epochs and patience must be >= 1");
  if (cfg.learning_rate < 0.0 || cfg.validation_fraction < 0.0 || cfg.validation_fraction >= 1.0)
    throw std::invalid_argument("train: invalid learning rate or validation fraction");
  constexpr std::uint64_t kShuffleTag = 0x7368ULL;

  TrainHistory history;
  Gradients grads = Gradients::zeros_like(net);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  std::vector<std::vector<double>> best_weights = net.weights;
  std::vector<std::vector<double>> best_biases = net.biases;
  std::size_t stall = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng = substream(shuffle_seed, kShuffleTag, epoch);
    for (std::size_t i = order.size(); i-- > 1;) {
      const std::size_t j = std::size_t(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }

    double train_loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const double loss = loss_and_grad(net, batch, grads);
      adam_step(net, grads, cfg.learning_rate);
      train_loss_sum += loss * double(stop - start);
    }
    const double train_mse = train_loss_sum / double(order.size());
    const double val_mse = val_set.empty() ? train_mse : evaluate_mse(net, val_set);
    history.epochs.push_back({epoch, train_mse, val_mse});

    if (val_mse < history.best_val_mse) {
      history.best_val_mse = val_mse;
      history.best_epoch = epoch;
      best_weights = net.weights;
      best_biases = net.biases;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }
  net.weights = std::move(best_weights);
  net.biases = std::move(best_biases);
  return history;
}

// ---- weight file format -------------------------------------------------
//
// Little-endian binary: magic "ISACNN1", uint32 version, uint32 layer count,
// one record per layer (kind, units, kernel, stride, activation, input_len
// as uint32), then the float64 weight and bias tensors in declaration order.

namespace nn_detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("network file: truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace nn_detail

inline constexpr std::uint32_t kNetworkFileVersion = 1;

inline void save_network(const NetworkState& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_network: cannot open " + path);
  os.write("ISACNN1", 7);
  nn_detail::write_u32(os, kNetworkFileVersion);
  nn_detail::write_u32(os, std::uint32_t(net.specs.size()));
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    const LayerSpec& spec = net.specs[li];
    nn_detail::write_u32(os, std::uint32_t(spec.kind));
    nn_detail::write_u32(os, std::uint32_t(spec.units));
    nn_detail::write_u32(os, std::uint32_t(spec.kernel));
    nn_detail::write_u32(os, std::uint32_t(spec.stride));
    nn_detail::write_u32(os, std::uint32_t(spec.activation));
    nn_detail::write_u32(os, std::uint32_t(net.layer_input_len[li]));
  }
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    os.write(reinterpret_cast<const char*>(net.weights[li].data()),
             std::streamsize(net.weights[li].size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(net.biases[li].data()),
             std::streamsize(net.biases[li].size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("save_network: write failed");
}

inline NetworkState load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_network: cannot open " + path);
  char magic[7];
  is.read(magic, 7);
  if (!is || std::memcmp(magic, "ISACNN1", 7) != 0) throw std::runtime_error("load_network: bad magic");
  const std::uint32_t version = nn_detail::read_u32(is);
  if (version != kNetworkFileVersion) throw std::runtime_error("load_network: unsupported version");
  const std::uint32_t layer_count = nn_detail::read_u32(is);
  if (layer_count == 0) throw std::runtime_error("load_network: no layers");

  std::vector<LayerSpec> specs(layer_count);
  std::vector<std::size_t> input_lens(layer_count);
  for (std::uint32_t li = 0; li < layer_count; ++li) {
    specs[li].kind = LayerKind(nn_detail::read_u32(is));
    specs[li].units = nn_detail::read_u32(is);
    specs[li].kernel = nn_detail::read_u32(is);
    specs[li].stride = nn_detail::read_u32(is);
    specs[li].activation = Activation(nn_detail::read_u32(is));
    input_lens[li] = nn_detail::read_u32(is);
    if (specs[li].kind != LayerKind::conv1d && specs[li].kind != LayerKind::dense)
      throw std::runtime_error("load_network: unknown layer kind");
  }
  NetworkState net = build_network(std::move(specs), input_lens[0], 0);
  for (std::uint32_t li = 0; li < layer_count; ++li)
    if (net.layer_input_len[li] != input_lens[li])
      throw std::runtime_error("load_network: inconsistent layer shapes");
  for (std::size_t li = 0; li < net.weights.size(); ++li) {
    is.read(reinterpret_cast<char*>(net.weights[li].data()),
            std::streamsize(net.weights[li].size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(net.biases[li].data()),
            std::streamsize(net.biases[li].size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("load_network: truncated tensors");
  detail::init_moments(net);
  return net;
}

}  // namespace isac
