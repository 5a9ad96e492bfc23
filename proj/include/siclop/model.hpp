#pragma once

// Graph convolutional policy/value network. L GCN layers over the
// coordination graph extract per-agent features; two small perceptron heads
// turn them into a Boltzmann policy over the 9 moves and a value estimate.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "siclop/error.hpp"
#include "siclop/numcore.hpp"
#include "siclop/obsgraph.hpp"
#include "siclop/rng.hpp"

namespace siclop {

using num::Matrix;

struct ModelShape {
  int radius = kDefaultRadius;
  std::vector<int> gcn_widths{64, 64};
  int policy_hidden = 64;
  int value_hidden = 64;

  int feature_dim() const { return feature_length(radius); }
  int intent_dim() const { return window_cells(radius); }
  int layers() const { return static_cast<int>(gcn_widths.size()); }
  int embedding_dim() const { return gcn_widths.back(); }

  bool operator==(const ModelShape&) const = default;

  // (rows, cols) of every tensor, in storage order.
  std::vector<std::pair<int, int>> tensor_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    int in = feature_dim();
    for (int w : gcn_widths) {
      shapes.emplace_back(in, w);
      in = w;
    }
    shapes.emplace_back(intent_dim(), gcn_widths.front());
    shapes.emplace_back(embedding_dim(), policy_hidden);
    shapes.emplace_back(1, policy_hidden);
    shapes.emplace_back(policy_hidden, kNumActions);
    shapes.emplace_back(1, kNumActions);
    shapes.emplace_back(embedding_dim(), value_hidden);
    shapes.emplace_back(1, value_hidden);
    shapes.emplace_back(value_hidden, 1);
    shapes.emplace_back(1, 1);
    return shapes;
  }

  void validate() const {
    if (radius < 1 || gcn_widths.empty() || policy_hidden < 1 || value_hidden < 1) {
      fail(Errc::kShapeMismatch, "degenerate model shape");
    }
    for (int w : gcn_widths) {
      if (w < 1) fail(Errc::kShapeMismatch, "GCN width must be positive");
    }
  }
};

// One matrix per parameter, shaped like ModelShape::tensor_shapes().
struct Gradients {
  std::vector<Matrix> tensors;

  double norm() const {
    double s = 0.0;
    for (const auto& t : tensors) s += num::squared_norm(t);
    return std::sqrt(s);
  }
};

class ModelParams {
 public:
  ModelShape shape;
  double temperature = 1.0;
  std::vector<Matrix> tensors;

  const Matrix& gcn(int layer) const { return tensors[layer]; }
  const Matrix& intent() const { return tensors[shape.layers()]; }
  const Matrix& policy_w1() const { return tensors[shape.layers() + 1]; }
  const Matrix& policy_b1() const { return tensors[shape.layers() + 2]; }
  const Matrix& policy_w2() const { return tensors[shape.layers() + 3]; }
  const Matrix& policy_b2() const { return tensors[shape.layers() + 4]; }
  const Matrix& value_w1() const { return tensors[shape.layers() + 5]; }
  const Matrix& value_b1() const { return tensors[shape.layers() + 6]; }
  const Matrix& value_w2() const { return tensors[shape.layers() + 7]; }
  const Matrix& value_b2() const { return tensors[shape.layers() + 8]; }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& t : tensors) g.tensors.emplace_back(t.rows(), t.cols());
    return g;
  }

  bool operator==(const ModelParams&) const = default;
};

inline ModelParams zero_params(const ModelShape& shape, double temperature = 1.0) {
  shape.validate();
  ModelParams p;
  p.shape = shape;
  p.temperature = temperature;
  for (auto [r, c] : shape.tensor_shapes()) p.tensors.emplace_back(r, c);
  return p;
}

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
inline ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double temperature = 1.0) {
  if (!(temperature > 0.0)) fail(Errc::kInvalidArgument, "temperature must be positive");
  ModelParams p = zero_params(shape, temperature);
  Rng rng(seed);
  for (auto& t : p.tensors) {
    if (t.rows() == 1) continue;  // bias rows
    const double limit = std::sqrt(6.0 / (t.rows() + t.cols()));
    for (double& v : t.data()) v = rng.uniform(-limit, limit);
  }
  return p;
}

struct PolicyValue {
  Matrix policies;  // agents x 9
  std::vector<double> values;
  double aggregate_value = 0.0;
};

namespace detail {

struct ForwardCache {
  Matrix adjacency;
  Matrix intent_indicator;       // agents x intent_dim
  std::vector<Matrix> inputs;    // H_{l-1} per layer
  std::vector<Matrix> pre;       // pre-activation of layer l
  Matrix embedding;              // H_L
  Matrix policy_pre, policy_hidden, probs;
  Matrix value_pre, value_hidden, values;
};

inline Matrix intent_indicator(const ModelShape& shape, const GraphInput& input) {
  Matrix ind(input.agent_count(), shape.intent_dim());
  for (int i = 0; i < static_cast<int>(input.intents.size()); ++i) {
    for (int cell : input.intents[i]) ind(i, cell) = 1.0;
  }
  return ind;
}

inline void check_input(const ModelParams& params, const GraphInput& input) {
  if (input.observations.cols() != params.shape.feature_dim()) {
    fail(Errc::kShapeMismatch, "observation length " + std::to_string(input.observations.cols()) +
                                   " but the model expects " +
                                   std::to_string(params.shape.feature_dim()));
  }
  if (input.graph.size() != input.agent_count()) {
    fail(Errc::kShapeMismatch, "graph node count differs from observation count");
  }
  if (!input.intents.empty() && static_cast<int>(input.intents.size()) != input.agent_count()) {
    fail(Errc::kShapeMismatch, "intent list length differs from observation count");
  }
}

inline void forward(const ModelParams& params, const GraphInput& input, bool want_policy,
                    ForwardCache& cache) {
  check_input(params, input);
  const int layers = params.shape.layers();
  cache.adjacency = input.graph.normalized_adjacency();
  cache.intent_indicator = intent_indicator(params.shape, input);
  cache.inputs.clear();
  cache.pre.clear();
  Matrix h = input.observations;
  for (int l = 0; l < layers; ++l) {
    Matrix z = num::matmul(h, params.gcn(l));
    if (l == 0) {
      for (int i = 0; i < z.rows(); ++i) {
        num::accumulate_vec_mat(cache.intent_indicator.row(i), params.intent(), 1.0, z.row(i));
      }
    }
    Matrix s = num::matmul(cache.adjacency, z);
    cache.inputs.push_back(std::move(h));
    h = num::relu(s);
    cache.pre.push_back(std::move(s));
  }
  cache.embedding = std::move(h);

  if (want_policy) {
    cache.policy_pre = num::matmul(cache.embedding, params.policy_w1());
    num::add_bias(cache.policy_pre, params.policy_b1());
    cache.policy_hidden = num::relu(cache.policy_pre);
    Matrix logits = num::matmul(cache.policy_hidden, params.policy_w2());
    num::add_bias(logits, params.policy_b2());
    cache.probs = num::softmax_rows(logits, params.temperature);
  }
  cache.value_pre = num::matmul(cache.embedding, params.value_w1());
  num::add_bias(cache.value_pre, params.value_b1());
  cache.value_hidden = num::relu(cache.value_pre);
  cache.values = num::matmul(cache.value_hidden, params.value_w2());
  num::add_bias(cache.values, params.value_b2());
}

inline std::vector<double> column(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (int r = 0; r < m.rows(); ++r) out[r] = m(r, 0);
  return out;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline PolicyValue predict(const ModelParams& params, const GraphInput& input) {
  detail::ForwardCache cache;
  detail::forward(params, input, true, cache);
  PolicyValue out;
  out.policies = std::move(cache.probs);
  out.values = detail::column(cache.values);
  out.aggregate_value = detail::mean(out.values);
  return out;
}

// Value head only; skips the policy head.
inline std::vector<double> predict_values(const ModelParams& params, const GraphInput& input) {
  detail::ForwardCache cache;
  detail::forward(params, input, false, cache);
  return detail::column(cache.values);
}

struct TrainingTarget {
  GraphInput input;
  Matrix target_policies;              // agents x 9
  std::vector<double> target_values;   // per agent
  std::vector<double> policy_weights;  // per agent; empty means all 1
};

struct LossResult {
  double total = 0.0;
  double policy_term = 0.0;
  double value_term = 0.0;
  Gradients gradients;
};

// Summed over samples and agents:
//   w_i * (-pi_i . ln p_i) + (v_i - vhat_i)^2
inline LossResult loss(const ModelParams& params, std::span<const TrainingTarget> batch) {
  if (batch.empty()) fail(Errc::kInvalidArgument, "loss needs a non-empty batch");
  LossResult result;
  result.gradients = params.zero_gradients();
  auto& grads = result.gradients.tensors;
  const int layers = params.shape.layers();
  detail::ForwardCache cache;

  for (const auto& sample : batch) {
    const int n = sample.input.agent_count();
    if (sample.target_policies.rows() != n || sample.target_policies.cols() != kNumActions ||
        static_cast<int>(sample.target_values.size()) != n ||
        (!sample.policy_weights.empty() && static_cast<int>(sample.policy_weights.size()) != n)) {
      fail(Errc::kShapeMismatch, "training target not aligned with its agents");
    }
    detail::forward(params, sample.input, true, cache);
    std::vector<double> weights = sample.policy_weights;
    if (weights.empty()) weights.assign(n, 1.0);

    Matrix dvalues(n, 1);
    for (int i = 0; i < n; ++i) {
      double ce = 0.0;
      for (int a = 0; a < kNumActions; ++a) {
        const double t = sample.target_policies(i, a);
        if (t != 0.0) ce -= t * std::log(cache.probs(i, a));
      }
      result.policy_term += weights[i] * ce;
      const double diff = sample.target_values[i] - cache.values(i, 0);
      result.value_term += diff * diff;
      dvalues(i, 0) = -2.0 * diff;
    }

    // Value head.
    num::axpy(1.0, num::matmul_tn(cache.value_hidden, dvalues), grads[layers + 7]);
    num::axpy(1.0, num::column_sums(dvalues), grads[layers + 8]);
    Matrix dvh = num::relu_backward(cache.value_pre, num::matmul_nt(dvalues, params.value_w2()));
    num::axpy(1.0, num::matmul_tn(cache.embedding, dvh), grads[layers + 5]);
    num::axpy(1.0, num::column_sums(dvh), grads[layers + 6]);
    Matrix dembed = num::matmul_nt(dvh, params.value_w1());

    // Policy head.
    Matrix dlogits =
        num::softmax_cross_entropy_backward(cache.probs, sample.target_policies, weights, params.temperature);
    num::axpy(1.0, num::matmul_tn(cache.policy_hidden, dlogits), grads[layers + 3]);
    num::axpy(1.0, num::column_sums(dlogits), grads[layers + 4]);
    Matrix dph = num::relu_backward(cache.policy_pre, num::matmul_nt(dlogits, params.policy_w2()));
    num::axpy(1.0, num::matmul_tn(cache.embedding, dph), grads[layers + 1]);
    num::axpy(1.0, num::column_sums(dph), grads[layers + 2]);
    num::axpy(1.0, num::matmul_nt(dph, params.policy_w1()), dembed);

    // GCN stack: H_l = relu(A (H_{l-1} W_l)), A symmetric.
    Matrix dh = std::move(dembed);
    for (int l = layers - 1; l >= 0; --l) {
      Matrix ds = num::relu_backward(cache.pre[l], dh);
      Matrix dz = num::matmul_tn(cache.adjacency, ds);
      num::axpy(1.0, num::matmul_tn(cache.inputs[l], dz), grads[l]);
      if (l == 0) {
        num::axpy(1.0, num::matmul_tn(cache.intent_indicator, dz), grads[layers]);
      } else {
        dh = num::matmul_nt(dz, params.gcn(l));
      }
    }
  }
  result.total = result.policy_term + result.value_term;
  return result;
}

inline constexpr double kDefaultLearningRate = 1e-3;
inline constexpr double kDefaultGradientClip = 5.0;

// theta <- theta - lr * clip(g), clipping by global norm.
inline ModelParams apply_update(const ModelParams& params, const Gradients& grads, double lr,
                                double clip_norm = kDefaultGradientClip) {
  if (grads.tensors.size() != params.tensors.size()) {
    fail(Errc::kShapeMismatch, "gradient tensor count differs from parameters");
  }
  for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
    if (!grads.tensors[t].same_shape(params.tensors[t])) {
      fail(Errc::kShapeMismatch, "gradient " + std::to_string(t) + " is " +
                                     num::shape_string(grads.tensors[t]) + ", parameter is " +
                                     num::shape_string(params.tensors[t]));
    }
  }
  const double norm = grads.norm();
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  ModelParams out = params;
  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    num::axpy(-lr * scale, grads.tensors[t], out.tensors[t]);
  }
  return out;
}

// Incremental evaluator for policies conditioned on other agents' intended
// moves. The unconditioned forward pass is cached once; a conditioned query
// only recomputes the rows its intent cells can reach through the graph.
class PolicySession {
 public:
  PolicySession(const ModelParams& params, const GraphInput& input) : params_(&params) {
    GraphInput plain = input;
    plain.intents.assign(input.agent_count(), {});
    detail::forward(params, plain, true, cache_);
    const int n = input.agent_count();
    neighbors_.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (cache_.adjacency(i, j) != 0.0) neighbors_[i].push_back(j);
      }
    }
  }

  int agent_count() const { return cache_.probs.rows(); }
  const Matrix& policies() const { return cache_.probs; }
  std::vector<double> values() const { return detail::column(cache_.values); }

  using Policy = std::array<double, kNumActions>;

  Policy policy(int agent) const {
    Policy out;
    const auto row = cache_.probs.row(agent);
    std::copy(row.begin(), row.end(), out.begin());
    return out;
  }

  // Agent's policy when the given intent cells of its window are marked.
  const Policy& conditional_policy(int agent, const std::vector<int>& cells) const {
    auto key = std::make_pair(agent, cells);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Policy result = cells.empty() ? policy(agent) : evaluate(agent, cells);
    return memo_.emplace(std::move(key), result).first->second;
  }

 private:
  std::vector<int> ball(int center, int radius) const {
    const int n = agent_count();
    std::vector<int> dist(n, -1);
    std::vector<int> order{center};
    dist[center] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
      const int u = order[head];
      if (dist[u] == radius) continue;
      for (int v : neighbors_[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          order.push_back(v);
        }
      }
    }
    return order;
  }

  Policy evaluate(int agent, const std::vector<int>& cells) const {
    const ModelParams& p = *params_;
    const int layers = p.shape.layers();
    // Row deltas of the pre-aggregation product Z_l, keyed by agent.
    std::vector<std::pair<int, std::vector<double>>> dz;
    {
      std::vector<double> d(p.shape.gcn_widths[0], 0.0);
      for (int c : cells) {
        const auto w = p.intent().row(c);
        for (std::size_t k = 0; k < d.size(); ++k) d[k] += w[k];
      }
      dz.emplace_back(agent, std::move(d));
    }
    std::vector<double> embedding;
    for (int l = 0; l < layers; ++l) {
      const int width = p.shape.gcn_widths[l];
      const std::vector<int> rows = l + 1 == layers ? std::vector<int>{agent} : ball(agent, layers - l - 1);
      std::vector<std::pair<int, std::vector<double>>> next;
      for (int q : rows) {
        std::vector<double> h(cache_.pre[l].row(q).begin(), cache_.pre[l].row(q).end());
        for (const auto& [r, delta] : dz) {
          const double a = cache_.adjacency(q, r);
          if (a == 0.0) continue;
          for (int k = 0; k < width; ++k) h[k] += a * delta[k];
        }
        for (double& v : h) v = v > 0.0 ? v : 0.0;
        if (l + 1 == layers) {
          embedding = std::move(h);
          break;
        }
        const Matrix& old_h = l + 1 < layers ? cache_.inputs[l + 1] : cache_.embedding;
        bool any = false;
        for (int k = 0; k < width; ++k) {
          h[k] -= old_h(q, k);
          any = any || h[k] != 0.0;
        }
        if (!any) continue;
        std::vector<double> d(p.shape.gcn_widths[l + 1], 0.0);
        num::accumulate_vec_mat(h, p.gcn(l + 1), 1.0, d);
        next.emplace_back(q, std::move(d));
      }
      dz = std::move(next);
    }

    std::vector<double> hidden(p.policy_b1().data().begin(), p.policy_b1().data().end());
    num::accumulate_vec_mat(embedding, p.policy_w1(), 1.0, hidden);
    for (double& v : hidden) v = v > 0.0 ? v : 0.0;
    std::vector<double> logits(p.policy_b2().data().begin(), p.policy_b2().data().end());
    num::accumulate_vec_mat(hidden, p.policy_w2(), 1.0, logits);
    num::softmax_inplace(logits, p.temperature);
    Policy out;
    std::copy(logits.begin(), logits.end(), out.begin());
    return out;
  }

  const ModelParams* params_;
  detail::ForwardCache cache_;
  std::vector<std::vector<int>> neighbors_;
  mutable std::map<std::pair<int, std::vector<int>>, Policy> memo_;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "SICLOPNN" | u32 version | u32 radius | u32 L | u32 widths[L]
//   | u32 policy_hidden | u32 value_hidden | f64 temperature
//   | u32 tensor_count | (u32 rows, u32 cols) * tensor_count
//   | f64 data, row-major, tensor after tensor
//
// All integers and reals little-endian.

inline constexpr char kCheckpointMagic[8] = {'S', 'I', 'C', 'L', 'O', 'P', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, Errc on_short) : bytes_(bytes), on_short_(on_short) {}

  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail(on_short_, "unexpected end of data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  Errc on_short_;
};

}  // namespace detail

inline std::vector<std::uint8_t> save(const ModelParams& params) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.shape.radius));
  w.u32(static_cast<std::uint32_t>(params.shape.layers()));
  for (int width : params.shape.gcn_widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(params.shape.policy_hidden));
  w.u32(static_cast<std::uint32_t>(params.shape.value_hidden));
  w.f64(params.temperature);
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
  }
  for (const auto& t : params.tensors) {
    for (double v : t.data()) w.f64(v);
  }
  return std::move(w.bytes());
}

// Throws CorruptCheckpoint, VersionMismatch, or ShapeMismatch when `expected`
// is given and differs from the stored shape.
inline ModelParams load(std::span<const std::uint8_t> bytes,
                        const std::optional<ModelShape>& expected = std::nullopt) {
  detail::ByteReader r(bytes, Errc::kCorruptCheckpoint);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail(Errc::kCorruptCheckpoint, "bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(Errc::kVersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                     std::to_string(kCheckpointVersion));
  }
  constexpr std::uint32_t kSane = 1u << 20;
  ModelShape shape;
  shape.radius = static_cast<int>(r.u32());
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64 || shape.radius > 64) fail(Errc::kCorruptCheckpoint, "implausible header");
  shape.gcn_widths.resize(layers);
  for (auto& width : shape.gcn_widths) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > kSane) fail(Errc::kCorruptCheckpoint, "implausible width");
    width = static_cast<int>(v);
  }
  shape.policy_hidden = static_cast<int>(r.u32());
  shape.value_hidden = static_cast<int>(r.u32());
  const double temperature = r.f64();
  if (shape.policy_hidden <= 0 || shape.value_hidden <= 0 || !(temperature > 0.0) ||
      !std::isfinite(temperature)) {
    fail(Errc::kCorruptCheckpoint, "implausible header");
  }
  const auto shapes = shape.tensor_shapes();
  const std::uint32_t count = r.u32();
  if (count != shapes.size()) fail(Errc::kCorruptCheckpoint, "tensor count disagrees with header");
  for (auto [rows, cols] : shapes) {
    const std::uint32_t rr = r.u32();
    const std::uint32_t cc = r.u32();
    if (static_cast<int>(rr) != rows || static_cast<int>(cc) != cols) {
      fail(Errc::kCorruptCheckpoint, "shape table disagrees with header");
    }
  }
  if (expected && !(*expected == shape)) {
    fail(Errc::kShapeMismatch, "checkpoint has " + std::to_string(shape.layers()) +
                                   " GCN layers / radius " + std::to_string(shape.radius) +
                                   ", expected " + std::to_string(expected->layers()) + " / " +
                                   std::to_string(expected->radius));
  }
  ModelParams p = zero_params(shape, temperature);
  for (auto& t : p.tensors) {
    for (double& v : t.data()) v = r.f64();
    if (!t.all_finite()) fail(Errc::kCorruptCheckpoint, "non-finite parameter");
  }
  if (r.remaining() != 0) fail(Errc::kCorruptCheckpoint, "trailing bytes");
  return p;
}

inline void save_file(const ModelParams& params, const std::string& path) {
  const auto bytes = save(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::kIo, "write failed for " + path);
}

inline ModelParams load_file(const std::string& path, const std::optional<ModelShape>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load(bytes, expected);
}

}  // namespace siclop
