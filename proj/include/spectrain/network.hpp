#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectrain/dataset.hpp"
#include "spectrain/matrix.hpp"

namespace spectrain {

// Architecture description: input -> hidden layers (ReLU) -> linear logits.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  int num_classes = 0;

  void validate() const {
    if (input_dim == 0 || num_classes < 2 || hidden_dims.empty()) {
      throw std::invalid_argument("MlpSpec: need input dim, >=1 hidden layer, >=2 classes");
    }
    for (std::size_t d : hidden_dims) {
      if (d == 0) throw std::invalid_argument("MlpSpec: zero-width hidden layer");
    }
  }

  // Output width of each weight matrix, logit layer last.
  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims = hidden_dims;
    dims.push_back(static_cast<std::size_t>(num_classes));
    return dims;
  }
};

// Weight matrix i has shape d_i x d_{i-1}; biases match the output width.
// The same containers carry gradients, so shapes always mirror each other.
struct MlpParams {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_hidden() const { return weights.empty() ? 0 : weights.size() - 1; }
  std::size_t input_dim() const { return weights.front().cols(); }
  int num_classes() const { return static_cast<int>(weights.back().rows()); }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    return a.weights == b.weights && a.biases == b.biases;
  }
};

// Glorot-normal weights scaled by `scale`: entry std is
// scale * sqrt(2 / (fan_in + fan_out)). Biases start at zero. The raw unit
// normals depend only on the seed, so two scales with the same seed differ
// by exactly the scale ratio.
inline MlpParams init_normal_xavier(const MlpSpec& spec, double scale, std::uint64_t seed) {
  spec.validate();
  if (!(scale > 0.0)) throw std::invalid_argument("init_normal_xavier: scale must be > 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  MlpParams params;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t fan_out : spec.layer_dims()) {
    const double std_dev = scale * std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data()) v = std_dev * unit(rng);
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(fan_out, 0.0);
    fan_in = fan_out;
  }
  return params;
}

struct ForwardResult {
  std::vector<Matrix> hidden;  // ReLU activations, one per hidden layer, b x d_i
  Matrix logits;               // b x k, no activation
};

namespace detail {

// out = x * W^T + bias (row broadcast)
inline Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
  if (x.cols() != w.cols()) {
    throw std::invalid_argument("forward: input width " + std::to_string(x.cols()) +
                                " does not match layer fan-in " + std::to_string(w.cols()));
  }
  Matrix out(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i).data();
    double* oi = out.row(i).data();
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double* wr = w.row(r).data();
      double s = bias[r];
      for (std::size_t j = 0; j < w.cols(); ++j) s += xi[j] * wr[j];
      oi[r] = s;
    }
  }
  return out;
}

inline void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

inline void check_finite(const Matrix& m, const char* where) {
  if (!m.all_finite()) {
    throw NonFiniteError(std::string("forward: non-finite values in ") + where);
  }
}

}  // namespace detail

inline ForwardResult forward(const MlpParams& params, const Matrix& x) {
  ForwardResult result;
  const Matrix* current = &x;
  for (std::size_t l = 0; l + 1 < params.num_layers(); ++l) {
    Matrix a = detail::affine(*current, params.weights[l], params.biases[l]);
    detail::relu_inplace(a);
    detail::check_finite(a, "hidden layer");
    result.hidden.push_back(std::move(a));
    current = &result.hidden.back();
  }
  result.logits = detail::affine(*current, params.weights.back(), params.biases.back());
  detail::check_finite(result.logits, "logits");
  return result;
}

struct LossAndGrads {
  double loss = 0.0;
  MlpParams grads;
};

// Mean softmax cross-entropy and its backpropagated gradients. ReLU uses
// subgradient 0 at exactly 0.
inline LossAndGrads loss_and_grads(const MlpParams& params, const Matrix& x,
                                   const std::vector<int>& labels) {
  if (labels.size() != x.rows()) {
    throw std::invalid_argument("loss_and_grads: label count != batch rows");
  }
  const int k = params.num_classes();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw std::invalid_argument("loss_and_grads: label out of range at row " +
                                  std::to_string(i));
    }
  }

  ForwardResult fwd = forward(params, x);
  const std::size_t b = x.rows();

  // Softmax probabilities and loss via the log-sum-exp form.
  Matrix dlogits = fwd.logits;
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    auto row = dlogits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    loss += lse - row[labels[i]];
    for (double& v : row) v = std::exp(v - lse);
    row[labels[i]] -= 1.0;
    for (double& v : row) v /= static_cast<double>(b);
  }
  loss /= static_cast<double>(b);

  LossAndGrads out;
  out.loss = loss;
  out.grads.weights.resize(params.num_layers());
  out.grads.biases.resize(params.num_layers());

  Matrix delta = std::move(dlogits);  // b x d_l, gradient at layer output
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    const Matrix& input = l == 0 ? x : fwd.hidden[l - 1];
    out.grads.weights[l] = matmul(transpose(delta), input);
    std::vector<double> db(params.biases[l].size(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const double* di = delta.row(i).data();
      for (std::size_t j = 0; j < delta.cols(); ++j) db[j] += di[j];
    }
    out.grads.biases[l] = std::move(db);
    if (l == 0) break;
    Matrix prev = matmul(delta, params.weights[l]);
    const Matrix& act = fwd.hidden[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (act.data()[i] <= 0.0) prev.data()[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return out;
}

// Loss only, through the forward path; used for evaluation and by tests.
inline double evaluate_loss(const MlpParams& params, const Matrix& x,
                            const std::vector<int>& labels) {
  ForwardResult fwd = forward(params, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = fwd.logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    loss += m + std::log(sum) - row[labels[i]];
  }
  return loss / static_cast<double>(x.rows());
}

enum class OptimizerKind { Sgd, RmsProp, Adam };

inline const char* optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "unknown";
}

inline OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "rmsprop") return OptimizerKind::RmsProp;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

// Fixed constants: RMSProp rho=0.9, Adam beta1=0.9 beta2=0.999, eps=1e-8.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-4;
  long step = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;

  static constexpr double kRho = 0.9;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
};

inline OptimizerState make_optimizer(OptimizerKind kind, double learning_rate,
                                     const MlpParams& params) {
  OptimizerState state;
  state.kind = kind;
  state.learning_rate = learning_rate;
  if (kind != OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
      state.v_w.emplace_back(params.weights[l].rows(), params.weights[l].cols());
      state.v_b.emplace_back(params.biases[l].size(), 0.0);
      if (kind == OptimizerKind::Adam) {
        state.m_w.emplace_back(params.weights[l].rows(), params.weights[l].cols());
        state.m_b.emplace_back(params.biases[l].size(), 0.0);
      }
    }
  }
  return state;
}

namespace detail {

inline void apply_update(OptimizerState& st, double* theta, const double* g, std::size_t n,
                         double* m, double* v, double bc1, double bc2) {
  const double lr = st.learning_rate;
  switch (st.kind) {
    case OptimizerKind::Sgd:
      for (std::size_t i = 0; i < n; ++i) theta[i] -= lr * g[i];
      break;
    case OptimizerKind::RmsProp:
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = OptimizerState::kRho * v[i] + (1.0 - OptimizerState::kRho) * g[i] * g[i];
        theta[i] -= lr * g[i] / (std::sqrt(v[i]) + OptimizerState::kEps);
      }
      break;
    case OptimizerKind::Adam:
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = OptimizerState::kBeta1 * m[i] + (1.0 - OptimizerState::kBeta1) * g[i];
        v[i] = OptimizerState::kBeta2 * v[i] + (1.0 - OptimizerState::kBeta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + OptimizerState::kEps);
      }
      break;
  }
}

}  // namespace detail

inline void optimizer_apply(OptimizerState& state, MlpParams& params, const MlpParams& grads) {
  if (grads.weights.size() != params.weights.size()) {
    throw std::invalid_argument("optimizer_apply: gradient shape mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(OptimizerState::kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(OptimizerState::kBeta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    if (grads.weights[l].rows() != params.weights[l].rows() ||
        grads.weights[l].cols() != params.weights[l].cols()) {
      throw std::invalid_argument("optimizer_apply: gradient shape mismatch at layer " +
                                  std::to_string(l));
    }
    double* mw = state.m_w.empty() ? nullptr : state.m_w[l].data().data();
    double* vw = state.v_w.empty() ? nullptr : state.v_w[l].data().data();
    detail::apply_update(state, params.weights[l].data().data(),
                         grads.weights[l].data().data(), params.weights[l].size(), mw, vw,
                         bc1, bc2);
    double* mb = state.m_b.empty() ? nullptr : state.m_b[l].data();
    double* vb = state.v_b.empty() ? nullptr : state.v_b[l].data();
    detail::apply_update(state, params.biases[l].data(), grads.biases[l].data(),
                         params.biases[l].size(), mb, vb, bc1, bc2);
  }
}

// One optimizer step per mini-batch in schedule order. Returns the
// sample-weighted mean loss over the epoch.
inline double train_epoch(MlpParams& params, OptimizerState& state, const LabeledDataset& ds,
                          const BatchSchedule& schedule, std::size_t epoch) {
  double total = 0.0;
  for (const Batch& batch : batches(ds, schedule, epoch)) {
    LossAndGrads lg = loss_and_grads(params, batch.features, batch.labels);
    if (!std::isfinite(lg.loss)) {
      throw NonFiniteError("train_epoch: loss diverged at epoch " + std::to_string(epoch));
    }
    optimizer_apply(state, params, lg.grads);
    total += lg.loss * static_cast<double>(batch.labels.size());
  }
  return total / static_cast<double>(ds.size());
}

// Fraction of samples whose argmax logit (lowest index on ties) matches the
// label.
inline double accuracy(const MlpParams& params, const LabeledDataset& ds) {
  ForwardResult fwd = forward(params, ds.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = fwd.logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    correct += static_cast<int>(best) == ds.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Parameter checkpoints. Binary, little-endian, bit-exact round trip:
//   magic "SPMLP001", then per layer: u64 rows, u64 cols, rows*cols doubles,
//   u64 bias length, doubles. Layer count precedes the layers.
// ---------------------------------------------------------------------------

inline void save_params(const MlpParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_params: cannot open " + path);
  const char magic[8] = {'S', 'P', 'M', 'L', 'P', '0', '0', '1'};
  out.write(magic, 8);
  auto write_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  write_u64(params.num_layers());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    write_u64(params.weights[l].rows());
    write_u64(params.weights[l].cols());
    out.write(reinterpret_cast<const char*>(params.weights[l].data().data()),
              static_cast<std::streamsize>(params.weights[l].size() * sizeof(double)));
    write_u64(params.biases[l].size());
    out.write(reinterpret_cast<const char*>(params.biases[l].data()),
              static_cast<std::streamsize>(params.biases[l].size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

inline MlpParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_params: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SPMLP001", 8) != 0) {
    throw std::runtime_error("load_params: bad magic in " + path);
  }
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  MlpParams params;
  const std::uint64_t layers = read_u64();
  for (std::uint64_t l = 0; l < layers; ++l) {
    const std::uint64_t rows = read_u64();
    const std::uint64_t cols = read_u64();
    if (!in || rows == 0 || cols == 0) {
      throw std::runtime_error("load_params: corrupt layer header in " + path);
    }
    Matrix w(rows, cols);
    in.read(reinterpret_cast<char*>(w.data().data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    params.weights.push_back(std::move(w));
    const std::uint64_t blen = read_u64();
    std::vector<double> bias(blen);
    in.read(reinterpret_cast<char*>(bias.data()),
            static_cast<std::streamsize>(blen * sizeof(double)));
    params.biases.push_back(std::move(bias));
  }
  if (!in) throw std::runtime_error("load_params: truncated file " + path);
  return params;
}

}  // namespace spectrain
