#include "playtrace/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "playtrace/kernels.hpp"

namespace playtrace {

std::string_view to_string(Activation activation) {
  return activation == Activation::Relu ? "relu" : "logistic";
}

std::optional<Activation> parse_activation(std::string_view text) {
  if (text == "logistic") return Activation::Logistic;
  if (text == "relu") return Activation::Relu;
  return std::nullopt;
}

void validate(const MlpConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, "mlp: " + msg); };
  if (config.input_dim < 1) fail("input_dim must be >= 1");
  if (config.output_dim < 1) fail("output_dim must be >= 1");
  for (auto h : config.hidden_sizes)
    if (h < 1) fail("hidden sizes must be >= 1");
  if (config.epochs < 1) fail("epochs must be >= 1");
  if (config.batch_size < 1) fail("batch_size must be >= 1");
  if (!(config.learning_rate > 0) || !std::isfinite(config.learning_rate)) fail("learning_rate must be > 0");
}

namespace {

constexpr double kProbFloor = 1e-12;

std::vector<std::size_t> layer_dims(const MlpConfig& c) {
  std::vector<std::size_t> dims{c.input_dim};
  dims.insert(dims.end(), c.hidden_sizes.begin(), c.hidden_sizes.end());
  dims.push_back(c.output_dim);
  return dims;
}

void add_bias(Matrix& z, std::span<const double> b) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
}

void activate(Matrix& z, Activation act) {
  for (auto& v : z.flat()) v = act == Activation::Relu ? std::max(0.0, v) : 1.0 / (1.0 + std::exp(-v));
}

void softmax_rows(Matrix& z) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0;
    for (auto& v : row) total += (v = std::exp(v - top));
    for (auto& v : row) v /= total;
  }
}

void check_input(const MlpModel& model, const Matrix& x) {
  if (model.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "mlp has no layers");
  if (x.cols() != model.layers.front().w.rows())
    throw Error(ErrorCode::ShapeMismatch, "mlp input width " + std::to_string(x.cols()) + ", expected " +
                                              std::to_string(model.layers.front().w.rows()));
}

void check_labels(const Matrix& x, std::span<const int> y, std::size_t classes) {
  if (y.size() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "label count differs from row count");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw Error(ErrorCode::ShapeMismatch, "label " + std::to_string(v) + " outside the output classes");
}

/// Every layer output; the last entry holds the probabilities.
std::vector<Matrix> forward_all(const MlpModel& model, const Matrix& x) {
  check_input(model, x);
  std::vector<Matrix> acts;
  acts.reserve(model.layers.size());
  const Matrix* in = &x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Matrix z = kernels::matmul(*in, layer.w);
    add_bias(z, layer.b);
    if (l + 1 < model.layers.size())
      activate(z, model.config.hidden_activation);
    else
      softmax_rows(z);
    acts.push_back(std::move(z));
    in = &acts.back();
  }
  return acts;
}

Parameters backward_from(const MlpModel& model, const Matrix& x, const std::vector<Matrix>& acts,
                         std::span<const int> y) {
  const std::size_t n = x.rows();
  const std::size_t depth = model.layers.size();
  Matrix delta = acts.back();
  for (std::size_t r = 0; r < n; ++r) {
    delta(r, static_cast<std::size_t>(y[r])) -= 1.0;
    for (auto& v : delta.row(r)) v /= static_cast<double>(n);
  }
  Parameters grads(depth);
  for (std::size_t l = depth; l-- > 0;) {
    const Matrix& input = l == 0 ? x : acts[l - 1];
    grads[l].w = kernels::matmul_tn(input, delta);
    grads[l].b.assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < delta.cols(); ++j) grads[l].b[j] += delta(r, j);
    if (l == 0) break;
    Matrix back = kernels::matmul_nt(delta, model.layers[l].w);
    const auto& a = acts[l - 1].flat();
    auto flat = back.flat();
    for (std::size_t i = 0; i < flat.size(); ++i)
      flat[i] *= model.config.hidden_activation == Activation::Relu ? (a[i] > 0 ? 1.0 : 0.0) : a[i] * (1.0 - a[i]);
    delta = std::move(back);
  }
  return grads;
}

bool all_finite(const Parameters& params) {
  for (const auto& layer : params) {
    for (double v : layer.w.flat())
      if (!std::isfinite(v)) return false;
    for (double v : layer.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

void adam_update(std::span<double> theta, std::span<const double> g, std::span<double> m, std::span<double> v,
                 double lr, double c1, double c2, const AdamOptions& o) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = o.beta1 * m[i] + (1 - o.beta1) * g[i];
    v[i] = o.beta2 * v[i] + (1 - o.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + o.epsilon);
  }
}

bool same_shape(const DenseLayer& a, const DenseLayer& b) {
  return a.w.rows() == b.w.rows() && a.w.cols() == b.w.cols() && a.b.size() == b.b.size();
}

}  // namespace

MlpModel mlp_init(const MlpConfig& config) {
  validate(config);
  MlpModel model;
  model.config = config;
  Rng rng(derive_seed(config.seed, 0x1417));
  const auto dims = layer_dims(config);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Matrix(dims[l], dims[l + 1]), std::vector<double>(dims[l + 1], 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (auto& w : layer.w.flat()) w = rng.uniform(-limit, limit);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Matrix mlp_forward(const MlpModel& model, const Matrix& x) { return std::move(forward_all(model, x).back()); }

double cross_entropy(const Matrix& probs, std::span<const int> y) {
  check_labels(probs, y, probs.cols());
  if (probs.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "cross_entropy of an empty batch");
  double total = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r)
    total -= std::log(std::max(probs(r, static_cast<std::size_t>(y[r])), kProbFloor));
  return total / static_cast<double>(probs.rows());
}

Parameters mlp_backward(const MlpModel& model, const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "mlp_backward on an empty batch");
  check_input(model, x);
  check_labels(x, y, model.layers.back().w.cols());
  return backward_from(model, x, forward_all(model, x), y);
}

AdamState adam_init(const Parameters& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back({Matrix(p.w.rows(), p.w.cols()), std::vector<double>(p.b.size(), 0.0)});
    s.v.push_back(s.m.back());
  }
  return s;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, std::size_t t, double learning_rate,
               const AdamOptions& options) {
  if (t < 1) throw Error(ErrorCode::ConfigInvalid, "adam step index starts at 1");
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "adam: layer counts differ");
  for (std::size_t l = 0; l < params.size(); ++l)
    if (!same_shape(params[l], grads[l]) || !same_shape(params[l], state.m[l]) || !same_shape(params[l], state.v[l]))
      throw Error(ErrorCode::ShapeMismatch, "adam: layer " + std::to_string(l) + " shapes differ");
  const double c1 = 1 - std::pow(options.beta1, static_cast<double>(t));
  const double c2 = 1 - std::pow(options.beta2, static_cast<double>(t));
  for (std::size_t l = 0; l < params.size(); ++l) {
    adam_update(params[l].w.flat(), grads[l].w.flat(), state.m[l].w.flat(), state.v[l].w.flat(), learning_rate, c1, c2,
                options);
    adam_update(params[l].b, grads[l].b, state.m[l].b, state.v[l].b, learning_rate, c1, c2, options);
  }
}

MlpModel mlp_train(const MlpConfig& config, const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw Error(ErrorCode::ConfigInvalid, "mlp_train: empty training set");
  MlpConfig cfg = config;
  if (cfg.input_dim == 0) cfg.input_dim = x.cols();
  MlpModel model = mlp_init(cfg);
  check_input(model, x);
  check_labels(x, y, cfg.output_dim);

  Rng rng(derive_seed(cfg.seed, 0x5417));
  AdamState adam = adam_init(model.layers);
  std::vector<std::size_t> order(x.rows());
  std::vector<int> batch_y;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Matrix bx = x.select_rows(idx);
      batch_y.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) batch_y[i] = y[idx[i]];
      auto acts = forward_all(model, bx);
      loss += cross_entropy(acts.back(), batch_y) * static_cast<double>(idx.size());
      auto grads = backward_from(model, bx, acts, batch_y);
      adam_step(model.layers, grads, adam, ++step, cfg.learning_rate);
    }
    if (!all_finite(model.layers))
      throw Error(ErrorCode::Internal, "mlp: non-finite parameter after epoch " + std::to_string(epoch + 1));
    model.loss_history.push_back(loss / static_cast<double>(x.rows()));
  }
  return model;
}

std::vector<int> mlp_predict(const MlpModel& model, const Matrix& x) {
  Matrix p = mlp_forward(model, x);
  std::vector<int> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void write_mlp(ByteWriter& out, const MlpModel& model) {
  const auto& c = model.config;
  out.u64(c.input_dim);
  out.u64(c.hidden_sizes.size());
  for (auto h : c.hidden_sizes) out.u64(h);
  out.u64(c.output_dim);
  out.u64(c.epochs);
  out.f64(c.learning_rate);
  out.u64(c.batch_size);
  out.u64(c.seed);
  out.str(to_string(c.hidden_activation));
  out.u64(model.layers.size());
  for (const auto& layer : model.layers) {
    out.matrix(layer.w);
    out.f64s(layer.b);
  }
  out.f64s(model.loss_history);
}

MlpModel read_mlp(ByteReader& in) {
  MlpModel m;
  auto& c = m.config;
  c.input_dim = in.u64();
  const auto hidden = in.u64();
  if (hidden > in.remaining() / 8) throw Error(ErrorCode::Format, "bad hidden layer count");
  c.hidden_sizes.resize(hidden);
  for (auto& h : c.hidden_sizes) h = in.u64();
  c.output_dim = in.u64();
  c.epochs = in.u64();
  c.learning_rate = in.f64();
  c.batch_size = in.u64();
  c.seed = in.u64();
  auto act = parse_activation(in.str());
  if (!act) throw Error(ErrorCode::Format, "unknown mlp activation");
  c.hidden_activation = *act;

  const auto dims = layer_dims(c);
  const auto layers = in.u64();
  if (layers != dims.size() - 1) throw Error(ErrorCode::Format, "mlp layer count disagrees with config");
  for (std::size_t l = 0; l < layers; ++l) {
    DenseLayer layer;
    layer.w = in.matrix();
    layer.b = in.f64s();
    if (layer.w.rows() != dims[l] || layer.w.cols() != dims[l + 1] || layer.b.size() != dims[l + 1])
      throw Error(ErrorCode::Format, "mlp layer " + std::to_string(l) + " has the wrong shape");
    m.layers.push_back(std::move(layer));
  }
  m.loss_history = in.f64s();
  return m;
}

}  // namespace playtrace
