#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "playtrace/bytes.hpp"
#include "playtrace/common.hpp"

namespace playtrace {

enum class Activation { Logistic, Relu };

std::string_view to_string(Activation activation);
std::optional<Activation> parse_activation(std::string_view text);

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes = {128};
  std::size_t output_dim = 2;
  std::size_t epochs = 100;
  double learning_rate = 0.001;
  std::size_t batch_size = 256;
  std::uint64_t seed = 42;
  Activation hidden_activation = Activation::Logistic;

  bool operator==(const MlpConfig&) const = default;
};

/// Throws ConfigInvalid on a zero dimension, epochs or batch size, or a
/// non-positive learning rate.
void validate(const MlpConfig& config);

/// y = x * w + b, with w stored fan_in x fan_out.
struct DenseLayer {
  Matrix w;
  std::vector<double> b;

  bool operator==(const DenseLayer&) const = default;
};

using Parameters = std::vector<DenseLayer>;

struct MlpModel {
  MlpConfig config;
  Parameters layers;
  std::vector<double> loss_history;  ///< mean training loss per epoch

  bool operator==(const MlpModel&) const = default;
};

/// Glorot-uniform weights, zero biases.
MlpModel mlp_init(const MlpConfig& config);

/// Class probabilities, one row per input row.
Matrix mlp_forward(const MlpModel& model, const Matrix& x);

/// Mean of -log(max(p[i, y_i], 1e-12)).
double cross_entropy(const Matrix& probs, std::span<const int> y);

/// Exact gradients of the mean cross-entropy over the batch.
Parameters mlp_backward(const MlpModel& model, const Matrix& x, std::span<const int> y);

struct AdamState {
  Parameters m;
  Parameters v;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Zeroed moments shaped like the parameters.
AdamState adam_init(const Parameters& params);

/// One Adam update at step t (1-based).
void adam_step(Parameters& params, const Parameters& grads, AdamState& state, std::size_t t, double learning_rate,
               const AdamOptions& options = {});

MlpModel mlp_train(const MlpConfig& config, const Matrix& x, std::span<const int> y);

/// Argmax of the output probabilities; ties go to the lower class.
std::vector<int> mlp_predict(const MlpModel& model, const Matrix& x);

void write_mlp(ByteWriter& out, const MlpModel& model);
MlpModel read_mlp(ByteReader& in);

}  // namespace playtrace
