#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posture/standardize.hpp"

namespace posture::nn {

/// Blocks of conv(3x3, stride 1, same padding) -> ReLU -> maxpool(2x2,
/// stride 2, ceil), then flatten -> fully connected.
struct ArchSpec {
  std::size_t height = 51;
  std::size_t width = 51;
  std::size_t channels = 3;
  std::vector<std::size_t> conv_widths{16, 32, 64, 128, 128};
  std::size_t outputs = 5;

  static ArchSpec modular();
  static ArchSpec monolithic();

  /// Spatial size after each block, starting with the input: 51, 26, ..., 2.
  std::vector<std::size_t> spatial_chain() const;
  std::size_t flattened() const;
  std::size_t input_size() const { return height * width * channels; }
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const ArchSpec&) const = default;
};

/// Scratch buffers of one forward/backward pass.
template <typename Scalar>
struct Workspace {
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<RowMatrix> columns;     // im2col per block
  std::vector<RowMatrix> activated;   // post-ReLU conv output per block
  std::vector<RowMatrix> pooled;      // pool output per block
  std::vector<std::vector<std::uint32_t>> argmax;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> flat;  // features x batch
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> output;  // outputs x batch
};

/// Parameters of the network in one flat vector, layer by layer:
/// conv weights [out, in, 3, 3] then bias [out]; head weights [outputs,
/// features] then bias [outputs].
template <typename Scalar>
class Network {
 public:
  using Vector = std::vector<Scalar>;

  Network() = default;
  /// He-style fan-in scaled normal weights, zero biases.
  static Network init(const ArchSpec& spec, std::uint64_t seed);
  static Network zeros(const ArchSpec& spec);

  const ArchSpec& spec() const { return spec_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  /// Predictions for `batch` samples laid out sample-major (C, H, W per
  /// sample); output is sample-major too (batch x outputs).
  void forward(std::span<const Scalar> input, std::size_t batch, std::span<Scalar> output,
               Workspace<Scalar>& ws) const;
  std::vector<Scalar> forward(std::span<const Scalar> input, std::size_t batch) const;

  /// Mean over batch and outputs of the squared error; gradients of that
  /// loss w.r.t. every parameter are written to `grads` (resized).
  Scalar loss_and_grads(std::span<const Scalar> input, std::span<const Scalar> targets, std::size_t batch,
                        Vector& grads, Workspace<Scalar>& ws) const;

  template <typename Other>
  Network<Other> cast() const;

 private:
  template <typename>
  friend class Network;

  struct ConvSlot {
    std::size_t in, out, size, weights, bias;  // size: input spatial extent
  };
  void layout();

  ArchSpec spec_;
  std::vector<ConvSlot> conv_;
  std::size_t head_weights_ = 0, head_bias_ = 0;
  Vector params_;
};

struct TrainSchedule {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 coefficient added to every gradient
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  std::size_t lr_drop_every = 50;
  double lr_drop_factor = 0.5;
  std::uint64_t shuffle_seed = 7;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN without a validation split
};

/// Standardized inputs (rows of spec.input_size()) and targets.
struct TrainingSet {
  std::span<const float> images;
  std::span<const float> targets;
  std::size_t count = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Network<float> best;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// SGD with momentum (v <- mu v - lr (g + wd w), w <- w + v) over seeded shuffled
/// mini-batches; returns the parameters with the lowest validation loss
/// (lowest training loss when the validation set is empty).
TrainResult train(Network<float> net, const TrainingSet& train_set, const TrainingSet& validation,
                  const TrainSchedule& schedule, const EpochCallback& on_epoch = {});

/// Mean squared error over a whole set, evaluated in batches.
double evaluate_loss(const Network<float>& net, const TrainingSet& set, std::size_t batch_size = 64);

/// Predictions for every sample of a set (count x outputs).
std::vector<float> predict(const Network<float>& net, std::span<const float> images, std::size_t count,
                           std::size_t batch_size = 64);

enum class ModelKind { Modular, Monolithic };

/// A trained network together with the statistics needed to feed it raw
/// feature images and to map its outputs back to target space.
struct Model {
  ModelKind kind = ModelKind::Modular;
  Network<float> network;
  Standardizer image_stats;
  Standardizer target_stats;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Checkpoint: magic "PCNN", u32 version, spec, then tensors in the dataset
/// binary format (parameters, statistics, history).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace posture::nn
