#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/image.hpp"
#include "wtraffic/nn/layers.hpp"

namespace wtraffic {

/// conv -> batch norm -> ReLU -> max pool.
struct ConvBlockSpec {
  Eigen::Index out_channels = 8;
  nn::KernelShape kernel{3, 7};
  nn::PoolShape pool{1, 4, 1, 4};
};

struct CnnArchitecture {
  Eigen::Index input_height = kImageRows;
  Eigen::Index input_width = kWindowSize;
  std::vector<ConvBlockSpec> blocks = {{8, {3, 7}, {1, 4, 1, 4}}, {16, {3, 5}, {1, 4, 1, 4}}};
  double p_drop = 0.6;
  Eigen::Index n_classes = kNumClasses;
  double bn_epsilon = 1e-5;
  double bn_decay = 0.9;  ///< running = decay * running + (1 - decay) * batch

  /// Shapes entering each block, then the shape after the last block.
  std::vector<nn::MapShape> map_shapes() const;
  Eigen::Index feature_size() const;
  void validate() const;
};

struct ConvBlockParams {
  Eigen::MatrixXd weight;  ///< out_channels x (in_channels * kh * kw)
  Eigen::VectorXd bias;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct CnnModel {
  CnnArchitecture arch;
  std::vector<ConvBlockParams> blocks;
  Eigen::MatrixXd fc_weight;  ///< n_classes x feature_size
  Eigen::VectorXd fc_bias;

  /// Zero-initialized parameters of the right shapes (unit variance, unit gamma).
  static CnnModel zeros(const CnnArchitecture& arch);
  /// Every entry zero, gamma and running_var included. Shape of a gradient or velocity.
  static CnnModel accumulator(const CnnArchitecture& arch);
  /// He-normal convolution weights, Xavier-uniform fully-connected weights.
  static CnnModel initialize(const CnnArchitecture& arch, std::uint64_t seed);
};

/// Named views of every parameter in file order. Trainable ones are the
/// convolution weights and biases, gamma, beta and the fully-connected layer.
struct ParameterView {
  std::string name;
  std::vector<Eigen::Index> shape;
  double* data;
  Eigen::Index size;
  bool trainable;
};
std::vector<ParameterView> parameter_views(CnnModel& model);

enum class Mode { Training, Inference };

/// Class probabilities (n_classes x batch) for a batch of images. Training mode
/// uses batch statistics and draws dropout masks from `engine`.
Eigen::MatrixXd cnn_forward_batch(const CnnModel& model, std::span<const Eigen::MatrixXd* const> images,
                                  Mode mode, std::mt19937_64* engine = nullptr);

/// Single-image class probabilities. Training mode needs a batch, so this is
/// inference unless a batch-free model (no blocks) is supplied.
Eigen::VectorXd cnn_forward(const CnnModel& model, const ClassifierImage& image,
                            Mode mode = Mode::Inference);

struct BatchGradient {
  double loss = 0.0;
  CnnModel gradient;  ///< same layout as the model; running statistics unused
  /// Batch statistics per block, for the running-average update.
  std::vector<nn::ChannelStats<double>> batch_stats;
};

/// Training-mode forward and backward pass of mean cross-entropy over the batch.
BatchGradient cnn_loss_gradient(const CnnModel& model,
                                std::span<const Eigen::MatrixXd* const> images,
                                const std::vector<int>& labels, std::mt19937_64& engine);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 100;
  std::size_t batch_size = 16;
  double validation_fraction = 0.30;
  std::uint64_t seed = 1;
  /// On a rise in full training loss, restore the previous epoch's model,
  /// halve the learning rate and clear the momentum.
  bool halve_on_increase = true;
  CnnArchitecture arch;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  ///< inference-mode loss over the training split
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
  bool rejected = false;    ///< loss rose; epoch was rolled back
};

struct TrainResult {
  CnnModel model;           ///< best validation accuracy, ties to lower loss
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  std::vector<EpochRecord> history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

/// Stratified split: round(fraction * count) of each class go to validation.
void stratified_split(std::span<const VehicleClass> labels, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& validation);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult cnn_train(std::span<const ClassifierImage> images, std::span<const VehicleClass> labels,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Predicted class: the probability argmax, lowest ordinal on ties.
VehicleClass predicted_class(const Eigen::Ref<const Eigen::VectorXd>& probabilities);

/// Of several models' probability vectors, keeps the one with the highest
/// maximum probability (first on ties).
Eigen::VectorXd fuse_max_probability(std::span<const Eigen::VectorXd> candidates);

// Model file: "WTCN" | u16 version | u32 descriptor length | JSON descriptor |
// f64 parameters in descriptor order. All little-endian.
inline constexpr std::uint16_t kModelVersion = 1;
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace wtraffic
