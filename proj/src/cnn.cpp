#include "wtraffic/cnn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "binio.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace wtraffic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ------------------------------------------------------------------ shapes

std::vector<nn::MapShape> CnnArchitecture::map_shapes() const {
  std::vector<nn::MapShape> shapes{{1, input_height, input_width}};
  for (const auto& b : blocks) {
    const auto conv = nn::conv_output_shape(shapes.back(), b.out_channels, b.kernel);
    shapes.push_back(nn::pool_output_shape(conv, b.pool));
  }
  return shapes;
}

Index CnnArchitecture::feature_size() const { return map_shapes().back().size(); }

void CnnArchitecture::validate() const {
  if (input_height < 1 || input_width < 1) throw ShapeError("input shape must be positive");
  for (const auto& b : blocks) {
    if (b.out_channels < 1) throw ShapeError("blocks need at least one output channel");
  }
  if (n_classes < 2) throw ShapeError("need at least two classes");
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw DomainError("p_drop must be in [0, 1)");
  if (!(bn_epsilon >= 0.0)) throw DomainError("batch-norm epsilon must be non-negative");
  if (!(bn_decay >= 0.0 && bn_decay <= 1.0)) throw DomainError("batch-norm decay must be in [0, 1]");
  (void)map_shapes();
}

CnnModel CnnModel::zeros(const CnnArchitecture& arch) {
  arch.validate();
  CnnModel m;
  m.arch = arch;
  const auto shapes = arch.map_shapes();
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    const auto& b = arch.blocks[i];
    const Index fan_in = shapes[i].channels * b.kernel.height * b.kernel.width;
    ConvBlockParams p;
    p.weight = MatrixXd::Zero(b.out_channels, fan_in);
    p.bias = VectorXd::Zero(b.out_channels);
    p.gamma = VectorXd::Ones(b.out_channels);
    p.beta = VectorXd::Zero(b.out_channels);
    p.running_mean = VectorXd::Zero(b.out_channels);
    p.running_var = VectorXd::Ones(b.out_channels);
    m.blocks.push_back(std::move(p));
  }
  m.fc_weight = MatrixXd::Zero(arch.n_classes, shapes.back().size());
  m.fc_bias = VectorXd::Zero(arch.n_classes);
  return m;
}

CnnModel CnnModel::accumulator(const CnnArchitecture& arch) {
  CnnModel m = zeros(arch);
  for (auto& b : m.blocks) {
    b.gamma.setZero();
    b.running_var.setZero();
  }
  return m;
}

CnnModel CnnModel::initialize(const CnnArchitecture& arch, std::uint64_t seed) {
  CnnModel m = zeros(arch);
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& b : m.blocks) {
    const double sd = std::sqrt(2.0 / static_cast<double>(b.weight.cols()));
    for (Index j = 0; j < b.weight.cols(); ++j) {
      for (Index i = 0; i < b.weight.rows(); ++i) b.weight(i, j) = sd * normal(engine);
    }
  }
  const double limit =
      std::sqrt(6.0 / static_cast<double>(m.fc_weight.rows() + m.fc_weight.cols()));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  for (Index j = 0; j < m.fc_weight.cols(); ++j) {
    for (Index i = 0; i < m.fc_weight.rows(); ++i) m.fc_weight(i, j) = uniform(engine);
  }
  return m;
}

std::vector<ParameterView> parameter_views(CnnModel& model) {
  std::vector<ParameterView> views;
  auto add_mat = [&](std::string name, MatrixXd& m, bool trainable) {
    views.push_back({std::move(name), {m.rows(), m.cols()}, m.data(), m.size(), trainable});
  };
  auto add_vec = [&](std::string name, VectorXd& v, bool trainable) {
    views.push_back({std::move(name), {v.size()}, v.data(), v.size(), trainable});
  };
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    auto& b = model.blocks[i];
    const std::string p = "block" + std::to_string(i + 1) + ".";
    add_mat(p + "conv.weight", b.weight, true);
    add_vec(p + "conv.bias", b.bias, true);
    add_vec(p + "bn.gamma", b.gamma, true);
    add_vec(p + "bn.beta", b.beta, true);
    add_vec(p + "bn.running_mean", b.running_mean, false);
    add_vec(p + "bn.running_var", b.running_var, false);
  }
  add_mat("fc.weight", model.fc_weight, true);
  add_vec("fc.bias", model.fc_bias, true);
  return views;
}

// ----------------------------------------------------------------- forward

namespace {

// Saturated softmax outputs drive gradients into the subnormal range, where
// arithmetic is orders of magnitude slower. Flush them to zero while training.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

struct BlockCache {
  std::vector<MatrixXd> cols;
  std::vector<MatrixXd> xhat;
  std::vector<MatrixXd> activation;
  std::vector<nn::IndexMat> argmax;
  nn::ChannelStats<double> stats;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  MatrixXd features;  ///< after dropout
  MatrixXd mask;      ///< empty when no dropout was applied
};

MatrixXd forward_impl(const CnnModel& model, std::span<const MatrixXd* const> images, Mode mode,
                      std::mt19937_64* engine, ForwardCache* cache) {
  const auto& arch = model.arch;
  const auto shapes = arch.map_shapes();
  if (model.blocks.size() != arch.blocks.size()) throw ShapeError("model blocks do not match its architecture");
  if (images.empty()) throw ShapeError("empty batch");
  const bool training = mode == Mode::Training;
  if (training && engine == nullptr) throw DomainError("training mode needs a random engine");

  const auto batch = images.size();
  std::vector<MatrixXd> x(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& img = *images[i];
    if (img.rows() != arch.input_height || img.cols() != arch.input_width) {
      throw ShapeError("image is " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                       ", model expects " + std::to_string(arch.input_height) + "x" +
                       std::to_string(arch.input_width));
    }
    // One channel; position y * W + x is the row-major pixel order.
    const MatrixXd rm = img.transpose();
    x[i] = Eigen::Map<const MatrixXd>(rm.data(), img.size(), 1);
  }
  if (cache) cache->blocks.assign(arch.blocks.size(), {});

  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const auto& spec = arch.blocks[b];
    const auto& p = model.blocks[b];
    const auto conv_shape = nn::conv_output_shape(shapes[b], spec.out_channels, spec.kernel);
    std::vector<MatrixXd> z(batch);
    std::vector<MatrixXd> cols(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      cols[i] = nn::im2col<double>(x[i], shapes[b], spec.kernel);
      z[i] = nn::conv_forward_cols<double>(cols[i], p.weight, p.bias);
    }
    nn::ChannelStats<double> stats =
        training ? nn::channel_statistics(z) : nn::ChannelStats<double>{p.running_mean, p.running_var};
    for (std::size_t i = 0; i < batch; ++i) {
      MatrixXd xhat = nn::batchnorm_normalize<double>(z[i], stats.mean, stats.var, arch.bn_epsilon);
      MatrixXd a = nn::relu(nn::batchnorm_scale<double>(xhat, p.gamma, p.beta));
      auto pooled = nn::maxpool_forward<double>(a, conv_shape, spec.pool);
      x[i] = std::move(pooled.output);
      if (cache) {
        auto& bc = cache->blocks[b];
        bc.xhat.push_back(std::move(xhat));
        bc.activation.push_back(std::move(a));
        bc.argmax.push_back(std::move(pooled.argmax));
      }
    }
    if (cache) {
      cache->blocks[b].cols = std::move(cols);
      cache->blocks[b].stats = std::move(stats);
    }
  }

  const Index f = shapes.back().size();
  MatrixXd features(f, static_cast<Index>(batch));
  for (std::size_t i = 0; i < batch; ++i) {
    features.col(static_cast<Index>(i)) = Eigen::Map<const VectorXd>(x[i].data(), f);
  }
  MatrixXd mask;
  if (training && arch.p_drop > 0.0) {
    mask = nn::dropout_mask<double>(f, static_cast<Index>(batch), arch.p_drop, *engine);
    features = features.cwiseProduct(mask);
  }
  MatrixXd probs = nn::softmax<double>(nn::dense_forward<double>(features, model.fc_weight, model.fc_bias));
  if (cache) {
    cache->features = std::move(features);
    cache->mask = std::move(mask);
  }
  return probs;
}

}  // namespace

MatrixXd cnn_forward_batch(const CnnModel& model, std::span<const MatrixXd* const> images, Mode mode,
                           std::mt19937_64* engine) {
  return forward_impl(model, images, mode, engine, nullptr);
}

VectorXd cnn_forward(const CnnModel& model, const ClassifierImage& image, Mode mode) {
  const MatrixXd* one[] = {&image.pixels};
  std::mt19937_64 engine(0);
  return forward_impl(model, one, mode, &engine, nullptr).col(0);
}

// ---------------------------------------------------------------- backward

BatchGradient cnn_loss_gradient(const CnnModel& model, std::span<const MatrixXd* const> images,
                                const std::vector<int>& labels, std::mt19937_64& engine) {
  if (labels.size() != images.size()) throw ShapeError("labels and images differ in count");
  for (int l : labels) {
    if (l < 0 || l >= model.arch.n_classes) throw DomainError("label out of range");
  }
  ForwardCache cache;
  const MatrixXd probs = forward_impl(model, images, Mode::Training, &engine, &cache);
  const auto& arch = model.arch;
  const auto shapes = arch.map_shapes();
  const auto batch = images.size();

  BatchGradient out;
  out.loss = nn::cross_entropy<double>(probs, labels);
  out.gradient = CnnModel::accumulator(arch);
  auto& g = out.gradient;

  MatrixXd dscores = probs;
  for (std::size_t j = 0; j < batch; ++j) dscores(labels[j], static_cast<Index>(j)) -= 1.0;
  dscores /= static_cast<double>(batch);
  MatrixXd dfeat = nn::dense_backward<double>(cache.features, dscores, model.fc_weight, g.fc_weight, g.fc_bias);
  if (cache.mask.size() != 0) dfeat = dfeat.cwiseProduct(cache.mask);

  std::vector<MatrixXd> dx(batch);
  {
    const auto& s = shapes.back();
    for (std::size_t i = 0; i < batch; ++i) {
      dx[i] = Eigen::Map<const MatrixXd>(dfeat.col(static_cast<Index>(i)).data(), s.spatial(), s.channels);
    }
  }
  for (std::size_t bi = arch.blocks.size(); bi-- > 0;) {
    const auto& spec = arch.blocks[bi];
    const auto& p = model.blocks[bi];
    auto& gp = g.blocks[bi];
    const auto& bc = cache.blocks[bi];
    const auto conv_shape = nn::conv_output_shape(shapes[bi], spec.out_channels, spec.kernel);
    std::vector<MatrixXd> dy(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const MatrixXd da = nn::maxpool_backward<double>(dx[i], bc.argmax[i], conv_shape);
      dy[i] = nn::relu_backward<double>(bc.activation[i], da);
    }
    const auto dz = nn::batchnorm_backward<double>(bc.xhat, dy, p.gamma, bc.stats.var, arch.bn_epsilon,
                                                   gp.gamma, gp.beta);
    for (std::size_t i = 0; i < batch; ++i) {
      if (bi > 0) {
        const MatrixXd dcols = nn::conv_backward<double>(bc.cols[i], dz[i], p.weight, gp.weight, gp.bias);
        dx[i] = nn::col2im<double>(dcols, shapes[bi], spec.kernel);
      } else {
        nn::conv_weight_gradient<double>(bc.cols[i], dz[i], gp.weight, gp.bias);
      }
    }
    out.batch_stats.insert(out.batch_stats.begin(), bc.stats);
  }
  return out;
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
  if (epochs < 1) throw DomainError("epochs must be positive");
  if (batch_size < 2) throw DomainError("batch size must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw DomainError("validation fraction must be in (0, 1)");
  }
  arch.validate();
}

void stratified_split(std::span<const VehicleClass> labels, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& validation) {
  std::mt19937_64 engine(seed);
  train.clear();
  validation.clear();
  for (auto c : kAllClasses) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), engine);
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    validation.insert(validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_split(const CnnModel& model, std::span<const ClassifierImage> images,
                          const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  constexpr std::size_t kChunk = 32;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::size_t end = std::min(idx.size(), start + kChunk);
    std::vector<const MatrixXd*> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(&images[idx[k]].pixels);
    const MatrixXd probs = cnn_forward_batch(model, batch, Mode::Inference);
    for (std::size_t k = start; k < end; ++k) {
      const int y = labels[idx[k]];
      const auto col = probs.col(static_cast<Index>(k - start));
      loss -= std::log(std::max(col(y), std::numeric_limits<double>::min()));
      Index arg = 0;
      col.maxCoeff(&arg);
      correct += (arg == y);
    }
  }
  const auto n = static_cast<double>(idx.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace

TrainResult cnn_train(std::span<const ClassifierImage> images, std::span<const VehicleClass> labels,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const FlushDenormals flush;
  if (images.size() != labels.size()) throw DataError("images and labels differ in count");
  std::array<std::size_t, kNumClasses> counts{};
  for (auto c : labels) ++counts[static_cast<std::size_t>(ordinal(c))];
  for (auto c : kAllClasses) {
    if (counts[static_cast<std::size_t>(ordinal(c))] < 2) {
      throw DataError("class '" + std::string(to_string(c)) + "' has fewer than 2 samples");
    }
  }
  if (config.arch.n_classes != kNumClasses) throw DataError("architecture must have 5 classes");

  TrainResult result;
  stratified_split(labels, config.validation_fraction, config.seed, result.train_indices,
                   result.validation_indices);
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = ordinal(labels[i]);

  CnnModel model = CnnModel::initialize(config.arch, config.seed);
  CnnModel velocity = CnnModel::accumulator(config.arch);
  std::mt19937_64 engine(config.seed ^ 0xD1B54A32D192ED03ULL);
  double lr = config.learning_rate;

  auto train_eval = evaluate_split(model, images, y, result.train_indices);
  auto val_eval = evaluate_split(model, images, y, result.validation_indices);
  double accepted_loss = train_eval.loss;
  result.model = model;
  result.best_epoch = 0;
  result.best_validation_accuracy = val_eval.accuracy;
  double best_val_loss = val_eval.loss;

  std::vector<std::size_t> order = result.train_indices;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const CnnModel snapshot = config.halve_on_increase ? model : CnnModel{};
    std::shuffle(order.begin(), order.end(), engine);

    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
      batches.emplace_back(s, std::min(order.size(), s + config.batch_size));
    }
    // Batch statistics need two samples; a trailing singleton joins the previous batch.
    if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    for (const auto& [s, e] : batches) {
      std::vector<const MatrixXd*> batch;
      std::vector<int> batch_labels;
      for (std::size_t k = s; k < e; ++k) {
        batch.push_back(&images[order[k]].pixels);
        batch_labels.push_back(y[order[k]]);
      }
      auto bg = cnn_loss_gradient(model, batch, batch_labels, engine);
      if (!std::isfinite(bg.loss)) throw DivergenceError(epoch, "training loss is not finite at epoch " + std::to_string(epoch));
      const double d = config.arch.bn_decay;
      for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        model.blocks[b].running_mean = d * model.blocks[b].running_mean + (1.0 - d) * bg.batch_stats[b].mean;
        model.blocks[b].running_var = d * model.blocks[b].running_var + (1.0 - d) * bg.batch_stats[b].var;
      }
      auto params = parameter_views(model);
      auto vel = parameter_views(velocity);
      auto grads = parameter_views(bg.gradient);
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].trainable) continue;
        Eigen::Map<VectorXd> p(params[k].data, params[k].size);
        Eigen::Map<VectorXd> v(vel[k].data, vel[k].size);
        Eigen::Map<const VectorXd> g(grads[k].data, grads[k].size);
        v = config.momentum * v - lr * g;
        p += v;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    train_eval = evaluate_split(model, images, y, result.train_indices);
    if (!std::isfinite(train_eval.loss)) throw DivergenceError(epoch, "training loss is not finite at epoch " + std::to_string(epoch));
    rec.train_loss = train_eval.loss;
    if (config.halve_on_increase && train_eval.loss > accepted_loss) {
      rec.rejected = true;
      rec.validation_loss = val_eval.loss;
      rec.validation_accuracy = val_eval.accuracy;
      model = snapshot;
      velocity = CnnModel::accumulator(config.arch);
      lr *= 0.5;
    } else {
      accepted_loss = train_eval.loss;
      val_eval = evaluate_split(model, images, y, result.validation_indices);
      rec.validation_loss = val_eval.loss;
      rec.validation_accuracy = val_eval.accuracy;
      if (val_eval.accuracy > result.best_validation_accuracy ||
          (val_eval.accuracy == result.best_validation_accuracy && val_eval.loss < best_val_loss)) {
        result.model = model;
        result.best_epoch = epoch;
        result.best_validation_accuracy = val_eval.accuracy;
        best_val_loss = val_eval.loss;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

VehicleClass predicted_class(const Eigen::Ref<const VectorXd>& probabilities) {
  if (probabilities.size() != kNumClasses) throw ShapeError("expected 5 class probabilities");
  Index arg = 0;
  probabilities.maxCoeff(&arg);
  return class_from_ordinal(static_cast<int>(arg));
}

VectorXd fuse_max_probability(std::span<const VectorXd> candidates) {
  if (candidates.empty()) throw DomainError("nothing to fuse");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].maxCoeff() > candidates[best].maxCoeff()) best = i;
  }
  return candidates[best];
}

// --------------------------------------------------------------------- I/O

namespace {

constexpr std::array<char, 4> kModelMagic = {'W', 'T', 'C', 'N'};

nlohmann::ordered_json describe(CnnModel& model) {
  const auto& a = model.arch;
  nlohmann::ordered_json arch;
  arch["input"] = {a.input_height, a.input_width};
  arch["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : a.blocks) {
    nlohmann::ordered_json jb;
    jb["out_channels"] = b.out_channels;
    jb["kernel"] = {b.kernel.height, b.kernel.width};
    jb["pool"] = {b.pool.height, b.pool.width};
    jb["pool_stride"] = {b.pool.stride_y, b.pool.stride_x};
    arch["blocks"].push_back(jb);
  }
  arch["p_drop"] = a.p_drop;
  arch["n_classes"] = a.n_classes;
  arch["bn_epsilon"] = a.bn_epsilon;
  arch["bn_decay"] = a.bn_decay;
  nlohmann::ordered_json d;
  d["architecture"] = arch;
  d["layout"] = "column-major";
  d["parameters"] = nlohmann::ordered_json::array();
  for (const auto& v : parameter_views(model)) {
    nlohmann::ordered_json p;
    p["name"] = v.name;
    p["shape"] = v.shape;
    d["parameters"].push_back(p);
  }
  return d;
}

CnnArchitecture architecture_from(const nlohmann::json& j) {
  CnnArchitecture a;
  const auto input = j.at("input").get<std::vector<Index>>();
  if (input.size() != 2) throw FormatError("model input shape must have two entries");
  a.input_height = input[0];
  a.input_width = input[1];
  a.blocks.clear();
  for (const auto& jb : j.at("blocks")) {
    ConvBlockSpec b;
    b.out_channels = jb.at("out_channels").get<Index>();
    const auto k = jb.at("kernel").get<std::vector<Index>>();
    const auto p = jb.at("pool").get<std::vector<Index>>();
    const auto s = jb.at("pool_stride").get<std::vector<Index>>();
    if (k.size() != 2 || p.size() != 2 || s.size() != 2) throw FormatError("bad block descriptor");
    b.kernel = {k[0], k[1]};
    b.pool = {p[0], p[1], s[0], s[1]};
    a.blocks.push_back(b);
  }
  a.p_drop = j.at("p_drop").get<double>();
  a.n_classes = j.at("n_classes").get<Index>();
  a.bn_epsilon = j.at("bn_epsilon").get<double>();
  a.bn_decay = j.at("bn_decay").get<double>();
  return a;
}

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  CnnModel copy = model;
  const std::string desc = describe(copy).dump();
  std::vector<unsigned char> out;
  binio::put_bytes(out, std::string(kModelMagic.data(), kModelMagic.size()));
  binio::put_uint<std::uint16_t>(out, kModelVersion);
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(desc.size()));
  binio::put_bytes(out, desc);
  for (const auto& v : parameter_views(copy)) {
    for (Index i = 0; i < v.size; ++i) binio::put_f64(out, v.data[i]);
  }
  binio::write_file(path.string(), out);
}

CnnModel load_model(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path.string());
  binio::Reader in(bytes.data(), bytes.size());
  const std::string magic = in.get_bytes(kModelMagic.size());
  if (magic != std::string(kModelMagic.data(), kModelMagic.size())) throw FormatError(path.string() + ": not a model file (bad magic)");
  const auto version = in.get_uint<std::uint16_t>();
  if (version != kModelVersion) {
    throw FormatError(path.string() + ": unsupported model version " + std::to_string(version));
  }
  const std::string desc = in.get_bytes(in.get_uint<std::uint32_t>());
  CnnModel model;
  try {
    const auto d = nlohmann::json::parse(desc);
    model = CnnModel::zeros(architecture_from(d.at("architecture")));
    if (d.value("layout", std::string()) != "column-major") throw FormatError("unknown parameter layout");
    const auto views = parameter_views(model);
    const auto& params = d.at("parameters");
    if (params.size() != views.size()) throw FormatError("parameter list does not match the architecture");
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (params[i].at("name").get<std::string>() != views[i].name ||
          params[i].at("shape").get<std::vector<Index>>() != views[i].shape) {
        throw FormatError("parameter '" + views[i].name + "' does not match the architecture");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad model descriptor: " + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": bad model architecture: " + e.what());
  } catch (const DomainError& e) {
    throw FormatError(path.string() + ": bad model architecture: " + e.what());
  }
  for (auto& v : parameter_views(model)) {
    for (Index i = 0; i < v.size; ++i) v.data[i] = in.get_f64();
  }
  if (in.remaining() != 0) throw LengthError(path.string() + ": trailing bytes after model parameters");
  return model;
}

}  // namespace wtraffic
