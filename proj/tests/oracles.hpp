#pragma once

// Independent reference computations for the test suites. These deliberately
// use plain loops over std::vector so they share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wtraffic/cnn.hpp"

namespace oracle {

/// Inverse complementary error function by bisection on std::erfc.
inline double erfc_inv_bisection(double y) {
  if (y > 1.0) return -erfc_inv_bisection(2.0 - y);
  double lo = -10.0, hi = 10.0;  // erfc is decreasing
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid) > y) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Dense [c][y][x] tensor.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  Tensor3() = default;
  Tensor3(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_ * h_ * w_), 0.0) {}
  double& at(int ch, int y, int x) { return v[static_cast<std::size_t>((ch * h + y) * w + x)]; }
  double at(int ch, int y, int x) const { return v[static_cast<std::size_t>((ch * h + y) * w + x)]; }
};

inline Tensor3 random_tensor(int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor3 t(c, h, w);
  for (auto& x : t.v) x = n(rng);
  return t;
}

/// Library feature-map layout: one column per channel, row y * W + x.
inline Eigen::MatrixXd to_map(const Tensor3& t) {
  Eigen::MatrixXd m(t.h * t.w, t.c);
  for (int ch = 0; ch < t.c; ++ch)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) m(y * t.w + x, ch) = t.at(ch, y, x);
  return m;
}

inline Tensor3 from_map(const Eigen::MatrixXd& m, int h, int w) {
  Tensor3 t(static_cast<int>(m.cols()), h, w);
  for (int ch = 0; ch < t.c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(ch, y, x) = m(y * w + x, ch);
  return t;
}

/// weight[o][c][dy][dx] is stored at weight(o, (c * kh + dy) * kw + dx).
inline Tensor3 conv(const Tensor3& in, const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias,
                    int kh, int kw) {
  const int cout = static_cast<int>(weight.rows());
  Tensor3 out(cout, in.h - kh + 1, in.w - kw + 1);
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        double s = bias(o);
        for (int c = 0; c < in.c; ++c)
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) s += weight(o, (c * kh + dy) * kw + dx) * in.at(c, y + dy, x + dx);
        out.at(o, y, x) = s;
      }
  return out;
}

inline Tensor3 maxpool(const Tensor3& in, int ph, int pw, int sy, int sx) {
  Tensor3 out(in.c, (in.h - ph) / sy + 1, (in.w - pw) / sx + 1);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        double m = -INFINITY;
        for (int dy = 0; dy < ph; ++dy)
          for (int dx = 0; dx < pw; ++dx) m = std::max(m, in.at(c, y * sy + dy, x * sx + dx));
        out.at(c, y, x) = m;
      }
  return out;
}

/// Per-channel normalization with the given statistics, then scale and shift.
inline Tensor3 batchnorm(const Tensor3& in, const std::vector<double>& mean, const std::vector<double>& var,
                         const std::vector<double>& gamma, const std::vector<double>& beta, double eps) {
  Tensor3 out = in;
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x)
        out.at(c, y, x) = gamma[c] * (in.at(c, y, x) - mean[c]) / std::sqrt(var[c] + eps) + beta[c];
  return out;
}

/// Mean and biased variance per channel over a batch of tensors.
inline void batch_moments(const std::vector<Tensor3>& batch, std::vector<double>& mean, std::vector<double>& var) {
  const int C = batch.front().c;
  mean.assign(C, 0.0);
  var.assign(C, 0.0);
  double n = 0;
  for (const auto& t : batch) n += t.h * t.w;
  for (int c = 0; c < C; ++c) {
    for (const auto& t : batch)
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) mean[c] += t.at(c, y, x);
    mean[c] /= n;
    for (const auto& t : batch)
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) var[c] += (t.at(c, y, x) - mean[c]) * (t.at(c, y, x) - mean[c]);
    var[c] /= n;
  }
}

inline std::vector<double> softmax(const std::vector<double>& s) {
  std::vector<double> p(s.size());
  double total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) total += std::exp(s[i]);
  for (std::size_t i = 0; i < s.size(); ++i) p[i] = std::exp(s[i]) / total;
  return p;
}

inline std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Straight-line inference-mode forward pass of a CnnModel.
inline Eigen::VectorXd cnn_forward(const wtraffic::CnnModel& model, const Eigen::MatrixXd& image) {
  Tensor3 x(1, static_cast<int>(image.rows()), static_cast<int>(image.cols()));
  for (int y = 0; y < x.h; ++y)
    for (int c = 0; c < x.w; ++c) x.at(0, y, c) = image(y, c);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const auto& spec = model.arch.blocks[b];
    const auto& p = model.blocks[b];
    Tensor3 z = conv(x, p.weight, p.bias, static_cast<int>(spec.kernel.height), static_cast<int>(spec.kernel.width));
    z = batchnorm(z, vec(p.running_mean), vec(p.running_var), vec(p.gamma), vec(p.beta), model.arch.bn_epsilon);
    for (auto& v : z.v) v = v > 0 ? v : 0.0;
    x = maxpool(z, static_cast<int>(spec.pool.height), static_cast<int>(spec.pool.width),
                static_cast<int>(spec.pool.stride_y), static_cast<int>(spec.pool.stride_x));
  }
  // Flattened channel by channel, each channel row-major.
  std::vector<double> scores(static_cast<std::size_t>(model.fc_weight.rows()));
  for (std::size_t k = 0; k < scores.size(); ++k) {
    double s = model.fc_bias(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < x.v.size(); ++i) s += model.fc_weight(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) * x.v[i];
    scores[k] = s;
  }
  const auto p = softmax(scores);
  return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps parameters whose gradient is
/// zero to rounding from being judged on noise.
/// The floor keeps structurally zero gradients (a conv bias feeding batch
/// normalization) from dividing difference-quotient noise by itself.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between backprop and central differences over every
/// trainable parameter of `model` on a fixed batch. Every loss evaluation
/// reseeds the engine, so a dropout mask stays fixed across perturbations.
struct GradCheck {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
};

inline GradCheck gradient_check(wtraffic::CnnModel model, const std::vector<Eigen::MatrixXd>& images,
                                const std::vector<int>& labels, double step = 1e-5) {
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  auto loss = [&](const wtraffic::CnnModel& m) {
    std::mt19937_64 e(0);
    return wtraffic::cnn_loss_gradient(m, ptrs, labels, e).loss;
  };
  std::mt19937_64 e(0);
  auto grad = wtraffic::cnn_loss_gradient(model, ptrs, labels, e).gradient;
  auto views = wtraffic::parameter_views(model);
  auto gviews = wtraffic::parameter_views(grad);
  GradCheck r;
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (!views[v].trainable) continue;
    for (Eigen::Index i = 0; i < views[v].size; ++i) {
      double& w = views[v].data[i];
      const double w0 = w;
      w = w0 + step;
      const double up = loss(model);
      w = w0 - step;
      const double down = loss(model);
      w = w0;
      const double numeric = (up - down) / (2 * step);
      const double err = relative_error(gviews[v].data[i], numeric);
      ++r.checked;
      if (err > r.worst) {
        r.worst = err;
        r.worst_name = views[v].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

/// Small two-block network over a 4 x 12 image, one filter per block unless
/// told otherwise, dropout off.
inline wtraffic::CnnArchitecture tiny_architecture(Eigen::Index filters1 = 1, Eigen::Index filters2 = 1) {
  wtraffic::CnnArchitecture a;
  a.input_height = 4;
  a.input_width = 12;
  a.blocks = {{filters1, {2, 3}, {1, 2, 1, 2}}, {filters2, {2, 2}, {1, 2, 1, 2}}};
  a.p_drop = 0.0;
  return a;
}

/// Model with randomized batch-norm running statistics as well as weights.
inline wtraffic::CnnModel random_model(const wtraffic::CnnArchitecture& arch, std::uint64_t seed) {
  auto m = wtraffic::CnnModel::initialize(arch, seed);
  std::mt19937_64 rng(seed + 99);
  std::uniform_real_distribution<double> u(0.5, 1.5), s(-0.5, 0.5);
  for (auto& b : m.blocks) {
    for (Eigen::Index i = 0; i < b.gamma.size(); ++i) {
      b.gamma(i) = u(rng);
      b.beta(i) = s(rng);
      b.bias(i) = s(rng);
      b.running_mean(i) = s(rng);
      b.running_var(i) = u(rng);
    }
  }
  for (Eigen::Index i = 0; i < m.fc_bias.size(); ++i) m.fc_bias(i) = s(rng);
  return m;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oracle
