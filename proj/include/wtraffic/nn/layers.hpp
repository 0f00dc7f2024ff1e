#pragma once

// Forward and backward passes of the CNN sublayers as free functions over
// dense Eigen types. A feature map of one sample is an (H*W x channels) matrix:
// one contiguous column per channel, row index y * W + x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/types.hpp"

namespace wtraffic::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using IndexMat = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>;

struct MapShape {
  Eigen::Index channels = 1;
  Eigen::Index height = 1;
  Eigen::Index width = 1;
  Eigen::Index spatial() const noexcept { return height * width; }
  Eigen::Index size() const noexcept { return channels * height * width; }
  friend bool operator==(const MapShape&, const MapShape&) = default;
};

struct KernelShape {
  Eigen::Index height = 1;
  Eigen::Index width = 1;
};

// ---------------------------------------------------------------- convolution

inline MapShape conv_output_shape(const MapShape& in, Eigen::Index out_channels, KernelShape k) {
  if (k.height < 1 || k.width < 1 || k.height > in.height || k.width > in.width) {
    throw ShapeError("convolution kernel does not fit the input");
  }
  return {out_channels, in.height - k.height + 1, in.width - k.width + 1};
}

/// Patch matrix (P x Cin*kh*kw): row y*Wout + x holds the receptive field of
/// output (y, x), ordered channel, kernel row, kernel column.
template <typename S>
Mat<S> im2col(const Mat<S>& in, const MapShape& shape, KernelShape k) {
  if (in.cols() != shape.channels || in.rows() != shape.spatial()) {
    throw ShapeError("feature map does not match its declared shape");
  }
  const auto out = conv_output_shape(shape, 1, k);
  Mat<S> cols(out.spatial(), shape.channels * k.height * k.width);
  Eigen::Index r = 0;
  for (Eigen::Index c = 0; c < shape.channels; ++c) {
    for (Eigen::Index dy = 0; dy < k.height; ++dy) {
      for (Eigen::Index dx = 0; dx < k.width; ++dx, ++r) {
        for (Eigen::Index y = 0; y < out.height; ++y) {
          cols.col(r).segment(y * out.width, out.width) =
              in.col(c).segment((y + dy) * shape.width + dx, out.width);
        }
      }
    }
  }
  return cols;
}

/// Scatter-adds a patch-matrix gradient back onto the input map.
template <typename S>
Mat<S> col2im(const Mat<S>& dcols, const MapShape& shape, KernelShape k) {
  const auto out = conv_output_shape(shape, 1, k);
  Mat<S> din = Mat<S>::Zero(shape.spatial(), shape.channels);
  Eigen::Index r = 0;
  for (Eigen::Index c = 0; c < shape.channels; ++c) {
    for (Eigen::Index dy = 0; dy < k.height; ++dy) {
      for (Eigen::Index dx = 0; dx < k.width; ++dx, ++r) {
        for (Eigen::Index y = 0; y < out.height; ++y) {
          din.col(c).segment((y + dy) * shape.width + dx, out.width) +=
              dcols.col(r).segment(y * out.width, out.width);
        }
      }
    }
  }
  return din;
}

/// Valid-region, stride-1 cross-correlation: out[o](y,x) = sum over c, dy, dx of
/// w[o](c, dy, dx) * in[c](y+dy, x+dx) + b[o]. Weights are (Cout x Cin*kh*kw).
template <typename S>
Mat<S> conv_forward_cols(const Mat<S>& cols, const Mat<S>& weight, const Vec<S>& bias) {
  if (weight.cols() != cols.cols() || bias.size() != weight.rows()) {
    throw ShapeError("convolution weights do not match the input");
  }
  Mat<S> out = cols * weight.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

template <typename S>
Mat<S> conv_forward(const Mat<S>& in, const MapShape& shape, const Mat<S>& weight,
                    const Vec<S>& bias, KernelShape k) {
  return conv_forward_cols<S>(im2col<S>(in, shape, k), weight, bias);
}

/// Accumulates weight and bias gradients only (no input gradient).
template <typename S>
void conv_weight_gradient(const Mat<S>& cols, const Mat<S>& dout, Mat<S>& dweight, Vec<S>& dbias) {
  dweight.noalias() += dout.transpose() * cols;
  dbias += dout.colwise().sum().transpose();
}

/// Accumulates weight and bias gradients; returns the gradient of the patch
/// matrix (P x Cin*kh*kw) for col2im.
template <typename S>
Mat<S> conv_backward(const Mat<S>& cols, const Mat<S>& dout, const Mat<S>& weight,
                     Mat<S>& dweight, Vec<S>& dbias) {
  dweight.noalias() += dout.transpose() * cols;
  dbias += dout.colwise().sum().transpose();
  return dout * weight;
}

// ----------------------------------------------------------------- batch norm

template <typename S>
struct ChannelStats {
  Vec<S> mean;
  Vec<S> var;  ///< biased (divide-by-count)
};

/// Per-channel mean and biased variance over every sample and position.
template <typename S>
ChannelStats<S> channel_statistics(const std::vector<Mat<S>>& batch) {
  if (batch.size() < 2) throw DomainError("batch normalization needs at least 2 samples when training");
  const Eigen::Index c = batch.front().cols();
  Vec<S> sum = Vec<S>::Zero(c);
  Eigen::Index count = 0;
  for (const auto& x : batch) {
    sum += x.colwise().sum().transpose();
    count += x.rows();
  }
  ChannelStats<S> st;
  st.mean = sum / static_cast<S>(count);
  Vec<S> sq = Vec<S>::Zero(c);
  for (const auto& x : batch) {
    sq += (x.rowwise() - st.mean.transpose()).colwise().squaredNorm().transpose();
  }
  st.var = sq / static_cast<S>(count);
  return st;
}

/// (x - mean) / sqrt(var + eps), per channel.
template <typename S>
Mat<S> batchnorm_normalize(const Mat<S>& x, const Vec<S>& mean, const Vec<S>& var, S eps) {
  const Vec<S> inv = (var.array() + eps).rsqrt().matrix();
  return (x.rowwise() - mean.transpose()) * inv.asDiagonal();
}

/// gamma * xhat + beta, per channel.
template <typename S>
Mat<S> batchnorm_scale(const Mat<S>& xhat, const Vec<S>& gamma, const Vec<S>& beta) {
  Mat<S> y = xhat * gamma.asDiagonal();
  y.rowwise() += beta.transpose();
  return y;
}

/// Training-mode backward through normalization with batch statistics.
/// Accumulates dgamma and dbeta and returns dx per sample.
template <typename S>
std::vector<Mat<S>> batchnorm_backward(const std::vector<Mat<S>>& xhat,
                                       const std::vector<Mat<S>>& dy, const Vec<S>& gamma,
                                       const Vec<S>& var, S eps, Vec<S>& dgamma, Vec<S>& dbeta) {
  const Eigen::Index c = gamma.size();
  Vec<S> sum_dxhat = Vec<S>::Zero(c), sum_dxhat_xhat = Vec<S>::Zero(c);
  Eigen::Index count = 0;
  for (std::size_t i = 0; i < xhat.size(); ++i) {
    const Vec<S> d = dy[i].colwise().sum().transpose();
    const Vec<S> g = dy[i].cwiseProduct(xhat[i]).colwise().sum().transpose();
    dbeta += d;
    dgamma += g;
    sum_dxhat += gamma.cwiseProduct(d);
    sum_dxhat_xhat += gamma.cwiseProduct(g);
    count += dy[i].rows();
  }
  const S m = static_cast<S>(count);
  const Vec<S> inv = (var.array() + eps).rsqrt().matrix();
  std::vector<Mat<S>> dx(xhat.size());
  for (std::size_t i = 0; i < xhat.size(); ++i) {
    Mat<S> dxhat = dy[i] * gamma.asDiagonal();
    dxhat.rowwise() -= (sum_dxhat / m).transpose();
    dxhat -= xhat[i] * (sum_dxhat_xhat / m).asDiagonal();
    dx[i] = dxhat * inv.asDiagonal();
  }
  return dx;
}

// ----------------------------------------------------------------------- relu

template <typename S>
  requires std::is_arithmetic_v<S>
S relu(S v) {
  return std::max(v, S(0));
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseMax(typename Derived::Scalar(0));
}

/// Passes gradient where the forward output was positive.
template <typename S>
Mat<S> relu_backward(const Mat<S>& output, const Mat<S>& dout) {
  return (output.array() > S(0)).select(dout, S(0));
}

// -------------------------------------------------------------------- pooling

struct PoolShape {
  Eigen::Index height = 1;
  Eigen::Index width = 4;
  Eigen::Index stride_y = 1;
  Eigen::Index stride_x = 4;
};

inline MapShape pool_output_shape(const MapShape& in, const PoolShape& p) {
  if (p.height < 1 || p.width < 1 || p.stride_y < 1 || p.stride_x < 1 || p.height > in.height ||
      p.width > in.width) {
    throw ShapeError("pooling region does not fit the input");
  }
  return {in.channels, (in.height - p.height) / p.stride_y + 1,
          (in.width - p.width) / p.stride_x + 1};
}

template <typename S>
struct PoolResult {
  Mat<S> output;
  IndexMat argmax;  ///< input row of each window's maximum
};

/// Each output is the maximum over its window; the first maximum wins ties.
template <typename S>
PoolResult<S> maxpool_forward(const Mat<S>& in, const MapShape& shape, const PoolShape& p) {
  if (in.cols() != shape.channels || in.rows() != shape.spatial()) {
    throw ShapeError("feature map does not match its declared shape");
  }
  const auto out = pool_output_shape(shape, p);
  PoolResult<S> r{Mat<S>(out.spatial(), shape.channels), IndexMat(out.spatial(), shape.channels)};
  for (Eigen::Index c = 0; c < shape.channels; ++c) {
    const S* src = in.col(c).data();
    for (Eigen::Index y = 0; y < out.height; ++y) {
      for (Eigen::Index x = 0; x < out.width; ++x) {
        const Eigen::Index origin = (y * p.stride_y) * shape.width + x * p.stride_x;
        Eigen::Index best = origin;
        S value = src[best];
        for (Eigen::Index dy = 0; dy < p.height; ++dy) {
          const Eigen::Index base = origin + dy * shape.width;
          for (Eigen::Index dx = 0; dx < p.width; ++dx) {
            if (src[base + dx] > value) {
              value = src[base + dx];
              best = base + dx;
            }
          }
        }
        r.output(y * out.width + x, c) = value;
        r.argmax(y * out.width + x, c) = best;
      }
    }
  }
  return r;
}

template <typename S>
Mat<S> maxpool_backward(const Mat<S>& dout, const IndexMat& argmax, const MapShape& in) {
  Mat<S> din = Mat<S>::Zero(in.spatial(), in.channels);
  for (Eigen::Index c = 0; c < dout.cols(); ++c) {
    for (Eigen::Index j = 0; j < dout.rows(); ++j) din(argmax(j, c), c) += dout(j, c);
  }
  return din;
}

// -------------------------------------------------------------------- dropout

/// Inverted-dropout multipliers: 0 with probability p_drop, else 1/(1 - p_drop).
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop, std::mt19937_64& engine) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw DomainError("dropout probability must be in [0, 1)");
  const S keep = S(1) / S(1.0 - p_drop);
  Mat<S> mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
      mask(i, j) = u < p_drop ? S(0) : keep;
    }
  }
  return mask;
}

/// Training mode zeroes and rescales; inference mode is the identity.
template <typename S>
Mat<S> dropout(const Mat<S>& values, double p_drop, bool training, std::mt19937_64& engine) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw DomainError("dropout probability must be in [0, 1)");
  if (!training || p_drop == 0.0) return values;
  return values.cwiseProduct(dropout_mask<S>(values.rows(), values.cols(), p_drop, engine));
}

// -------------------------------------------------------------------- softmax

/// Column-wise softmax, shifted by each column's maximum.
template <typename S>
Mat<S> softmax(const Mat<S>& scores) {
  Mat<S> p = scores.rowwise() - scores.colwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().rowwise() / p.colwise().sum().array();
}

template <typename S>
Vec<S> softmax(const Vec<S>& scores) {
  Vec<S> p = (scores.array() - scores.maxCoeff()).exp().matrix();
  return p / p.sum();
}

/// Mean negative log-likelihood of the labelled columns.
template <typename S>
S cross_entropy(const Mat<S>& probabilities, const std::vector<int>& labels) {
  S loss = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    loss -= std::log(std::max(probabilities(labels[j], static_cast<Eigen::Index>(j)),
                              std::numeric_limits<S>::min()));
  }
  return loss / static_cast<S>(labels.size());
}

// ------------------------------------------------------------ fully connected

template <typename S>
Mat<S> dense_forward(const Mat<S>& x, const Mat<S>& weight, const Vec<S>& bias) {
  if (weight.cols() != x.rows() || bias.size() != weight.rows()) {
    throw ShapeError("fully-connected weights do not match the input");
  }
  Mat<S> y = weight * x;
  y.colwise() += bias;
  return y;
}

/// Accumulates weight and bias gradients; returns dx.
template <typename S>
Mat<S> dense_backward(const Mat<S>& x, const Mat<S>& dout, const Mat<S>& weight, Mat<S>& dweight,
                      Vec<S>& dbias) {
  dweight.noalias() += dout * x.transpose();
  dbias += dout.rowwise().sum();
  return weight.transpose() * dout;
}

}  // namespace wtraffic::nn
