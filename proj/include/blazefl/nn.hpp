#pragma once

// Minimal deterministic neural-network core: He-uniform initialization,
// forward/backward for the three architectures, softmax cross-entropy, plain
// SGD, and the per-client local training loop.
//
// Every reduction accumulates in ascending index order in single precision;
// bit-stability across repeated calls and across calling threads follows from
// that order control, not from extended precision. Dropout consumes exactly
// one draw per activation element, so draw counts depend on shapes only.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "blazefl/data.hpp"
#include "blazefl/rng.hpp"
#include "blazefl/tensor.hpp"

namespace blazefl::nn {

namespace detail {

// y[b,j] = bias[j] + sum_i x[b,i] * w[j,i], ascending i.
inline void dense_forward(const float* x, std::int64_t b_count,
                          std::int64_t in_dim, const float* w,
                          const float* bias, std::int64_t out_dim, float* y) {
  for (std::int64_t b = 0; b < b_count; ++b) {
    const float* xr = x + b * in_dim;
    float* yr = y + b * out_dim;
    for (std::int64_t j = 0; j < out_dim; ++j) {
      float acc = bias[j];
      const float* wr = w + j * in_dim;
      for (std::int64_t i = 0; i < in_dim; ++i) {
        acc += xr[i] * wr[i];
      }
      yr[j] = acc;
    }
  }
}

}  // namespace detail

// 3x3 convolution, stride 1, zero padding 1 (same spatial size). Inner
// accumulation ascends (ic, ky, kx).
inline void conv3x3_forward(const float* in, std::int64_t b_count,
                            std::int64_t channels, std::int64_t h,
                            std::int64_t w, const float* weight,
                            const float* bias, std::int64_t out_channels,
                            float* out) {
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t oc = 0; oc < out_channels; ++oc) {
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          float acc = bias != nullptr ? bias[oc] : 0.0f;
          for (std::int64_t ic = 0; ic < channels; ++ic) {
            const float* plane = in + ((b * channels + ic) * h) * w;
            const float* wrow = weight + ((oc * channels + ic) * 3) * 3;
            for (std::int64_t ky = 0; ky < 3; ++ky) {
              const std::int64_t sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              for (std::int64_t kx = 0; kx < 3; ++kx) {
                const std::int64_t sx = x + kx - 1;
                if (sx < 0 || sx >= w) continue;
                acc += plane[sy * w + sx] * wrow[ky * 3 + kx];
              }
            }
          }
          out[((b * out_channels + oc) * h + y) * w + x] = acc;
        }
      }
    }
  }
}

// 2x2 max pooling, stride 2, floor spatial. Ties keep the lowest flat input
// index; the window is scanned in ascending flat order.
inline void maxpool2_forward(const float* in, std::int64_t b_count,
                             std::int64_t channels, std::int64_t h,
                             std::int64_t w, float* out,
                             std::int64_t* argmax) {
  const std::int64_t oh = h / 2, ow = w / 2;
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const float* plane = in + ((b * channels + c) * h) * w;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          std::int64_t best_idx = (oy * 2) * w + ox * 2;
          float best = plane[best_idx];
          for (std::int64_t dy = 0; dy < 2; ++dy) {
            for (std::int64_t dx = 0; dx < 2; ++dx) {
              const std::int64_t idx = (oy * 2 + dy) * w + (ox * 2 + dx);
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          const std::int64_t out_idx = ((b * channels + c) * oh + oy) * ow + ox;
          out[out_idx] = best;
          argmax[out_idx] = (b * channels + c) * h * w + best_idx;
        }
      }
    }
  }
}

struct ForwardCache {
  Tensor input;
  // MLP / WidePayload
  std::vector<float> fc1_pre;
  std::vector<float> fc1_act;
  std::vector<float> dropout_scale;  // empty when dropout is off
  // SmallCNN
  std::vector<float> conv1_pre;
  std::vector<float> pool1_out;
  std::vector<std::int64_t> pool1_argmax;
  std::vector<float> conv2_pre;
  std::vector<float> pool2_out;
  std::vector<std::int64_t> pool2_argmax;
};

// He-uniform weights (bound sqrt(6/fan_in)), zero biases. Draws are consumed
// in layout order, so the result is a pure function of (spec, stream seed).
inline ModelParams init_params(const ModelSpec& spec, rng::RngStream& stream) {
  ModelParams params = ModelParams::zeros(make_layout(spec));
  std::size_t offset = 0;
  for (const auto& entry : params.layout) {
    const std::size_t count = entry.numel();
    if (entry.shape.size() > 1) {
      const double fan_in = static_cast<double>(count) /
                            static_cast<double>(entry.shape[0]);
      const double bound = std::sqrt(6.0 / fan_in);
      for (std::size_t i = 0; i < count; ++i) {
        const double u = rng::next_uniform(stream);
        params.values[offset + i] =
            static_cast<float>((2.0 * u - 1.0) * bound);
      }
    }
    offset += count;
  }
  return params;
}

namespace detail {

inline void check_batch(const ModelSpec& spec, const Tensor& batch) {
  const auto& s = batch.shape();
  if (s.size() != 4 || s[1] != spec.input_shape[0] ||
      s[2] != spec.input_shape[1] || s[3] != spec.input_shape[2]) {
    throw std::invalid_argument("forward: batch shape does not match spec input");
  }
}

inline void check_params(const ModelSpec& spec, const ModelParams& params) {
  if (params.layout != make_layout(spec) ||
      params.values.size() != layout_numel(params.layout)) {
    throw std::invalid_argument("forward: params do not match spec layout");
  }
}

}  // namespace detail

// Logits for a batch. With a dropout stream the hidden layer applies inverted
// dropout (keep probability 1-rate, kept units scaled by 1/(1-rate)); without
// one this is inference and no draws are consumed. The ballast block of
// WidePayload is never evaluated.
inline Tensor forward(const ModelSpec& spec, const ModelParams& params,
                      const Tensor& batch, rng::RngStream* dropout_stream,
                      ForwardCache* cache = nullptr) {
  spec.validate();
  detail::check_batch(spec, batch);
  detail::check_params(spec, params);
  const std::int64_t b_count = batch.shape()[0];
  const float* x = batch.data().data();

  if (spec.kind == ModelKind::MLP || spec.kind == ModelKind::WidePayload) {
    const std::int64_t in_dim = spec.input_features();
    const std::int64_t hidden = spec.hidden_width;
    const float* w1 = params.tensor_span(0).data();
    const float* b1 = params.tensor_span(1).data();
    const float* w2 = params.tensor_span(2).data();
    const float* b2 = params.tensor_span(3).data();

    std::vector<float> pre(static_cast<std::size_t>(b_count * hidden));
    detail::dense_forward(x, b_count, in_dim, w1, b1, hidden, pre.data());

    std::vector<float> act(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
      act[i] = pre[i] > 0.0f ? pre[i] : 0.0f;
    }

    std::vector<float> scale;
    if (dropout_stream != nullptr && spec.dropout_rate > 0.0) {
      const float keep_scale =
          static_cast<float>(1.0 / (1.0 - spec.dropout_rate));
      scale.resize(act.size());
      for (std::size_t i = 0; i < act.size(); ++i) {
        const bool keep = rng::next_uniform(*dropout_stream) >= spec.dropout_rate;
        scale[i] = keep ? keep_scale : 0.0f;
        act[i] *= scale[i];
      }
    }

    Tensor logits = Tensor::zeros({b_count, spec.n_classes});
    detail::dense_forward(act.data(), b_count, hidden, w2, b2, spec.n_classes,
                          logits.data().data());
    if (cache != nullptr) {
      cache->input = batch;
      cache->fc1_pre = std::move(pre);
      cache->fc1_act = std::move(act);
      cache->dropout_scale = std::move(scale);
    }
    return logits;
  }

  // SmallCNN: conv3x3(16) -> ReLU -> pool2 -> conv3x3(32) -> ReLU -> pool2 -> fc
  const std::int64_t c = spec.input_shape[0];
  const std::int64_t h = spec.input_shape[1];
  const std::int64_t w = spec.input_shape[2];
  const std::int64_t h2 = h / 2, w2d = w / 2, h4 = h2 / 2, w4 = w2d / 2;
  const float* conv1_w = params.tensor_span(0).data();
  const float* conv1_b = params.tensor_span(1).data();
  const float* conv2_w = params.tensor_span(2).data();
  const float* conv2_b = params.tensor_span(3).data();
  const float* fc_w = params.tensor_span(4).data();
  const float* fc_b = params.tensor_span(5).data();

  std::vector<float> conv1_pre(static_cast<std::size_t>(b_count * 16 * h * w));
  conv3x3_forward(x, b_count, c, h, w, conv1_w, conv1_b, 16, conv1_pre.data());
  std::vector<float> relu1(conv1_pre.size());
  for (std::size_t i = 0; i < conv1_pre.size(); ++i) {
    relu1[i] = conv1_pre[i] > 0.0f ? conv1_pre[i] : 0.0f;
  }
  std::vector<float> pool1(static_cast<std::size_t>(b_count * 16 * h2 * w2d));
  std::vector<std::int64_t> pool1_arg(pool1.size());
  maxpool2_forward(relu1.data(), b_count, 16, h, w, pool1.data(),
                   pool1_arg.data());

  std::vector<float> conv2_pre(static_cast<std::size_t>(b_count * 32 * h2 * w2d));
  conv3x3_forward(pool1.data(), b_count, 16, h2, w2d, conv2_w, conv2_b, 32,
                  conv2_pre.data());
  std::vector<float> relu2(conv2_pre.size());
  for (std::size_t i = 0; i < conv2_pre.size(); ++i) {
    relu2[i] = conv2_pre[i] > 0.0f ? conv2_pre[i] : 0.0f;
  }
  std::vector<float> pool2(static_cast<std::size_t>(b_count * 32 * h4 * w4));
  std::vector<std::int64_t> pool2_arg(pool2.size());
  maxpool2_forward(relu2.data(), b_count, 32, h2, w2d, pool2.data(),
                   pool2_arg.data());

  Tensor logits = Tensor::zeros({b_count, spec.n_classes});
  detail::dense_forward(pool2.data(), b_count, 32 * h4 * w4, fc_w, fc_b,
                        spec.n_classes, logits.data().data());
  if (cache != nullptr) {
    cache->input = batch;
    cache->conv1_pre = std::move(conv1_pre);
    cache->pool1_out = std::move(pool1);
    cache->pool1_argmax = std::move(pool1_arg);
    cache->conv2_pre = std::move(conv2_pre);
    cache->pool2_out = std::move(pool2);
    cache->pool2_argmax = std::move(pool2_arg);
  }
  return logits;
}

/// Index of the row maximum; ties break to the lowest class index.
inline std::int64_t argmax_row(const float* row, std::int64_t n) {
  std::int64_t best = 0;
  for (std::int64_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

namespace detail {

// Row softmax with max subtraction; returns the per-sample cross-entropy in
// double. Sums ascend over the class index.
inline double softmax_row(const float* logits, std::int64_t n_classes,
                          std::int64_t label, float* probs) {
  float max_logit = logits[0];
  for (std::int64_t j = 1; j < n_classes; ++j) {
    if (logits[j] > max_logit) max_logit = logits[j];
  }
  float sum = 0.0f;
  for (std::int64_t j = 0; j < n_classes; ++j) {
    probs[j] = std::exp(logits[j] - max_logit);
    sum += probs[j];
  }
  for (std::int64_t j = 0; j < n_classes; ++j) {
    probs[j] /= sum;
  }
  return std::log(static_cast<double>(sum)) -
         (static_cast<double>(logits[label]) - static_cast<double>(max_logit));
}

inline void check_labels(std::span<const std::int64_t> labels,
                         std::int64_t n_classes, std::int64_t b_count) {
  if (static_cast<std::int64_t>(labels.size()) != b_count) {
    throw std::invalid_argument("loss: labels length does not match batch");
  }
  for (std::int64_t y : labels) {
    if (y < 0 || y >= n_classes) {
      throw std::invalid_argument("loss: label out of range");
    }
  }
}

}  // namespace detail

/// Mean softmax cross-entropy of precomputed logits (inference-side reuse).
inline double mean_ce_loss(const Tensor& logits,
                           std::span<const std::int64_t> labels) {
  const std::int64_t b_count = logits.shape()[0];
  const std::int64_t n_classes = logits.shape()[1];
  detail::check_labels(labels, n_classes, b_count);
  std::vector<float> probs(static_cast<std::size_t>(n_classes));
  double total = 0.0;
  for (std::int64_t b = 0; b < b_count; ++b) {
    total += detail::softmax_row(logits.data().data() + b * n_classes,
                                 n_classes, labels[static_cast<std::size_t>(b)],
                                 probs.data());
  }
  return total / static_cast<double>(b_count);
}

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
};

// Softmax cross-entropy averaged over the batch, with manual backprop that
// reuses the forward's dropout masks. Gradients accumulate per sample in
// ascending sample order, then ascending element order.
inline LossGrad loss_and_grad(const ModelSpec& spec, const ModelParams& params,
                              const Tensor& batch,
                              std::span<const std::int64_t> labels,
                              rng::RngStream* dropout_stream) {
  ForwardCache cache;
  const Tensor logits = forward(spec, params, batch, dropout_stream, &cache);
  const std::int64_t b_count = batch.shape()[0];
  const std::int64_t n_classes = spec.n_classes;
  detail::check_labels(labels, n_classes, b_count);

  LossGrad result;
  result.grad = ModelParams::zeros(params.layout);

  // dlogits[b,k] = (softmax_k - one_hot_k) / B
  std::vector<float> dlogits(static_cast<std::size_t>(b_count * n_classes));
  std::vector<float> probs(static_cast<std::size_t>(n_classes));
  double total_loss = 0.0;
  const float inv_b = static_cast<float>(b_count);
  for (std::int64_t b = 0; b < b_count; ++b) {
    const std::int64_t label = labels[static_cast<std::size_t>(b)];
    total_loss += detail::softmax_row(logits.data().data() + b * n_classes,
                                      n_classes, label, probs.data());
    for (std::int64_t k = 0; k < n_classes; ++k) {
      const float delta = k == label ? 1.0f : 0.0f;
      dlogits[static_cast<std::size_t>(b * n_classes + k)] =
          (probs[static_cast<std::size_t>(k)] - delta) / inv_b;
    }
  }
  result.loss = total_loss / static_cast<double>(b_count);

  const float* x = cache.input.data().data();

  if (spec.kind == ModelKind::MLP || spec.kind == ModelKind::WidePayload) {
    const std::int64_t in_dim = spec.input_features();
    const std::int64_t hidden = spec.hidden_width;
    const float* w2 = params.tensor_span(2).data();
    float* d_w1 = result.grad.tensor_span(0).data();
    float* d_b1 = result.grad.tensor_span(1).data();
    float* d_w2 = result.grad.tensor_span(2).data();
    float* d_b2 = result.grad.tensor_span(3).data();

    std::vector<float> dz1(static_cast<std::size_t>(hidden));
    for (std::int64_t b = 0; b < b_count; ++b) {
      const float* dl = dlogits.data() + b * n_classes;
      const float* act = cache.fc1_act.data() + b * hidden;
      const float* pre = cache.fc1_pre.data() + b * hidden;
      for (std::int64_t k = 0; k < n_classes; ++k) {
        float* row = d_w2 + k * hidden;
        for (std::int64_t j = 0; j < hidden; ++j) {
          row[j] += dl[k] * act[j];
        }
        d_b2[k] += dl[k];
      }
      for (std::int64_t j = 0; j < hidden; ++j) {
        float acc = 0.0f;
        for (std::int64_t k = 0; k < n_classes; ++k) {
          acc += dl[k] * w2[k * hidden + j];
        }
        if (!cache.dropout_scale.empty()) {
          acc *= cache.dropout_scale[static_cast<std::size_t>(b * hidden + j)];
        }
        dz1[static_cast<std::size_t>(j)] = pre[j] > 0.0f ? acc : 0.0f;
      }
      const float* xr = x + b * in_dim;
      for (std::int64_t j = 0; j < hidden; ++j) {
        const float g = dz1[static_cast<std::size_t>(j)];
        if (g != 0.0f) {
          float* row = d_w1 + j * in_dim;
          for (std::int64_t i = 0; i < in_dim; ++i) {
            row[i] += g * xr[i];
          }
        }
        d_b1[j] += g;
      }
    }
    return result;  // WidePayload ballast gradients stay zero
  }

  // SmallCNN backward
  const std::int64_t c = spec.input_shape[0];
  const std::int64_t h = spec.input_shape[1];
  const std::int64_t w = spec.input_shape[2];
  const std::int64_t h2 = h / 2, w2d = w / 2, h4 = h2 / 2, w4 = w2d / 2;
  const std::int64_t fc_in = 32 * h4 * w4;
  const float* fc_w = params.tensor_span(4).data();
  const float* conv2_w = params.tensor_span(2).data();
  float* d_conv1_w = result.grad.tensor_span(0).data();
  float* d_conv1_b = result.grad.tensor_span(1).data();
  float* d_conv2_w = result.grad.tensor_span(2).data();
  float* d_conv2_b = result.grad.tensor_span(3).data();
  float* d_fc_w = result.grad.tensor_span(4).data();
  float* d_fc_b = result.grad.tensor_span(5).data();

  std::vector<float> d_pool2(static_cast<std::size_t>(fc_in));
  std::vector<float> d_conv2(static_cast<std::size_t>(32 * h2 * w2d));
  std::vector<float> d_pool1(static_cast<std::size_t>(16 * h2 * w2d));
  std::vector<float> d_conv1(static_cast<std::size_t>(16 * h * w));

  for (std::int64_t b = 0; b < b_count; ++b) {
    const float* dl = dlogits.data() + b * n_classes;
    const float* flat = cache.pool2_out.data() + b * fc_in;

    // fc grads and gradient into the flattened pooled features
    for (std::int64_t k = 0; k < n_classes; ++k) {
      float* row = d_fc_w + k * fc_in;
      for (std::int64_t i = 0; i < fc_in; ++i) {
        row[i] += dl[k] * flat[i];
      }
      d_fc_b[k] += dl[k];
    }
    for (std::int64_t i = 0; i < fc_in; ++i) {
      float acc = 0.0f;
      for (std::int64_t k = 0; k < n_classes; ++k) {
        acc += dl[k] * fc_w[k * fc_in + i];
      }
      d_pool2[static_cast<std::size_t>(i)] = acc;
    }

    // pool2 + ReLU backward into conv2 pre-activations
    std::fill(d_conv2.begin(), d_conv2.end(), 0.0f);
    const std::int64_t pool2_base = b * fc_in;
    const std::int64_t conv2_base = b * 32 * h2 * w2d;
    for (std::int64_t i = 0; i < fc_in; ++i) {
      const std::int64_t src =
          cache.pool2_argmax[static_cast<std::size_t>(pool2_base + i)] -
          conv2_base;
      if (cache.conv2_pre[static_cast<std::size_t>(conv2_base + src)] > 0.0f) {
        d_conv2[static_cast<std::size_t>(src)] +=
            d_pool2[static_cast<std::size_t>(i)];
      }
    }

    // conv2 weight/bias grads and gradient into pool1 output
    const float* pool1 = cache.pool1_out.data() + b * 16 * h2 * w2d;
    for (std::int64_t oc = 0; oc < 32; ++oc) {
      for (std::int64_t y = 0; y < h2; ++y) {
        for (std::int64_t x2 = 0; x2 < w2d; ++x2) {
          const float g = d_conv2[static_cast<std::size_t>((oc * h2 + y) * w2d + x2)];
          if (g == 0.0f) continue;
          d_conv2_b[oc] += g;
          for (std::int64_t ic = 0; ic < 16; ++ic) {
            const float* plane = pool1 + (ic * h2) * w2d;
            float* wrow = d_conv2_w + ((oc * 16 + ic) * 3) * 3;
            for (std::int64_t ky = 0; ky < 3; ++ky) {
              const std::int64_t sy = y + ky - 1;
              if (sy < 0 || sy >= h2) continue;
              for (std::int64_t kx = 0; kx < 3; ++kx) {
                const std::int64_t sx = x2 + kx - 1;
                if (sx < 0 || sx >= w2d) continue;
                wrow[ky * 3 + kx] += g * plane[sy * w2d + sx];
              }
            }
          }
        }
      }
    }
    std::fill(d_pool1.begin(), d_pool1.end(), 0.0f);
    for (std::int64_t ic = 0; ic < 16; ++ic) {
      for (std::int64_t iy = 0; iy < h2; ++iy) {
        for (std::int64_t ix = 0; ix < w2d; ++ix) {
          float acc = 0.0f;
          for (std::int64_t oc = 0; oc < 32; ++oc) {
            const float* wrow = conv2_w + ((oc * 16 + ic) * 3) * 3;
            for (std::int64_t ky = 0; ky < 3; ++ky) {
              const std::int64_t y = iy - ky + 1;
              if (y < 0 || y >= h2) continue;
              for (std::int64_t kx = 0; kx < 3; ++kx) {
                const std::int64_t x2 = ix - kx + 1;
                if (x2 < 0 || x2 >= w2d) continue;
                acc += d_conv2[static_cast<std::size_t>((oc * h2 + y) * w2d + x2)] *
                       wrow[ky * 3 + kx];
              }
            }
          }
          d_pool1[static_cast<std::size_t>((ic * h2 + iy) * w2d + ix)] = acc;
        }
      }
    }

    // pool1 + ReLU backward into conv1 pre-activations
    std::fill(d_conv1.begin(), d_conv1.end(), 0.0f);
    const std::int64_t pool1_base = b * 16 * h2 * w2d;
    const std::int64_t conv1_base = b * 16 * h * w;
    for (std::int64_t i = 0; i < 16 * h2 * w2d; ++i) {
      const std::int64_t src =
          cache.pool1_argmax[static_cast<std::size_t>(pool1_base + i)] -
          conv1_base;
      if (cache.conv1_pre[static_cast<std::size_t>(conv1_base + src)] > 0.0f) {
        d_conv1[static_cast<std::size_t>(src)] +=
            d_pool1[static_cast<std::size_t>(i)];
      }
    }

    // conv1 weight/bias grads
    const float* xin = x + b * c * h * w;
    for (std::int64_t oc = 0; oc < 16; ++oc) {
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x2 = 0; x2 < w; ++x2) {
          const float g = d_conv1[static_cast<std::size_t>((oc * h + y) * w + x2)];
          if (g == 0.0f) continue;
          d_conv1_b[oc] += g;
          for (std::int64_t ic = 0; ic < c; ++ic) {
            const float* plane = xin + (ic * h) * w;
            float* wrow = d_conv1_w + ((oc * c + ic) * 3) * 3;
            for (std::int64_t ky = 0; ky < 3; ++ky) {
              const std::int64_t sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              for (std::int64_t kx = 0; kx < 3; ++kx) {
                const std::int64_t sx = x2 + kx - 1;
                if (sx < 0 || sx >= w) continue;
                wrow[ky * 3 + kx] += g * plane[sy * w + sx];
              }
            }
          }
        }
      }
    }
  }
  return result;
}

/// values[i] -= lr * grad[i], elementwise in index order, single precision.
inline ModelParams sgd_step(ModelParams params, const ModelParams& grad,
                            double lr) {
  if (!same_layout(params.layout, grad.layout)) {
    throw std::invalid_argument("sgd_step: gradient layout mismatch");
  }
  if (lr < 0.0) {
    throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  }
  const float lr_f = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    params.values[i] -= lr_f * grad.values[i];
  }
  return params;
}

struct TrainOptions {
  std::int64_t epochs = 1;
  std::int64_t batch_size = 32;
  double lr = 0.05;
  bool augment = false;
};

struct TrainResult {
  ModelParams params;
  std::int64_t sample_count = 0;
  double final_epoch_loss = 0.0;
  std::int64_t steps = 0;
};

// Local training: per epoch, shuffle the sample order from suite.shuffle,
// then per batch (last partial batch kept) optionally augment from
// suite.augment and take one SGD step with dropout from suite.dropout.
// Pure function of (params, data, options, suite seeds).
inline TrainResult train_local(const ModelSpec& spec, const ModelParams& start,
                               const data::Dataset& client_data,
                               const TrainOptions& opt,
                               rng::RngStreamSuite& suite) {
  if (client_data.size() < 1) {
    throw std::invalid_argument("train_local: client data must be non-empty");
  }
  if (opt.batch_size < 1) {
    throw std::invalid_argument("train_local: batch_size must be >= 1");
  }
  if (opt.epochs < 0) {
    throw std::invalid_argument("train_local: epochs must be >= 0");
  }
  const std::int64_t n = client_data.size();

  TrainResult result;
  result.params = start;
  result.sample_count = n;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::int64_t{0});
    rng::shuffle(suite.shuffle, order);
    double epoch_loss = 0.0;
    for (std::int64_t begin = 0; begin < n; begin += opt.batch_size) {
      const std::int64_t end = std::min(begin + opt.batch_size, n);
      const std::span<const std::int64_t> idx(order.data() + begin,
                                              static_cast<std::size_t>(end - begin));
      data::Dataset batch = data::subset(client_data, idx);
      Tensor images = opt.augment ? data::augment(batch.images, suite.augment)
                                  : std::move(batch.images);
      LossGrad lg = loss_and_grad(spec, result.params, images, batch.labels,
                                  &suite.dropout);
      result.params = sgd_step(std::move(result.params), lg.grad, opt.lr);
      ++result.steps;
      epoch_loss += lg.loss * static_cast<double>(end - begin);
    }
    if (epoch == opt.epochs - 1) {
      result.final_epoch_loss = epoch_loss / static_cast<double>(n);
    }
  }
  return result;
}

}  // namespace blazefl::nn
