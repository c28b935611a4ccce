#pragma once

// Tensors, the flat canonically-ordered parameter vector exchanged between
// server and clients, and the small model zoo used by the simulator.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blazefl {

class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel_of(shape_)) {
      throw std::invalid_argument("Tensor: data length does not match shape");
    }
  }

  static Tensor zeros(std::vector<std::int64_t> shape) {
    const std::size_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  static std::size_t numel_of(const std::vector<std::int64_t>& shape) {
    std::size_t n = 1;
    for (std::int64_t d : shape) {
      if (d <= 0) {
        throw std::invalid_argument("Tensor: dimensions must be positive");
      }
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<float> data_;
};

struct TensorLayout {
  std::string name;
  std::vector<std::int64_t> shape;

  std::size_t numel() const { return Tensor::numel_of(shape); }

  friend bool operator==(const TensorLayout&, const TensorLayout&) = default;
};

using ParamLayout = std::vector<TensorLayout>;

inline std::size_t layout_numel(const ParamLayout& layout) {
  std::size_t n = 0;
  for (const auto& entry : layout) n += entry.numel();
  return n;
}

// Flat single-precision parameter vector. Tensors are concatenated in layout
// (definition) order; this order is canonical and shared by initialization,
// serialization, hashing and aggregation.
struct ModelParams {
  ParamLayout layout;
  std::vector<float> values;

  static ModelParams zeros(ParamLayout layout) {
    ModelParams p;
    p.values.assign(layout_numel(layout), 0.0f);
    p.layout = std::move(layout);
    return p;
  }

  std::size_t offset_of(std::size_t tensor_index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < tensor_index; ++i) off += layout[i].numel();
    return off;
  }

  std::span<float> tensor_span(std::size_t tensor_index) {
    return std::span<float>(values).subspan(offset_of(tensor_index),
                                            layout[tensor_index].numel());
  }
  std::span<const float> tensor_span(std::size_t tensor_index) const {
    return std::span<const float>(values).subspan(offset_of(tensor_index),
                                                  layout[tensor_index].numel());
  }
};

inline bool same_layout(const ParamLayout& a, const ParamLayout& b) {
  return a == b;
}

enum class ModelKind { MLP, SmallCNN, WidePayload };

// Desk-scale architectures. WidePayload is the MLP plus one ballast dense
// block whose parameters travel, hash and aggregate like any others but are
// skipped by the forward pass; it exists to push the payload into the
// millions of parameters without GPU-class compute.
struct ModelSpec {
  ModelKind kind = ModelKind::MLP;
  std::vector<std::int64_t> input_shape;  // [C,H,W]
  std::int64_t n_classes = 10;
  double dropout_rate = 0.0;        // MLP/WidePayload hidden layer only
  std::int64_t payload_width = 1;   // WidePayload only
  std::int64_t hidden_width = 128;

  void validate() const {
    if (input_shape.size() != 3 || input_shape[0] <= 0 || input_shape[1] <= 0 ||
        input_shape[2] <= 0) {
      throw std::invalid_argument("ModelSpec: input_shape must be [C,H,W]");
    }
    if (n_classes < 2) {
      throw std::invalid_argument("ModelSpec: n_classes must be >= 2");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw std::invalid_argument("ModelSpec: dropout_rate must be in [0,1)");
    }
    if (kind == ModelKind::WidePayload && payload_width < 1) {
      throw std::invalid_argument("ModelSpec: payload_width must be >= 1");
    }
    if (hidden_width < 1) {
      throw std::invalid_argument("ModelSpec: hidden_width must be >= 1");
    }
  }

  std::int64_t input_features() const {
    return input_shape[0] * input_shape[1] * input_shape[2];
  }
};

// Canonical parameter layout per architecture (definition order).
inline ParamLayout make_layout(const ModelSpec& spec) {
  spec.validate();
  const std::int64_t in = spec.input_features();
  const std::int64_t hidden = spec.hidden_width;
  switch (spec.kind) {
    case ModelKind::MLP:
      return {{"fc1.weight", {hidden, in}},
              {"fc1.bias", {hidden}},
              {"fc2.weight", {spec.n_classes, hidden}},
              {"fc2.bias", {spec.n_classes}}};
    case ModelKind::WidePayload:
      return {{"fc1.weight", {hidden, in}},
              {"fc1.bias", {hidden}},
              {"fc2.weight", {spec.n_classes, hidden}},
              {"fc2.bias", {spec.n_classes}},
              {"ballast.weight", {spec.payload_width, hidden}},
              {"ballast.bias", {spec.payload_width}}};
    case ModelKind::SmallCNN: {
      const std::int64_t c = spec.input_shape[0];
      const std::int64_t h = spec.input_shape[1];
      const std::int64_t w = spec.input_shape[2];
      const std::int64_t fc_in = 32 * (h / 4) * (w / 4);
      if (h / 4 == 0 || w / 4 == 0) {
        throw std::invalid_argument("ModelSpec: SmallCNN needs H,W >= 4");
      }
      return {{"conv1.weight", {16, c, 3, 3}}, {"conv1.bias", {16}},
              {"conv2.weight", {32, 16, 3, 3}}, {"conv2.bias", {32}},
              {"fc.weight", {spec.n_classes, fc_in}},
              {"fc.bias", {spec.n_classes}}};
    }
  }
  throw std::invalid_argument("ModelSpec: unknown kind");
}

}  // namespace blazefl
