#pragma once

#include <cstddef>
#include <string_view>
#include <variant>

#include "splitstream/tensor.hpp"

namespace splitstream {

enum class PoolMode { kMax, kAvg };
enum class ActivationKind { kSigmoid, kLeakyRelu };

std::string_view to_string(PoolMode mode) noexcept;
std::string_view to_string(ActivationKind kind) noexcept;
PoolMode parse_pool_mode(std::string_view name);
ActivationKind parse_activation(std::string_view name);

inline constexpr double kDefaultLeakySlope = 0.01;

// Valid (unpadded), stride-1 cross-correlation. Weights are k x k x in x out,
// bias is out; the bias is added once per output element.
template <typename T>
struct BasicConvLayer {
  std::size_t kernel_size = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  BasicTensor<T> weights;
  BasicTensor<T> bias;

  static BasicConvLayer zeros(std::size_t kernel, std::size_t in, std::size_t out) {
    return {kernel, in, out, BasicTensor<T>({kernel, kernel, in, out}), BasicTensor<T>({out})};
  }

  bool operator==(const BasicConvLayer&) const = default;
};

struct PoolLayer {
  std::size_t window = 2;
  PoolMode mode = PoolMode::kMax;

  bool operator==(const PoolLayer&) const = default;
};

struct ActivationLayer {
  ActivationKind kind = ActivationKind::kSigmoid;
  double slope = kDefaultLeakySlope;

  bool operator==(const ActivationLayer&) const = default;
};

struct FlattenLayer {
  bool operator==(const FlattenLayer&) const = default;
};

template <typename T>
struct BasicDenseLayer {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  BasicTensor<T> weights;  // in x out
  BasicTensor<T> bias;     // out

  static BasicDenseLayer zeros(std::size_t in, std::size_t out) {
    return {in, out, BasicTensor<T>({in, out}), BasicTensor<T>({out})};
  }

  bool operator==(const BasicDenseLayer&) const = default;
};

template <typename T>
using BasicLayer =
    std::variant<BasicConvLayer<T>, PoolLayer, ActivationLayer, FlattenLayer, BasicDenseLayer<T>>;

using ConvLayer = BasicConvLayer<float>;
using DenseLayer = BasicDenseLayer<float>;
using Layer = BasicLayer<float>;

template <typename T>
std::string_view layer_type_name(const BasicLayer<T>& layer) noexcept {
  static constexpr std::string_view names[] = {"conv", "pool", "activation", "flatten", "dense"};
  return names[layer.index()];
}

template <typename T>
bool has_parameters(const BasicLayer<T>& layer) noexcept {
  return std::holds_alternative<BasicConvLayer<T>>(layer) ||
         std::holds_alternative<BasicDenseLayer<T>>(layer);
}

// Converts the parameter tensors of a layer to another scalar type.
template <typename U, typename T>
BasicLayer<U> cast_layer(const BasicLayer<T>& layer) {
  return std::visit(
      [](const auto& l) -> BasicLayer<U> {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BasicConvLayer<T>>) {
          return BasicConvLayer<U>{l.kernel_size, l.in_channels, l.out_channels,
                                   l.weights.template cast<U>(), l.bias.template cast<U>()};
        } else if constexpr (std::is_same_v<L, BasicDenseLayer<T>>) {
          return BasicDenseLayer<U>{l.in_features, l.out_features, l.weights.template cast<U>(),
                                    l.bias.template cast<U>()};
        } else {
          return l;
        }
      },
      layer);
}

// Shape of a layer's output for a given input shape. Throws ConfigError when
// the layer cannot accept the input.
template <typename T>
Shape output_shape(const BasicLayer<T>& layer, const Shape& input);

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvLayer<T>& layer);

// Accumulates parameter gradients into grad_weights / grad_bias and returns
// the gradient with respect to the input (skipped when want_input is false).
template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvLayer<T>& layer,
                               const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weights,
                               BasicTensor<T>& grad_bias, bool want_input = true);

template <typename T>
BasicTensor<T> pool2d_forward(const BasicTensor<T>& input, const PoolLayer& layer);

// MAX routes the gradient to the first (row-major) maximal cell of each window.
template <typename T>
BasicTensor<T> pool2d_backward(const BasicTensor<T>& input, const PoolLayer& layer,
                               const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input, const ActivationLayer& layer);

template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& input, const ActivationLayer& layer,
                                   const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicDenseLayer<T>& layer);

template <typename T>
BasicTensor<T> dense_backward(const BasicTensor<T>& input, const BasicDenseLayer<T>& layer,
                              const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weights,
                              BasicTensor<T>& grad_bias, bool want_input = true);

}  // namespace splitstream
