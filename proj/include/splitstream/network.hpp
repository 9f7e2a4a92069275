#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "splitstream/layers.hpp"
#include "splitstream/loss.hpp"

namespace splitstream {

// An ordered run of layers with a fixed input shape. Used both for a whole
// model and for its client / server fragments.
template <typename T>
class BasicNetwork {
 public:
  BasicNetwork() = default;

  // Chain-checks every layer; throws ConfigError naming the failing layer.
  BasicNetwork(Shape input_shape, std::vector<BasicLayer<T>> layers);

  const Shape& input_shape() const noexcept { return shapes_.front(); }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  // shapes()[i] is the input shape of layer i; shapes().back() is the output.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

  std::size_t size() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  const std::vector<BasicLayer<T>>& layers() const noexcept { return layers_; }
  const BasicLayer<T>& layer(std::size_t i) const { return layers_.at(i); }

  // Parameter access by name ("<layer>.weights" / "<layer>.bias").
  BasicTensor<T>& parameter(const std::string& name);
  const BasicTensor<T>& parameter(const std::string& name) const;
  std::vector<std::string> parameter_names(std::size_t first_layer = 0) const;
  std::size_t parameter_count() const;

  // Layers [first, last) as their own network.
  BasicNetwork slice(std::size_t first, std::size_t last) const;

  template <typename U>
  BasicNetwork<U> cast() const {
    std::vector<BasicLayer<U>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(cast_layer<U, T>(l));
    return BasicNetwork<U>(input_shape(), std::move(out));
  }

  friend bool operator==(const BasicNetwork& a, const BasicNetwork& b) {
    return a.shapes_ == b.shapes_ && a.layers_ == b.layers_;
  }

 private:
  std::vector<Shape> shapes_{Shape{}};
  std::vector<BasicLayer<T>> layers_;
};

using Network = BasicNetwork<float>;

std::string parameter_name(std::size_t layer, bool bias);

template <typename T>
using BasicGradientSet = std::map<std::string, BasicTensor<T>>;
using GradientSet = BasicGradientSet<float>;

template <typename T>
struct BasicExample {
  BasicTensor<T> input;
  BasicTensor<T> target;
};
using Example = BasicExample<float>;

template <typename T>
struct ForwardPass {
  // activations[i] is the input of layer i; activations.back() is the output.
  std::vector<BasicTensor<T>> activations;
  const BasicTensor<T>& output() const { return activations.back(); }
};

template <typename T>
BasicTensor<T> model_forward(const BasicNetwork<T>& net, const BasicTensor<T>& input);

template <typename T>
ForwardPass<T> model_forward_cached(const BasicNetwork<T>& net, const BasicTensor<T>& input);

template <typename T>
struct BackpropResult {
  double loss = 0.0;  // mean over the batch
  BasicGradientSet<T> grads;
  std::vector<BasicTensor<T>> outputs;  // per-sample predictions
};

// Gradients of the mean batch loss for every parameter in layers
// [first_trainable, size). Layers before first_trainable are run forward only.
template <typename T>
BackpropResult<T> backprop(const BasicNetwork<T>& net, std::span<const BasicExample<T>> batch,
                           LossKind loss, std::size_t first_trainable = 0);

// theta <- theta - alpha * g for every parameter in [first_trainable, size).
template <typename T>
void sgd_step(BasicNetwork<T>& net, const BasicGradientSet<T>& grads, double alpha,
              std::size_t first_trainable = 0);

// Central-difference gradients of the mean batch loss, in double precision.
BasicGradientSet<double> numeric_gradients(const BasicNetwork<double>& net,
                                           std::span<const BasicExample<double>> batch,
                                           LossKind loss, double h,
                                           std::size_t first_trainable = 0);

// max |a - n| / max(1e-8, |a| + |n|) over all parameter entries.
double max_relative_error(const BasicGradientSet<double>& analytic,
                          const BasicGradientSet<double>& numeric);

// Runs backprop and central differences on a 64-bit shadow copy of the
// network; the network itself is not modified.
double grad_check(const Network& net, std::span<const Example> batch, LossKind loss,
                  double h = 1e-3, std::size_t first_trainable = 0);

}  // namespace splitstream
