#include "splitstream/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splitstream {

std::string parameter_name(std::size_t layer, bool bias) {
  return std::to_string(layer) + (bias ? ".bias" : ".weights");
}

template <typename T>
BasicNetwork<T>::BasicNetwork(Shape input_shape, std::vector<BasicLayer<T>> layers)
    : shapes_{std::move(input_shape)}, layers_(std::move(layers)) {
  for (const std::size_t d : shapes_.front()) {
    if (d == 0) throw ConfigError("network input shape has a zero dimension");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, BasicConvLayer<T>>) {
              if (l.weights.dims() != Shape{l.kernel_size, l.kernel_size, l.in_channels,
                                            l.out_channels} ||
                  l.bias.dims() != Shape{l.out_channels}) {
                throw ConfigError("conv parameter dims inconsistent with channel counts");
              }
            } else if constexpr (std::is_same_v<L, BasicDenseLayer<T>>) {
              if (l.weights.dims() != Shape{l.in_features, l.out_features} ||
                  l.bias.dims() != Shape{l.out_features}) {
                throw ConfigError("dense parameter dims inconsistent with feature counts");
              }
            }
          },
          layers_[i]);
      shapes_.push_back(splitstream::output_shape<T>(layers_[i], shapes_.back()));
    } catch (const ConfigError& e) {
      throw ConfigError("layer " + std::to_string(i) + " (" +
                        std::string(layer_type_name(layers_[i])) + "): " + e.what());
    }
  }
}

template <typename T>
BasicTensor<T>& BasicNetwork<T>::parameter(const std::string& name) {
  return const_cast<BasicTensor<T>&>(std::as_const(*this).parameter(name));
}

template <typename T>
const BasicTensor<T>& BasicNetwork<T>::parameter(const std::string& name) const {
  const auto dot = name.find('.');
  if (dot == std::string::npos) throw InternalError("malformed parameter name " + name);
  const std::size_t index = std::stoul(name.substr(0, dot));
  const std::string which = name.substr(dot + 1);
  if (index >= layers_.size()) throw InternalError("no layer for parameter " + name);
  const BasicTensor<T>* found = std::visit(
      [&](const auto& l) -> const BasicTensor<T>* {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BasicConvLayer<T>> || std::is_same_v<L, BasicDenseLayer<T>>) {
          if (which == "weights") return &l.weights;
          if (which == "bias") return &l.bias;
        }
        return nullptr;
      },
      layers_[index]);
  if (!found) throw InternalError("no parameter named " + name);
  return *found;
}

template <typename T>
std::vector<std::string> BasicNetwork<T>::parameter_names(std::size_t first_layer) const {
  std::vector<std::string> names;
  for (std::size_t i = first_layer; i < layers_.size(); ++i) {
    if (has_parameters(layers_[i])) {
      names.push_back(parameter_name(i, false));
      names.push_back(parameter_name(i, true));
    }
  }
  return names;
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& name : parameter_names()) n += parameter(name).size();
  return n;
}

template <typename T>
BasicNetwork<T> BasicNetwork<T>::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > layers_.size()) {
    throw ConfigError("slice [" + std::to_string(first) + ", " + std::to_string(last) +
                      ") out of range for " + std::to_string(layers_.size()) + " layers");
  }
  return BasicNetwork(shapes_[first], std::vector<BasicLayer<T>>(layers_.begin() + first,
                                                                  layers_.begin() + last));
}

namespace {

template <typename T>
BasicTensor<T> apply_layer(const BasicLayer<T>& layer, const BasicTensor<T>& x) {
  return std::visit(
      [&](const auto& l) -> BasicTensor<T> {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BasicConvLayer<T>>) {
          return conv2d_forward(x, l);
        } else if constexpr (std::is_same_v<L, PoolLayer>) {
          return pool2d_forward(x, l);
        } else if constexpr (std::is_same_v<L, ActivationLayer>) {
          return activation_forward(x, l);
        } else if constexpr (std::is_same_v<L, FlattenLayer>) {
          return x.reshaped({x.size()});
        } else {
          return dense_forward(x, l);
        }
      },
      layer);
}

template <typename T>
void check_input(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
  if (input.dims() != net.input_shape()) {
    throw ConfigError("layer 0: input " + to_string(input.dims()) + " does not match declared " +
                      to_string(net.input_shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> model_forward(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
  check_input(net, input);
  BasicTensor<T> x = input;
  for (const auto& layer : net.layers()) x = apply_layer(layer, x);
  return x;
}

template <typename T>
ForwardPass<T> model_forward_cached(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
  check_input(net, input);
  ForwardPass<T> pass;
  pass.activations.reserve(net.size() + 1);
  pass.activations.push_back(input);
  for (const auto& layer : net.layers()) {
    pass.activations.push_back(apply_layer(layer, pass.activations.back()));
  }
  return pass;
}

template <typename T>
BackpropResult<T> backprop(const BasicNetwork<T>& net, std::span<const BasicExample<T>> batch,
                           LossKind loss, std::size_t first_trainable) {
  if (batch.empty()) throw DataError("backprop: empty batch");
  if (first_trainable > net.size()) throw InternalError("first_trainable beyond network");

  BackpropResult<T> result;
  for (const auto& name : net.parameter_names(first_trainable)) {
    result.grads.emplace(name, BasicTensor<T>(net.parameter(name).dims()));
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  result.outputs.reserve(batch.size());

  for (const auto& example : batch) {
    ForwardPass<T> pass = model_forward_cached(net, example.input);
    const BasicTensor<T>& yhat = pass.output();
    if (example.target.size() != yhat.size()) {
      throw ConfigError("target size " + std::to_string(example.target.size()) +
                        " does not match model output " + to_string(yhat.dims()));
    }
    const BasicTensor<T> target = example.target.reshaped(yhat.dims());
    loss_sum += loss_forward(target, yhat, loss);
    BasicTensor<T> grad = loss_backward(target, yhat, loss, inv_batch);

    for (std::size_t i = net.size(); i-- > first_trainable;) {
      const BasicTensor<T>& x = pass.activations[i];
      const bool want_input = i > first_trainable;
      grad = std::visit(
          [&](const auto& l) -> BasicTensor<T> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, BasicConvLayer<T>>) {
              return conv2d_backward(x, l, grad, result.grads.at(parameter_name(i, false)),
                                     result.grads.at(parameter_name(i, true)), want_input);
            } else if constexpr (std::is_same_v<L, PoolLayer>) {
              return pool2d_backward(x, l, grad);
            } else if constexpr (std::is_same_v<L, ActivationLayer>) {
              return activation_backward(x, l, grad);
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
              return grad.reshaped(x.dims());
            } else {
              return dense_backward(x, l, grad, result.grads.at(parameter_name(i, false)),
                                    result.grads.at(parameter_name(i, true)), want_input);
            }
          },
          net.layer(i));
    }
    result.outputs.push_back(yhat);
  }
  result.loss = loss_sum * inv_batch;
  return result;
}

template <typename T>
void sgd_step(BasicNetwork<T>& net, const BasicGradientSet<T>& grads, double alpha,
              std::size_t first_trainable) {
  if (!(alpha >= 0.0)) throw ConfigError("learning rate must be non-negative");
  for (const auto& name : net.parameter_names(first_trainable)) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw InternalError("sgd_step: missing gradient for " + name);
    BasicTensor<T>& param = net.parameter(name);
    if (it->second.dims() != param.dims()) {
      throw InternalError("sgd_step: gradient dims mismatch for " + name);
    }
    const auto g = it->second.data();
    auto p = param.data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = static_cast<T>(static_cast<double>(p[k]) - alpha * static_cast<double>(g[k]));
    }
  }
}

namespace {

double mean_loss(const BasicNetwork<double>& net, std::span<const BasicExample<double>> batch,
                 LossKind loss) {
  double sum = 0.0;
  for (const auto& ex : batch) {
    const auto yhat = model_forward(net, ex.input);
    sum += loss_forward(ex.target.reshaped(yhat.dims()), yhat, loss);
  }
  return sum / static_cast<double>(batch.size());
}

}  // namespace

BasicGradientSet<double> numeric_gradients(const BasicNetwork<double>& net,
                                           std::span<const BasicExample<double>> batch,
                                           LossKind loss, double h, std::size_t first_trainable) {
  BasicNetwork<double> probe = net;
  BasicGradientSet<double> out;
  for (const auto& name : probe.parameter_names(first_trainable)) {
    BasicTensor<double>& param = probe.parameter(name);
    BasicTensor<double> grad(param.dims());
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double saved = param[k];
      param[k] = saved + h;
      const double up = mean_loss(probe, batch, loss);
      param[k] = saved - h;
      const double down = mean_loss(probe, batch, loss);
      param[k] = saved;
      grad[k] = (up - down) / (2.0 * h);
    }
    out.emplace(name, std::move(grad));
  }
  return out;
}

double max_relative_error(const BasicGradientSet<double>& analytic,
                          const BasicGradientSet<double>& numeric) {
  double worst = 0.0;
  for (const auto& [name, a] : analytic) {
    const auto it = numeric.find(name);
    if (it == numeric.end() || it->second.size() != a.size()) {
      throw InternalError("gradient sets disagree on parameter " + name);
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double x = a[k];
      const double y = it->second[k];
      const double err = std::abs(x - y) / std::max(1e-8, std::abs(x) + std::abs(y));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const Network& net, std::span<const Example> batch, LossKind loss, double h,
                  std::size_t first_trainable) {
  if (!(h > 0.0 && h <= 1e-1)) throw ConfigError("grad_check: h must lie in (0, 0.1]");
  const BasicNetwork<double> shadow = net.cast<double>();
  std::vector<BasicExample<double>> shadow_batch;
  shadow_batch.reserve(batch.size());
  for (const auto& ex : batch) {
    shadow_batch.push_back({ex.input.cast<double>(), ex.target.cast<double>()});
  }
  const auto analytic = backprop<double>(shadow, shadow_batch, loss, first_trainable);
  const auto numeric = numeric_gradients(shadow, shadow_batch, loss, h, first_trainable);
  return max_relative_error(analytic.grads, numeric);
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

template Tensor model_forward<float>(const Network&, const Tensor&);
template BasicTensor<double> model_forward<double>(const BasicNetwork<double>&,
                                                   const BasicTensor<double>&);
template ForwardPass<float> model_forward_cached<float>(const Network&, const Tensor&);
template ForwardPass<double> model_forward_cached<double>(const BasicNetwork<double>&,
                                                          const BasicTensor<double>&);
template BackpropResult<float> backprop<float>(const Network&, std::span<const Example>, LossKind,
                                               std::size_t);
template BackpropResult<double> backprop<double>(const BasicNetwork<double>&,
                                                 std::span<const BasicExample<double>>, LossKind,
                                                 std::size_t);
template void sgd_step<float>(Network&, const GradientSet&, double, std::size_t);
template void sgd_step<double>(BasicNetwork<double>&, const BasicGradientSet<double>&, double,
                               std::size_t);

}  // namespace splitstream
