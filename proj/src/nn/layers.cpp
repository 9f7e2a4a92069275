#include "splitstream/layers.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace splitstream {

std::string_view to_string(PoolMode mode) noexcept {
  return mode == PoolMode::kMax ? "max" : "avg";
}

std::string_view to_string(ActivationKind kind) noexcept {
  return kind == ActivationKind::kSigmoid ? "sigmoid" : "leaky_relu";
}

PoolMode parse_pool_mode(std::string_view name) {
  if (name == "max") return PoolMode::kMax;
  if (name == "avg") return PoolMode::kAvg;
  throw ConfigError("unknown pool mode '" + std::string(name) + "'");
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "sigmoid") return ActivationKind::kSigmoid;
  if (name == "leaky_relu") return ActivationKind::kLeakyRelu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {

void require_spatial(const Shape& dims, std::string_view what) {
  if (dims.size() != 3) {
    throw ConfigError(std::string(what) + " expects an HxWxC input, got " + to_string(dims));
  }
}

template <typename T>
void require_finite(const BasicTensor<T>& t, std::string_view what) {
  const auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError(std::string(what) + ": non-finite input at index " + std::to_string(i));
    }
  }
}

template <typename T>
T sigmoid(T x) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

}  // namespace

template <typename T>
Shape output_shape(const BasicLayer<T>& layer, const Shape& input) {
  return std::visit(
      [&](const auto& l) -> Shape {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BasicConvLayer<T>>) {
          require_spatial(input, "conv");
          if (input[2] != l.in_channels) {
            throw ConfigError("conv expects " + std::to_string(l.in_channels) +
                              " input channels, got " + to_string(input));
          }
          if (input[0] < l.kernel_size || input[1] < l.kernel_size) {
            throw ConfigError("conv kernel " + std::to_string(l.kernel_size) +
                              " larger than input " + to_string(input));
          }
          return {input[0] - l.kernel_size + 1, input[1] - l.kernel_size + 1, l.out_channels};
        } else if constexpr (std::is_same_v<L, PoolLayer>) {
          require_spatial(input, "pool");
          if (l.window < 2) throw ConfigError("pool window must be >= 2");
          if (input[0] % l.window != 0 || input[1] % l.window != 0) {
            throw ConfigError("pool window " + std::to_string(l.window) +
                              " does not divide input " + to_string(input));
          }
          return {input[0] / l.window, input[1] / l.window, input[2]};
        } else if constexpr (std::is_same_v<L, ActivationLayer>) {
          if (l.kind == ActivationKind::kLeakyRelu && !(l.slope > 0.0 && l.slope < 1.0)) {
            throw ConfigError("leaky relu slope must lie in (0, 1)");
          }
          return input;
        } else if constexpr (std::is_same_v<L, FlattenLayer>) {
          return {element_count(input)};
        } else {
          if (input.size() != 1 || input[0] != l.in_features) {
            throw ConfigError("dense expects a flat input of " + std::to_string(l.in_features) +
                              ", got " + to_string(input));
          }
          return {l.out_features};
        }
      },
      layer);
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvLayer<T>& layer) {
  const Shape out_dims = output_shape<T>(BasicLayer<T>{layer}, input.dims());
  require_finite(input, "conv");
  const std::size_t k = layer.kernel_size;
  const std::size_t in_c = layer.in_channels;
  const std::size_t out_c = layer.out_channels;
  const std::size_t in_w = input.dims()[1];
  const std::size_t out_h = out_dims[0];
  const std::size_t out_w = out_dims[1];

  BasicTensor<T> out(out_dims);
  const T* x = input.data().data();
  const T* w = layer.weights.data().data();
  const T* b = layer.bias.data().data();
  std::vector<double> acc(out_c);

  for (std::size_t m = 0; m < out_h; ++m) {
    for (std::size_t n = 0; n < out_w; ++n) {
      for (std::size_t o = 0; o < out_c; ++o) acc[o] = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const T* px = x + ((m + i) * in_w + (n + j)) * in_c;
          const T* pw = w + (i * k + j) * in_c * out_c;
          for (std::size_t c = 0; c < in_c; ++c) {
            const double xv = px[c];
            const T* row = pw + c * out_c;
            for (std::size_t o = 0; o < out_c; ++o) acc[o] += xv * static_cast<double>(row[o]);
          }
        }
      }
      T* po = out.data().data() + (m * out_w + n) * out_c;
      for (std::size_t o = 0; o < out_c; ++o) {
        po[o] = static_cast<T>(acc[o] + static_cast<double>(b[o]));
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvLayer<T>& layer,
                               const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weights,
                               BasicTensor<T>& grad_bias, bool want_input) {
  const std::size_t k = layer.kernel_size;
  const std::size_t in_c = layer.in_channels;
  const std::size_t out_c = layer.out_channels;
  const std::size_t in_w = input.dims()[1];
  const std::size_t out_h = grad_out.dims()[0];
  const std::size_t out_w = grad_out.dims()[1];

  const T* x = input.data().data();
  const T* w = layer.weights.data().data();
  const T* g = grad_out.data().data();
  T* gw = grad_weights.data().data();
  T* gb = grad_bias.data().data();

  BasicTensor<T> grad_in;
  T* gi = nullptr;
  if (want_input) {
    grad_in = BasicTensor<T>(input.dims());
    gi = grad_in.data().data();
  }

  for (std::size_t m = 0; m < out_h; ++m) {
    for (std::size_t n = 0; n < out_w; ++n) {
      const T* pg = g + (m * out_w + n) * out_c;
      for (std::size_t o = 0; o < out_c; ++o) gb[o] += pg[o];
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t in_off = ((m + i) * in_w + (n + j)) * in_c;
          const std::size_t w_off = (i * k + j) * in_c * out_c;
          for (std::size_t c = 0; c < in_c; ++c) {
            const T xv = x[in_off + c];
            T* gw_row = gw + w_off + c * out_c;
            const T* w_row = w + w_off + c * out_c;
            double back = 0.0;
            for (std::size_t o = 0; o < out_c; ++o) {
              gw_row[o] += xv * pg[o];
              back += static_cast<double>(w_row[o]) * static_cast<double>(pg[o]);
            }
            if (gi) gi[in_off + c] += static_cast<T>(back);
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> pool2d_forward(const BasicTensor<T>& input, const PoolLayer& layer) {
  const Shape out_dims = output_shape<T>(BasicLayer<T>{layer}, input.dims());
  const std::size_t s = layer.window;
  const std::size_t channels = out_dims[2];
  BasicTensor<T> out(out_dims);
  for (std::size_t m = 0; m < out_dims[0]; ++m) {
    for (std::size_t n = 0; n < out_dims[1]; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        if (layer.mode == PoolMode::kMax) {
          T best = input.at(m * s, n * s, c);
          for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
              const T v = input.at(m * s + i, n * s + j, c);
              if (v > best) best = v;
            }
          }
          out.at(m, n, c) = best;
        } else {
          double sum = 0.0;
          for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) sum += input.at(m * s + i, n * s + j, c);
          }
          out.at(m, n, c) = static_cast<T>(sum / static_cast<double>(s * s));
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pool2d_backward(const BasicTensor<T>& input, const PoolLayer& layer,
                               const BasicTensor<T>& grad_out) {
  const std::size_t s = layer.window;
  const Shape& od = grad_out.dims();
  BasicTensor<T> grad_in(input.dims());
  const T share = static_cast<T>(1.0 / static_cast<double>(s * s));
  for (std::size_t m = 0; m < od[0]; ++m) {
    for (std::size_t n = 0; n < od[1]; ++n) {
      for (std::size_t c = 0; c < od[2]; ++c) {
        const T g = grad_out.at(m, n, c);
        if (layer.mode == PoolMode::kMax) {
          std::size_t bi = 0;
          std::size_t bj = 0;
          T best = input.at(m * s, n * s, c);
          for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
              const T v = input.at(m * s + i, n * s + j, c);
              if (v > best) {
                best = v;
                bi = i;
                bj = j;
              }
            }
          }
          grad_in.at(m * s + bi, n * s + bj, c) += g;
        } else {
          for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) grad_in.at(m * s + i, n * s + j, c) += g * share;
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input, const ActivationLayer& layer) {
  BasicTensor<T> out(input.dims());
  const auto x = input.data();
  auto y = out.data();
  if (layer.kind == ActivationKind::kSigmoid) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  } else {
    const T slope = static_cast<T>(layer.slope);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T{0} ? x[i] : slope * x[i];
  }
  return out;
}

template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& input, const ActivationLayer& layer,
                                   const BasicTensor<T>& grad_out) {
  BasicTensor<T> grad_in(input.dims());
  const auto x = input.data();
  const auto g = grad_out.data();
  auto gi = grad_in.data();
  if (layer.kind == ActivationKind::kSigmoid) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T s = sigmoid(x[i]);
      gi[i] = g[i] * s * (T{1} - s);
    }
  } else {
    const T slope = static_cast<T>(layer.slope);
    for (std::size_t i = 0; i < x.size(); ++i) gi[i] = x[i] >= T{0} ? g[i] : slope * g[i];
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicDenseLayer<T>& layer) {
  const Shape out_dims = output_shape<T>(BasicLayer<T>{layer}, input.dims());
  require_finite(input, "dense");
  const std::size_t in_f = layer.in_features;
  const std::size_t out_f = layer.out_features;
  const T* x = input.data().data();
  const T* w = layer.weights.data().data();
  std::vector<double> acc(out_f, 0.0);
  for (std::size_t i = 0; i < in_f; ++i) {
    const double xv = x[i];
    const T* row = w + i * out_f;
    for (std::size_t o = 0; o < out_f; ++o) acc[o] += xv * static_cast<double>(row[o]);
  }
  BasicTensor<T> out(out_dims);
  for (std::size_t o = 0; o < out_f; ++o) {
    out[o] = static_cast<T>(acc[o] + static_cast<double>(layer.bias[o]));
  }
  return out;
}

template <typename T>
BasicTensor<T> dense_backward(const BasicTensor<T>& input, const BasicDenseLayer<T>& layer,
                              const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weights,
                              BasicTensor<T>& grad_bias, bool want_input) {
  const std::size_t in_f = layer.in_features;
  const std::size_t out_f = layer.out_features;
  const T* x = input.data().data();
  const T* w = layer.weights.data().data();
  const T* g = grad_out.data().data();
  T* gw = grad_weights.data().data();
  for (std::size_t o = 0; o < out_f; ++o) grad_bias[o] += g[o];
  BasicTensor<T> grad_in;
  if (want_input) grad_in = BasicTensor<T>(input.dims());
  for (std::size_t i = 0; i < in_f; ++i) {
    const T xv = x[i];
    T* gw_row = gw + i * out_f;
    const T* w_row = w + i * out_f;
    double back = 0.0;
    for (std::size_t o = 0; o < out_f; ++o) {
      gw_row[o] += xv * g[o];
      back += static_cast<double>(w_row[o]) * static_cast<double>(g[o]);
    }
    if (want_input) grad_in[i] = static_cast<T>(back);
  }
  return grad_in;
}

#define SPLITSTREAM_INSTANTIATE_LAYERS(T)                                                       \
  template Shape output_shape<T>(const BasicLayer<T>&, const Shape&);                          \
  template BasicTensor<T> conv2d_forward<T>(const BasicTensor<T>&, const BasicConvLayer<T>&);  \
  template BasicTensor<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicConvLayer<T>&,  \
                                             const BasicTensor<T>&, BasicTensor<T>&,           \
                                             BasicTensor<T>&, bool);                           \
  template BasicTensor<T> pool2d_forward<T>(const BasicTensor<T>&, const PoolLayer&);          \
  template BasicTensor<T> pool2d_backward<T>(const BasicTensor<T>&, const PoolLayer&,          \
                                             const BasicTensor<T>&);                           \
  template BasicTensor<T> activation_forward<T>(const BasicTensor<T>&, const ActivationLayer&); \
  template BasicTensor<T> activation_backward<T>(const BasicTensor<T>&, const ActivationLayer&, \
                                                 const BasicTensor<T>&);                       \
  template BasicTensor<T> dense_forward<T>(const BasicTensor<T>&, const BasicDenseLayer<T>&);  \
  template BasicTensor<T> dense_backward<T>(const BasicTensor<T>&, const BasicDenseLayer<T>&,  \
                                            const BasicTensor<T>&, BasicTensor<T>&,            \
                                            BasicTensor<T>&, bool);

SPLITSTREAM_INSTANTIATE_LAYERS(float)
SPLITSTREAM_INSTANTIATE_LAYERS(double)

#undef SPLITSTREAM_INSTANTIATE_LAYERS

}  // namespace splitstream
