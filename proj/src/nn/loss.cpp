#include "splitstream/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splitstream {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kBinaryCrossentropy: return "binary_crossentropy";
    case LossKind::kMse: return "mse";
    case LossKind::kMsle: return "msle";
  }
  return "unknown";
}

LossKind parse_loss(std::string_view name) {
  if (name == "binary_crossentropy" || name == "bce") return LossKind::kBinaryCrossentropy;
  if (name == "mse") return LossKind::kMse;
  if (name == "msle") return LossKind::kMsle;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

namespace {

template <typename T>
void check_domain(const BasicTensor<T>& y, const BasicTensor<T>& yhat, LossKind kind) {
  if (y.size() != yhat.size()) {
    throw ConfigError("loss: length mismatch " + std::to_string(y.size()) + " vs " +
                      std::to_string(yhat.size()));
  }
  if (y.empty()) throw DataError("loss: empty input");
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = y[i];
    const double p = yhat[i];
    if (!std::isfinite(t) || !std::isfinite(p)) {
      throw DataError("loss: non-finite value at index " + std::to_string(i));
    }
    switch (kind) {
      case LossKind::kBinaryCrossentropy:
        if (t != 0.0 && t != 1.0) {
          throw DataError("binary crossentropy: label not in {0,1} at index " + std::to_string(i));
        }
        if (p < 0.0 || p > 1.0) {
          throw DataError("binary crossentropy: prediction outside [0,1] at index " +
                          std::to_string(i));
        }
        break;
      case LossKind::kMsle:
        if (t <= -1.0 || p <= -1.0) {
          throw DataError("msle: value <= -1 at index " + std::to_string(i));
        }
        break;
      case LossKind::kMse:
        break;
    }
  }
}

double clamp_probability(double p) { return std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon); }

}  // namespace

template <typename T>
double loss_forward(const BasicTensor<T>& y, const BasicTensor<T>& yhat, LossKind kind) {
  check_domain(y, yhat, kind);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = y[i];
    const double p = yhat[i];
    switch (kind) {
      case LossKind::kBinaryCrossentropy: {
        const double q = clamp_probability(p);
        sum -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
        break;
      }
      case LossKind::kMse:
        sum += (t - p) * (t - p);
        break;
      case LossKind::kMsle: {
        const double d = std::log1p(t) - std::log1p(p);
        sum += d * d;
        break;
      }
    }
  }
  return sum / static_cast<double>(y.size());
}

template <typename T>
BasicTensor<T> loss_backward(const BasicTensor<T>& y, const BasicTensor<T>& yhat, LossKind kind,
                             double scale) {
  check_domain(y, yhat, kind);
  const double n = static_cast<double>(y.size());
  BasicTensor<T> grad(yhat.dims());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = y[i];
    const double p = yhat[i];
    double g = 0.0;
    switch (kind) {
      case LossKind::kBinaryCrossentropy: {
        const double q = clamp_probability(p);
        g = (q - t) / (q * (1.0 - q));
        break;
      }
      case LossKind::kMse:
        g = 2.0 * (p - t);
        break;
      case LossKind::kMsle:
        g = -2.0 * (std::log1p(t) - std::log1p(p)) / (1.0 + p);
        break;
    }
    grad[i] = static_cast<T>(g * scale / n);
  }
  return grad;
}

template double loss_forward<float>(const Tensor&, const Tensor&, LossKind);
template double loss_forward<double>(const BasicTensor<double>&, const BasicTensor<double>&,
                                     LossKind);
template Tensor loss_backward<float>(const Tensor&, const Tensor&, LossKind, double);
template BasicTensor<double> loss_backward<double>(const BasicTensor<double>&,
                                                   const BasicTensor<double>&, LossKind, double);

}  // namespace splitstream
