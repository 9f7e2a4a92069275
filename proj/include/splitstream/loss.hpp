#pragma once

#include <string_view>

#include "splitstream/tensor.hpp"

namespace splitstream {

enum class LossKind { kBinaryCrossentropy, kMse, kMsle };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss(std::string_view name);

// Predictions closer than this to 0 or 1 are clamped before taking logs, so a
// saturated float sigmoid does not produce an infinite loss.
inline constexpr double kBceEpsilon = 1e-7;

// Mean loss over the N elements of y / yhat, accumulated in double.
//   BCE  = -(1/N) sum[y ln yhat + (1-y) ln(1-yhat)]
//   MSE  =  (1/N) sum (y - yhat)^2
//   MSLE =  (1/N) sum (ln(1+y) - ln(1+yhat))^2
// Throws DataError naming the first offending index on a domain violation.
template <typename T>
double loss_forward(const BasicTensor<T>& y, const BasicTensor<T>& yhat, LossKind kind);

// d loss_forward / d yhat, multiplied by scale.
template <typename T>
BasicTensor<T> loss_backward(const BasicTensor<T>& y, const BasicTensor<T>& yhat, LossKind kind,
                             double scale = 1.0);

}  // namespace splitstream
