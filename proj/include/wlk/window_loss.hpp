#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "wlk/heatmap.hpp"
#include "wlk/supervision.hpp"

namespace wlk {

enum class Divergence { kMse, kKld };

std::string_view to_string(Divergence kind);
/// Accepts "mse" / "kld" (case-insensitive); throws UsageError otherwise.
Divergence parse_divergence(std::string_view text);

/// KLD evaluates the prediction clamped to [kKldEpsilon, 1 - kKldEpsilon].
inline constexpr double kKldEpsilon = 1e-7;

/// D(x, y): squared error, or KL(y || x) for Bernoulli distributions with
/// 0*log(0) = 0.
double divergence(double x, double y, Divergence kind);

/// Window Loss for one pixel: D(p, lo) if p <= lo, 0 if lo < p <= hi,
/// D(p, hi) if p > hi. Throws ContractError unless 0 <= lo <= hi <= 1 and
/// p is in [0, 1].
double window_loss_pixel(double p, double lo, double hi, Divergence kind);

/// d/dp of window_loss_pixel.
double window_loss_grad_pixel(double p, double lo, double hi, Divergence kind);

struct LossResult {
  double value = 0.0;  // mean over pixels
  Heatmap grad;        // d(value)/dp per pixel
};

struct PyramidLoss {
  std::vector<LossResult> levels;
  double total = 0.0;
};

LossResult level_loss(const Heatmap& pred, const Heatmap& lower, const Heatmap& upper,
                      Divergence kind);

/// Unweighted sum over levels of per-level mean Window Loss.
PyramidLoss pyramid_loss(std::span<const Heatmap> preds, std::span<const BoundPair> bounds,
                         Divergence kind);

}  // namespace wlk
