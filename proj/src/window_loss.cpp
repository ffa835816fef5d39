#include "wlk/window_loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "wlk/error.hpp"

namespace wlk {
namespace {

void check_pixel(double p, double lo, double hi) {
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
    throw ContractError("window loss: bounds must satisfy 0 <= lo <= hi <= 1 (lo=" +
                        std::to_string(lo) + ", hi=" + std::to_string(hi) + ")");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractError("window loss: prediction " + std::to_string(p) + " outside [0, 1]");
  }
}

double clamp_probability(double p) { return std::clamp(p, kKldEpsilon, 1.0 - kKldEpsilon); }

double divergence_grad(double x, double y, Divergence kind) {
  if (kind == Divergence::kMse) return 2.0 * (x - y);
  const double xc = clamp_probability(x);
  return (xc - y) / (xc * (1.0 - xc));
}

}  // namespace

std::string_view to_string(Divergence kind) {
  return kind == Divergence::kMse ? "mse" : "kld";
}

Divergence parse_divergence(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mse") return Divergence::kMse;
  if (lower == "kld") return Divergence::kKld;
  throw UsageError("unknown divergence '" + std::string(text) + "' (expected mse or kld)");
}

double divergence(double x, double y, Divergence kind) {
  if (kind == Divergence::kMse) return (x - y) * (x - y);
  const double xc = clamp_probability(x);
  double d = 0.0;
  if (y > 0.0) d += y * std::log(y / xc);
  if (y < 1.0) d += (1.0 - y) * std::log((1.0 - y) / (1.0 - xc));
  return d;
}

double window_loss_pixel(double p, double lo, double hi, Divergence kind) {
  check_pixel(p, lo, hi);
  if (p <= lo) return divergence(p, lo, kind);
  if (p <= hi) return 0.0;
  return divergence(p, hi, kind);
}

double window_loss_grad_pixel(double p, double lo, double hi, Divergence kind) {
  check_pixel(p, lo, hi);
  if (p <= lo) return divergence_grad(p, lo, kind);
  if (p <= hi) return 0.0;
  return divergence_grad(p, hi, kind);
}

LossResult level_loss(const Heatmap& pred, const Heatmap& lower, const Heatmap& upper,
                      Divergence kind) {
  require(pred.same_shape(lower) && pred.same_shape(upper),
          "window loss: prediction and bound shapes differ");
  require(!pred.empty(), "window loss: empty prediction");
  LossResult result{0.0, Heatmap(pred.rows, pred.cols)};
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred.values[i];
    const double lo = lower.values[i];
    const double hi = upper.values[i];
    sum += window_loss_pixel(p, lo, hi, kind);
    result.grad.values[i] = window_loss_grad_pixel(p, lo, hi, kind) * inv_n;
  }
  result.value = sum * inv_n;
  return result;
}

PyramidLoss pyramid_loss(std::span<const Heatmap> preds, std::span<const BoundPair> bounds,
                         Divergence kind) {
  require(preds.size() == bounds.size(), "pyramid loss: level count mismatch (" +
                                             std::to_string(preds.size()) + " predictions, " +
                                             std::to_string(bounds.size()) + " bound pairs)");
  PyramidLoss out;
  out.levels.reserve(preds.size());
  for (std::size_t k = 0; k < preds.size(); ++k) {
    out.levels.push_back(level_loss(preds[k], bounds[k].lower, bounds[k].upper, kind));
    out.total += out.levels.back().value;
  }
  return out;
}

}  // namespace wlk
