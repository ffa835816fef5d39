#include "wlk/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "wlk/error.hpp"
#include "wlk/evalmetrics.hpp"
#include "wlk/rng.hpp"

namespace wlk {

void TrainConfig::check() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("train: lr must be a finite non-negative number");
  if (!(weight_decay >= 0.0)) throw UsageError("train: weight_decay must be non-negative");
  if (epochs < 1) throw UsageError("train: epochs must be at least 1");
  if (batch_size < 1) throw UsageError("train: batch_size must be at least 1");
  try {
    bounds.check();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
}

std::filesystem::path resolve_image_path(const ImageRecord& record,
                                         const std::filesystem::path& root) {
  const std::filesystem::path p(record.image_path);
  return p.is_absolute() ? p : root / p;
}

Sample load_sample(const ImageRecord& record, const std::filesystem::path& root,
                   std::uint32_t input_size) {
  Heatmap raw = load_image(resolve_image_path(record, root));
  if (raw.cols != record.width || raw.rows != record.height) {
    throw DataError("image '" + record.image_path + "' is " + std::to_string(raw.cols) + "x" +
                    std::to_string(raw.rows) + " but the manifest says " +
                    std::to_string(record.width) + "x" + std::to_string(record.height));
  }
  return {to_input_image(raw, input_size), points_in_input_space(record, input_size),
          record.positive()};
}

std::vector<Sample> load_samples(std::span<const ImageRecord* const> records,
                                 const std::filesystem::path& root, std::uint32_t input_size) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto* r : records) out.push_back(load_sample(*r, root, input_size));
  return out;
}

std::vector<BoundPair> pyramid_bounds(std::span<const PointAnnotation> points,
                                      const ModelConfig& model, const BoundParams& params) {
  std::vector<BoundPair> out;
  out.reserve(model.levels());
  for (std::size_t k = 0; k < model.levels(); ++k) {
    const std::size_t n = model.level_size(k);
    out.push_back(make_bounds(points, n, n, static_cast<double>(model.strides[k]), params));
  }
  return out;
}

Heatmap predict(const TinyNet& net, const Heatmap& image) {
  return merge_pyramid(net.forward(image));
}

namespace {

double auroc_or_nan(std::span<const double> scores, std::span<const int> labels) {
  const auto positives = std::accumulate(labels.begin(), labels.end(), 0);
  if (positives == 0 || positives == static_cast<int>(labels.size())) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return auroc(scores, labels);
}

}  // namespace

double validation_auroc(const TinyNet& net, std::span<const Sample> samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : samples) {
    scores.push_back(image_score(predict(net, s.image)));
    labels.push_back(s.positive ? 1 : 0);
  }
  return auroc_or_nan(scores, labels);
}

Validation validate_epoch(const TinyNet& net, std::span<const Sample> samples, const TrainConfig& config) {
  std::vector<double> scores;
  std::vector<int> labels;
  double loss_sum = 0.0;
  for (const auto& s : samples) {
    const PyramidOutput out = net.forward(s.image);
    loss_sum += pyramid_loss(out.maps, pyramid_bounds(s.points, net.config(), config.bounds),
                             config.divergence)
                    .total;
    scores.push_back(image_score(merge_pyramid(out)));
    labels.push_back(s.positive ? 1 : 0);
  }
  return {auroc_or_nan(scores, labels),
          samples.empty() ? 0.0 : loss_sum / static_cast<double>(samples.size())};
}

double train_step(TinyNet& net, AdamState& adam, std::span<const Sample* const> batch,
                  const TrainConfig& config, Rng& aug_rng) {
  require(!batch.empty(), "train_step: empty batch");
  std::vector<Tensor> grads = net.zero_gradients();
  const float inv_batch = 1.0f / static_cast<float>(batch.size());
  double loss_sum = 0.0;

  for (const Sample* sample : batch) {
    const Augmented aug = config.augment.any()
                              ? augment(sample->image, sample->points, aug_rng, config.augment)
                              : Augmented{sample->image, sample->points};
    const auto bounds = pyramid_bounds(aug.points, net.config(), config.bounds);
    ForwardCache cache;
    const PyramidOutput out = net.forward(aug.image, &cache);
    const PyramidLoss loss = pyramid_loss(out.maps, bounds, config.divergence);
    if (!std::isfinite(loss.total)) throw NumericError("training diverged: non-finite loss");
    loss_sum += loss.total;

    std::vector<Heatmap> level_grads;
    level_grads.reserve(loss.levels.size());
    for (const auto& l : loss.levels) level_grads.push_back(l.grad);
    const auto g = net.backward(cache, level_grads);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (std::size_t j = 0; j < grads[i].data.size(); ++j) grads[i].data[j] += g[i].data[j] * inv_batch;
    }
  }

  AdamOptions opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;
  adam_step(net.mutable_parameters(), grads, adam, opt);
  return loss_sum / static_cast<double>(batch.size());
}

bool ranks_above(const Validation& a, const Validation& b) {
  const double ra = std::isnan(a.auroc) ? -std::numeric_limits<double>::infinity() : a.auroc;
  const double rb = std::isnan(b.auroc) ? -std::numeric_limits<double>::infinity() : b.auroc;
  if (ra != rb) return ra > rb;
  return a.loss < b.loss;
}

TrainResult train(std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const ModelConfig& model, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.check();
  require(!train_set.empty(), "train: the train split is empty");
  require(!val_set.empty(), "train: the validation split is empty");

  TinyNet net(model);
  AdamState adam;
  Rng shuffle_rng(mix_seed(config.seed, 1));
  Rng aug_rng(mix_seed(config.seed, 2));

  TrainResult result{net, {}, validation_auroc(net, val_set), 0};
  // Unset until the first epoch; NaN AUROC ranks below every number.
  Validation best{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      loss_sum += train_step(net, adam, batch, config, aug_rng) * static_cast<double>(batch.size());
    }

    const Validation v = validate_epoch(net, val_set, config);
    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()), v.auroc, v.loss};
    if (!std::isfinite(entry.train_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }
    if (result.best_epoch == 0 || ranks_above(v, best)) {
      best = v;
      result.best = net;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string format_train_log(std::span<const EpochLog> log) {
  std::string out = "epoch,train_loss,val_auroc\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + format_number(e.train_loss) + "," +
           format_number(e.val_auroc) + "\n";
  }
  return out;
}

}  // namespace wlk
