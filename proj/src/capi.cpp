#include "wlk/wlk.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "wlk/annotations.hpp"
#include "wlk/config.hpp"
#include "wlk/error.hpp"
#include "wlk/evalmetrics.hpp"
#include "wlk/pipeline.hpp"
#include "wlk/supervision.hpp"
#include "wlk/tinynet.hpp"
#include "wlk/train.hpp"
#include "wlk/window_loss.hpp"

struct wlk_config {
  wlk::RunConfig config;
};

struct wlk_dataset {
  wlk::Dataset dataset;
};

struct wlk_model {
  wlk::TinyNet net;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
wlk_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return WLK_OK;
  } catch (const wlk::Error& e) {
    g_last_error = e.what();
    return static_cast<wlk_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return WLK_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return WLK_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return WLK_ERROR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw wlk::ContractError(std::string(what) + " must not be NULL");
}

wlk::BoundParams to_params(const wlk_bound_params* p) {
  need(p, "params");
  wlk::BoundParams out{p->r_lower, p->r_upper, p->tau, p->disk_radius};
  out.check();
  return out;
}

std::vector<wlk::PointAnnotation> to_points(const double* xy, size_t n) {
  if (n > 0) need(xy, "xy");
  std::vector<wlk::PointAnnotation> pts(n);
  for (size_t i = 0; i < n; ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
  return pts;
}

wlk::Heatmap wrap(const double* values, size_t rows, size_t cols) {
  wlk::Heatmap m(rows, cols);
  std::memcpy(m.values.data(), values, rows * cols * sizeof(double));
  return m;
}

void copy_out(const wlk::Heatmap& m, double* dst) { std::memcpy(dst, m.values.data(), m.size() * sizeof(double)); }

}  // namespace

extern "C" {

int wlk_abi_version(void) { return WLK_ABI_VERSION; }

const char* wlk_last_error(void) { return g_last_error.c_str(); }

wlk_bound_params wlk_default_bound_params(void) {
  const wlk::BoundParams d;
  return {d.r_lower, d.r_upper, d.tau, d.disk_radius};
}

wlk_status wlk_make_bounds(const double* xy, size_t n, size_t rows, size_t cols, double scale,
                           const wlk_bound_params* params, double* lower, double* upper) {
  return guarded([&] {
    need(lower, "lower");
    need(upper, "upper");
    const auto pts = to_points(xy, n);
    const auto b = wlk::make_bounds(pts, rows, cols, scale, to_params(params));
    copy_out(b.lower, lower);
    copy_out(b.upper, upper);
  });
}

wlk_status wlk_disk_mask(const double* xy, size_t n, size_t rows, size_t cols, double scale, double radius,
                         double* mask) {
  return guarded([&] {
    need(mask, "mask");
    const auto pts = to_points(xy, n);
    copy_out(wlk::disk_mask(pts, rows, cols, scale, radius), mask);
  });
}

wlk_status wlk_window_loss(const double* pred, const double* lower, const double* upper, size_t n,
                           wlk_divergence kind, double* loss, double* grad) {
  return guarded([&] {
    need(pred, "pred");
    need(lower, "lower");
    need(upper, "upper");
    need(loss, "loss");
    if (kind != WLK_MSE && kind != WLK_KLD) throw wlk::UsageError("unknown divergence");
    const auto k = kind == WLK_MSE ? wlk::Divergence::kMse : wlk::Divergence::kKld;
    const auto r = wlk::level_loss(wrap(pred, 1, n), wrap(lower, 1, n), wrap(upper, 1, n), k);
    *loss = r.value;
    if (grad != nullptr) copy_out(r.grad, grad);
  });
}

wlk_status wlk_auroc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    need(scores, "scores");
    need(labels, "labels");
    need(out, "out");
    *out = wlk::auroc({scores, n}, {labels, n});
  });
}

wlk_status wlk_dataset_load(const char* manifest_path, wlk_dataset** out) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(out, "out");
    *out = nullptr;
    *out = new wlk_dataset{wlk::load_manifest(manifest_path)};
  });
}

void wlk_dataset_free(wlk_dataset* dataset) { delete dataset; }

size_t wlk_dataset_size(const wlk_dataset* dataset) { return dataset ? dataset->dataset.records.size() : 0; }

uint32_t wlk_dataset_input_size(const wlk_dataset* dataset) { return dataset ? dataset->dataset.input_size : 0; }

size_t wlk_dataset_point_count(const wlk_dataset* dataset, size_t index) {
  if (dataset == nullptr || index >= dataset->dataset.records.size()) return static_cast<size_t>(-1);
  return dataset->dataset.records[index].points.size();
}

wlk_status wlk_dataset_points_input_space(const wlk_dataset* dataset, size_t index, double* xy) {
  return guarded([&] {
    need(dataset, "dataset");
    if (index >= dataset->dataset.records.size()) throw wlk::ContractError("record index out of range");
    const auto pts = wlk::points_in_input_space(dataset->dataset.records[index], dataset->dataset.input_size);
    if (!pts.empty()) need(xy, "xy");
    for (size_t i = 0; i < pts.size(); ++i) {
      xy[2 * i] = pts[i].x;
      xy[2 * i + 1] = pts[i].y;
    }
  });
}

wlk_status wlk_model_load(const char* checkpoint_path, wlk_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = nullptr;
    *out = new wlk_model{wlk::TinyNet::load(checkpoint_path)};
  });
}

void wlk_model_free(wlk_model* model) { delete model; }

uint32_t wlk_model_input_size(const wlk_model* model) { return model ? model->net.config().input_size : 0; }

uint32_t wlk_model_output_size(const wlk_model* model) {
  return model ? static_cast<uint32_t>(model->net.config().level_size(0)) : 0;
}

wlk_status wlk_model_predict(const wlk_model* model, const double* image, double* out) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    need(out, "out");
    const size_t n = model->net.config().input_size;
    copy_out(wlk::predict(model->net, wrap(image, n, n)), out);
  });
}

wlk_status wlk_evaluate(const char* manifest_path, const char* heatmap_dir, const char* split,
                        const wlk_bound_params* params, wlk_summary* out) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(heatmap_dir, "heatmap_dir");
    need(out, "out");
    const auto p = to_params(params);
    const auto dataset = wlk::load_manifest(manifest_path);
    const auto records = wlk::select_records(dataset, split ? split : "test");
    std::vector<wlk::Heatmap> maps;
    for (const auto* r : records) {
      maps.push_back(wlk::read_wlk(std::filesystem::path(heatmap_dir) / (wlk::record_stem(*r) + ".wlk")));
    }
    const auto report = wlk::evaluate_maps(maps, records, dataset.input_size, p);
    *out = {report.roc.auroc, report.froc.froc_score, report.froc.recall_at_01};
  });
}

wlk_status wlk_config_create(wlk_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    *out = new wlk_config{};
  });
}

void wlk_config_free(wlk_config* config) { delete config; }

wlk_status wlk_config_load_file(wlk_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    config->config.merge_file(path);
  });
}

wlk_status wlk_config_set(wlk_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->config.set(key, value);
  });
}

wlk_status wlk_config_to_json(const wlk_config* config, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    const std::string text = config->config.to_json();
    if (needed != nullptr) *needed = text.size() + 1;
    if (cap == 0) return;
    need(buf, "buf");
    if (cap < text.size() + 1) throw wlk::ContractError("buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

size_t wlk_config_key_count(void) { return wlk::config_keys().size(); }

// Key tables are static string literals, so data() is NUL-terminated.
const char* wlk_config_key_name(size_t index) {
  const auto keys = wlk::config_keys();
  return index < keys.size() ? keys[index].name.data() : nullptr;
}

const char* wlk_config_key_default(size_t index) {
  const auto keys = wlk::config_keys();
  return index < keys.size() ? keys[index].default_value.data() : nullptr;
}

const char* wlk_config_key_doc(size_t index) {
  const auto keys = wlk::config_keys();
  return index < keys.size() ? keys[index].doc.data() : nullptr;
}

size_t wlk_command_count(void) { return wlk::command_names().size(); }

const char* wlk_command_name(size_t index) {
  const auto names = wlk::command_names();
  return index < names.size() ? names[index].data() : nullptr;
}

wlk_status wlk_run(const char* command, const wlk_config* config) {
  return guarded([&] {
    need(command, "command");
    need(config, "config");
    wlk::run_command(command, config->config);
  });
}

}  // extern "C"
