#include "wlk/tinynet.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>

#include "wlk/error.hpp"
#include "wlk/rng.hpp"
#include "wlk/supervision.hpp"

namespace wlk {
namespace {

constexpr float kLeakySlope = 0.1f;
// Heads start near a 1% foreground prior with small weights, so the first
// updates do not drive every logit deep into sigmoid saturation.
constexpr double kHeadPrior = 0.01;
constexpr double kHeadWeightScale = 0.1;
constexpr double kStdFloor = 1e-6;
// Keeps probabilities representably inside (0, 1) in double precision.
constexpr double kLogitLimit = 30.0;
constexpr char kCheckpointMagic[4] = {'W', 'L', 'K', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

Tensor make_tensor(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return {std::move(name), std::move(shape), std::vector<float>(n, 0.0f)};
}

void he_init(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& w : t.data) w = static_cast<float>(rng.normal(0.0, sigma));
}

// Mean and population standard deviation of the pixel values.
std::pair<double, double> image_moments(const Heatmap& image) {
  double sum = 0.0;
  for (double v : image.values) sum += v;
  const double mean = sum / static_cast<double>(image.size());
  double sq = 0.0;
  for (double v : image.values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(image.size()))};
}

// --- layer kernels --------------------------------------------------------

// GCC/Clang vector extension; element-wise ops only, so results match the
// scalar code bit for bit.
typedef float Vec4 __attribute__((vector_size(16)));

inline Vec4 load4(const float* p) {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(float* p, Vec4 v) { std::memcpy(p, &v, sizeof v); }

// Reduces a lane accumulator plus the scalar tail; shared by dot() and
// gemm_nt() so blocked and unblocked paths give identical results.
double finish(Vec4 lanes, const float* a, const float* b, std::size_t from, std::size_t n) {
  double sum = 0.0;
  for (int l = 0; l < 4; ++l) sum += lanes[l];
  for (std::size_t i = from; i < n; ++i) sum += static_cast<double>(a[i]) * b[i];
  return sum;
}

// Dot product over four fixed lanes, so it vectorizes while the summation
// order (and therefore the result) stays reproducible.
double dot(const float* a, const float* b, std::size_t n) {
  Vec4 acc = {};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc += load4(a + i) * load4(b + i);
  return finish(acc, a, b, i, n);
}

double total(const float* a, std::size_t n) {
  Vec4 lo = {};
  Vec4 hi = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    lo += load4(a + i);
    hi += load4(a + i + 4);
  }
  double sum = 0.0;
  for (int l = 0; l < 4; ++l) sum += lo[l];
  for (int l = 0; l < 4; ++l) sum += hi[l];
  for (; i < n; ++i) sum += a[i];
  return sum;
}

void axpy(float* dst, float w, const float* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
}

// Rows (ci, ky, kx) of shifted, zero-padded copies of the input planes.
std::vector<float> im2col(const FeatureMap& in) {
  const std::size_t h = in.height;
  const std::size_t w = in.width;
  const std::size_t n = in.plane();
  std::vector<float> col(in.channels * 9 * n, 0.0f);
  for (std::size_t ci = 0; ci < in.channels; ++ci) {
    const float* src = in.channel(ci);
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        float* row = col.data() + ((ci * 9) + ky * 3 + kx) * n;
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? h - 1 : h;
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? w - 1 : w;
        for (std::size_t y = y0; y < y1; ++y) {
          const float* s = src + (y + ky - 1) * w + (kx - 1);
          std::copy(s + x0, s + x1, row + y * w + x0);
        }
      }
    }
  }
  return col;
}

// Adds the (ci, ky, kx) rows of `col` back onto the input planes they came from.
void col2im(const std::vector<float>& col, FeatureMap& grad_in) {
  const std::size_t h = grad_in.height;
  const std::size_t w = grad_in.width;
  const std::size_t n = grad_in.plane();
  for (std::size_t ci = 0; ci < grad_in.channels; ++ci) {
    float* dst = grad_in.channel(ci);
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const float* row = col.data() + ((ci * 9) + ky * 3 + kx) * n;
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? h - 1 : h;
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? w - 1 : w;
        for (std::size_t y = y0; y < y1; ++y) {
          float* d = dst + (y + ky - 1) * w + (kx - 1);
          const float* r = row + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[x] += r[x];
        }
      }
    }
  }
}

// C[m][p] += sum_k A[m][k] * B[k][p]; A is M x K, B is K x n, C is M x n.
// Blocks of 4 rows x 8 columns stay in vector registers; every element sums
// over k in ascending order on both the blocked and the edge path.
void gemm_nn(const float* a, std::size_t m_rows, std::size_t k_dim, const float* b, std::size_t n,
             float* c) {
  constexpr std::size_t kM = 4;
  constexpr std::size_t kP = 8;
  for (std::size_t m0 = 0; m0 < m_rows; m0 += kM) {
    const std::size_t mb = std::min(kM, m_rows - m0);
    std::size_t p0 = 0;
    if (mb == kM) {
      for (; p0 + kP <= n; p0 += kP) {
        Vec4 acc[kM][2];
        for (std::size_t i = 0; i < kM; ++i) {
          acc[i][0] = load4(c + (m0 + i) * n + p0);
          acc[i][1] = load4(c + (m0 + i) * n + p0 + 4);
        }
        for (std::size_t k = 0; k < k_dim; ++k) {
          const Vec4 b0 = load4(b + k * n + p0);
          const Vec4 b1 = load4(b + k * n + p0 + 4);
          for (std::size_t i = 0; i < kM; ++i) {
            const float w = a[(m0 + i) * k_dim + k];
            const Vec4 wv = {w, w, w, w};
            acc[i][0] += wv * b0;
            acc[i][1] += wv * b1;
          }
        }
        for (std::size_t i = 0; i < kM; ++i) {
          store4(c + (m0 + i) * n + p0, acc[i][0]);
          store4(c + (m0 + i) * n + p0 + 4, acc[i][1]);
        }
      }
    }
    for (std::size_t i = 0; i < mb; ++i) {
      float* crow = c + (m0 + i) * n;
      for (std::size_t p = p0; p < n; ++p) {
        float v = crow[p];
        for (std::size_t k = 0; k < k_dim; ++k) v += a[(m0 + i) * k_dim + k] * b[k * n + p];
        crow[p] = v;
      }
    }
  }
}

// C[m][k] += sum_p A[m][p] * B[k][p], blocked 4 x 2 with dot()'s summation.
void gemm_nt(const float* a, std::size_t m_rows, const float* b, std::size_t k_dim, std::size_t n,
             float* c) {
  constexpr std::size_t kM = 4;
  constexpr std::size_t kK = 2;
  const std::size_t n4 = n - n % 4;
  std::size_t m0 = 0;
  for (; m0 + kM <= m_rows; m0 += kM) {
    std::size_t k0 = 0;
    for (; k0 + kK <= k_dim; k0 += kK) {
      Vec4 acc[kM][kK] = {};
      for (std::size_t p = 0; p < n4; p += 4) {
        const Vec4 b0 = load4(b + k0 * n + p);
        const Vec4 b1 = load4(b + (k0 + 1) * n + p);
        for (std::size_t i = 0; i < kM; ++i) {
          const Vec4 av = load4(a + (m0 + i) * n + p);
          acc[i][0] += av * b0;
          acc[i][1] += av * b1;
        }
      }
      for (std::size_t i = 0; i < kM; ++i) {
        for (std::size_t j = 0; j < kK; ++j) {
          c[(m0 + i) * k_dim + k0 + j] +=
              static_cast<float>(finish(acc[i][j], a + (m0 + i) * n, b + (k0 + j) * n, n4, n));
        }
      }
    }
    for (; k0 < k_dim; ++k0) {
      for (std::size_t i = 0; i < kM; ++i) c[(m0 + i) * k_dim + k0] += static_cast<float>(dot(a + (m0 + i) * n, b + k0 * n, n));
    }
  }
  for (; m0 < m_rows; ++m0) {
    for (std::size_t k = 0; k < k_dim; ++k) c[m0 * k_dim + k] += static_cast<float>(dot(a + m0 * n, b + k * n, n));
  }
}

// Same-padded 3x3 convolution, stride 1.
FeatureMap conv3x3(const FeatureMap& in, const Tensor& weight, const Tensor& bias) {
  const std::size_t cout = weight.shape[0];
  const std::size_t k_total = in.channels * 9;
  const std::size_t n = in.plane();
  const std::vector<float> col = im2col(in);
  FeatureMap out(cout, in.height, in.width);
  for (std::size_t co = 0; co < cout; ++co) std::fill(out.channel(co), out.channel(co) + n, bias.data[co]);
  gemm_nn(weight.data.data(), cout, k_total, col.data(), n, out.data.data());
  return out;
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
void conv3x3_backward(const FeatureMap& in, const Tensor& weight, const FeatureMap& grad_out,
                      Tensor& grad_w, Tensor& grad_b, FeatureMap* grad_in) {
  const std::size_t cout = weight.shape[0];
  const std::size_t k_total = in.channels * 9;
  const std::size_t n = in.plane();
  const std::vector<float> col = im2col(in);
  for (std::size_t co = 0; co < cout; ++co) grad_b.data[co] += static_cast<float>(total(grad_out.channel(co), n));
  gemm_nt(grad_out.data.data(), cout, col.data(), k_total, n, grad_w.data.data());
  if (grad_in == nullptr) return;
  std::vector<float> wt(k_total * cout);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t k = 0; k < k_total; ++k) wt[k * cout + co] = weight.data[co * k_total + k];
  }
  std::vector<float> grad_col(k_total * n, 0.0f);
  gemm_nn(wt.data(), k_total, cout, grad_out.data.data(), n, grad_col.data());
  col2im(grad_col, *grad_in);
}

// 1x1 convolution: out[f] = b[f] + sum_c W[f][c] * in[c].
FeatureMap conv1x1(const FeatureMap& in, const float* weight, const float* bias, std::size_t cout) {
  FeatureMap out(cout, in.height, in.width);
  const std::size_t n = in.plane();
  for (std::size_t f = 0; f < cout; ++f) {
    float* dst = out.channel(f);
    std::fill(dst, dst + n, bias[f]);
    for (std::size_t c = 0; c < in.channels; ++c) axpy(dst, weight[f * in.channels + c], in.channel(c), n);
  }
  return out;
}

void conv1x1_backward(const FeatureMap& in, const float* weight, const FeatureMap& grad_out,
                      float* grad_w, float* grad_b, FeatureMap& grad_in) {
  const std::size_t n = in.plane();
  for (std::size_t f = 0; f < grad_out.channels; ++f) {
    const float* g = grad_out.channel(f);
    grad_b[f] += static_cast<float>(total(g, n));
    for (std::size_t c = 0; c < in.channels; ++c) {
      grad_w[f * in.channels + c] += static_cast<float>(dot(g, in.channel(c), n));
      axpy(grad_in.channel(c), weight[f * in.channels + c], g, n);
    }
  }
}

FeatureMap leaky_avgpool(const FeatureMap& pre) {
  FeatureMap out(pre.channels, pre.height / 2, pre.width / 2);
  for (std::size_t c = 0; c < pre.channels; ++c) {
    const float* src = pre.channel(c);
    float* dst = out.channel(c);
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) {
        float s = 0.0f;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const float v = src[(2 * y + dy) * pre.width + 2 * x + dx];
            s += v > 0.0f ? v : kLeakySlope * v;
          }
        }
        dst[y * out.width + x] = 0.25f * s;
      }
    }
  }
  return out;
}

// Gradient of avgpool(leaky(pre)) with respect to pre.
FeatureMap leaky_avgpool_backward(const FeatureMap& pre, const FeatureMap& grad_out) {
  FeatureMap grad(pre.channels, pre.height, pre.width);
  for (std::size_t c = 0; c < pre.channels; ++c) {
    const float* src = pre.channel(c);
    const float* g = grad_out.channel(c);
    float* dst = grad.channel(c);
    for (std::size_t y = 0; y < pre.height; ++y) {
      for (std::size_t x = 0; x < pre.width; ++x) {
        const std::size_t i = y * pre.width + x;
        const float slope = src[i] > 0.0f ? 1.0f : kLeakySlope;
        dst[i] = 0.25f * slope * g[(y / 2) * grad_out.width + x / 2];
      }
    }
  }
  return grad;
}

void add_upsampled(FeatureMap& dst, const FeatureMap& coarse) {
  for (std::size_t c = 0; c < dst.channels; ++c) {
    float* d = dst.channel(c);
    const float* s = coarse.channel(c);
    for (std::size_t y = 0; y < dst.height; ++y) {
      for (std::size_t x = 0; x < dst.width; ++x) {
        d[y * dst.width + x] += s[(y / 2) * coarse.width + x / 2];
      }
    }
  }
}

void add_downsummed(FeatureMap& coarse, const FeatureMap& fine) {
  for (std::size_t c = 0; c < coarse.channels; ++c) {
    float* d = coarse.channel(c);
    const float* s = fine.channel(c);
    for (std::size_t y = 0; y < fine.height; ++y) {
      for (std::size_t x = 0; x < fine.width; ++x) {
        d[(y / 2) * coarse.width + x / 2] += s[y * fine.width + x];
      }
    }
  }
}

// --- checkpoint encoding --------------------------------------------------

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw DataError("checkpoint: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void ModelConfig::check() const {
  require(!strides.empty(), "model config: at least one pyramid level is required");
  for (std::size_t k = 0; k < strides.size(); ++k) {
    require(strides[k] == (2u << k),
            "model config: strides must be 2, 4, 8, ... (got " + std::to_string(strides[k]) +
                " at level " + std::to_string(k) + ")");
  }
  require(input_size > 0 && input_size % strides.back() == 0,
          "model config: input_size must be divisible by the coarsest stride");
  require(base_channels > 0, "model config: base_channels must be positive");
}

std::size_t ModelConfig::stage_channels(std::size_t s) const noexcept {
  return s < 2 ? base_channels : 2 * static_cast<std::size_t>(base_channels);
}

TinyNet::TinyNet(const ModelConfig& config) : config_(config), version_(next_version()) {
  config_.check();
  Rng rng(mix_seed(config_.seed, 0x6E6574));
  const std::size_t fpn = config_.base_channels;
  std::size_t cin = 1;
  for (std::size_t s = 0; s < config_.levels(); ++s) {
    const std::size_t cout = config_.stage_channels(s);
    const std::string id = std::to_string(s);
    auto enc_w = make_tensor("enc" + id + ".weight", {cout, cin, 3, 3});
    he_init(enc_w, cin * 9, rng);
    auto lat_w = make_tensor("lat" + id + ".weight", {fpn, cout});
    he_init(lat_w, cout, rng);
    auto head_w = make_tensor("head" + id + ".weight", {1, fpn});
    he_init(head_w, fpn, rng);
    for (auto& w : head_w.data) w = static_cast<float>(w * kHeadWeightScale);
    auto head_b = make_tensor("head" + id + ".bias", {1});
    head_b.data[0] = static_cast<float>(std::log(kHeadPrior / (1.0 - kHeadPrior)));

    params_.push_back(std::move(enc_w));
    params_.push_back(make_tensor("enc" + id + ".bias", {cout}));
    params_.push_back(std::move(lat_w));
    params_.push_back(make_tensor("lat" + id + ".bias", {fpn}));
    params_.push_back(std::move(head_w));
    params_.push_back(std::move(head_b));
    cin = cout;
  }
}

std::span<Tensor> TinyNet::mutable_parameters() {
  touch();
  return params_;
}

const Tensor& TinyNet::parameter(std::string_view name) const {
  for (const auto& t : params_) {
    if (t.name == name) return t;
  }
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

Tensor& TinyNet::mutable_parameter(std::string_view name) {
  touch();
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

std::size_t TinyNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.numel();
  return n;
}

void TinyNet::touch() { version_ = next_version(); }

PyramidOutput TinyNet::forward(const Heatmap& image, ForwardCache* cache) const {
  require(image.rows == config_.input_size && image.cols == config_.input_size,
          "forward: image must be " + std::to_string(config_.input_size) + "x" +
              std::to_string(config_.input_size));
  const std::size_t levels = config_.levels();

  std::vector<FeatureMap> inputs;
  std::vector<FeatureMap> pres;
  inputs.reserve(levels + 1);
  FeatureMap x(1, image.rows, image.cols);
  const auto [mean, stddev] = image_moments(image);
  const double inv = 1.0 / std::max(stddev, kStdFloor);
  std::transform(image.values.begin(), image.values.end(), x.data.begin(),
                 [&](double v) { return static_cast<float>((v - mean) * inv); });
  inputs.push_back(std::move(x));

  for (std::size_t s = 0; s < levels; ++s) {
    FeatureMap pre = conv3x3(inputs.back(), slot(s, kEncW), slot(s, kEncB));
    inputs.push_back(leaky_avgpool(pre));
    pres.push_back(std::move(pre));
  }

  std::vector<FeatureMap> pyramid(levels);
  for (std::size_t k = levels; k-- > 0;) {
    pyramid[k] = conv1x1(inputs[k + 1], slot(k, kLatW).data.data(), slot(k, kLatB).data.data(),
                         config_.base_channels);
    if (k + 1 < levels) add_upsampled(pyramid[k], pyramid[k + 1]);
  }

  PyramidOutput out;
  for (std::size_t k = 0; k < levels; ++k) {
    const FeatureMap& p = pyramid[k];
    const float* hw = slot(k, kHeadW).data.data();
    const double hb = slot(k, kHeadB).data[0];
    Heatmap prob(p.height, p.width);
    std::vector<double> z(p.plane(), hb);
    for (std::size_t f = 0; f < p.channels; ++f) {
      const float* src = p.channel(f);
      const double wv = hw[f];
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += wv * src[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) prob.values[i] = sigmoid(std::clamp(z[i], -kLogitLimit, kLogitLimit));
    out.maps.push_back(std::move(prob));
  }

  if (cache != nullptr) {
    cache->version = version_;
    cache->stage_inputs = std::move(inputs);
    cache->pre_activations = std::move(pres);
    cache->pyramid = std::move(pyramid);
    cache->probabilities = out.maps;
  }
  return out;
}

std::vector<Tensor> TinyNet::zero_gradients() const {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const auto& t : params_) grads.push_back(make_tensor(t.name, t.shape));
  return grads;
}

std::vector<Tensor> TinyNet::backward(const ForwardCache& cache,
                                      std::span<const Heatmap> level_grads) const {
  const std::size_t levels = config_.levels();
  require(cache.version == version_ && cache.pyramid.size() == levels,
          "backward: forward cache is stale or from another model");
  require(level_grads.size() == levels, "backward: expected one gradient map per level");

  std::vector<Tensor> grads = zero_gradients();
  auto gslot = [&](std::size_t k, Slot s) -> Tensor& { return grads[k * kSlots + s]; };
  const std::size_t fpn = config_.base_channels;

  // Heads: dz = dL/dp * p(1-p); then into the pyramid features.
  std::vector<FeatureMap> dpyr(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    const FeatureMap& p = cache.pyramid[k];
    const Heatmap& prob = cache.probabilities[k];
    require(level_grads[k].rows == p.height && level_grads[k].cols == p.width,
            "backward: gradient shape mismatch at level " + std::to_string(k));
    std::vector<float> dz(p.plane());
    double bsum = 0.0;
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double pv = prob.values[i];
      double d = level_grads[k].values[i] * pv * (1.0 - pv);
      // Saturated cells would otherwise leave float denormals in every layer.
      if (std::abs(d) < 1e-30) d = 0.0;
      dz[i] = static_cast<float>(d);
      bsum += d;
    }
    gslot(k, kHeadB).data[0] = static_cast<float>(bsum);
    const float* hw = slot(k, kHeadW).data.data();
    FeatureMap dp(fpn, p.height, p.width);
    for (std::size_t f = 0; f < fpn; ++f) {
      const float* src = p.channel(f);
      float* dst = dp.channel(f);
      double acc = 0.0;
      for (std::size_t i = 0; i < dz.size(); ++i) {
        acc += static_cast<double>(dz[i]) * src[i];
        dst[i] = hw[f] * dz[i];
      }
      gslot(k, kHeadW).data[f] = static_cast<float>(acc);
    }
    dpyr[k] = std::move(dp);
  }

  // Top-down path: P[k] = lat[k] + up(P[k+1]), so dP[k+1] += downsum(dP[k]).
  for (std::size_t k = 0; k + 1 < levels; ++k) add_downsummed(dpyr[k + 1], dpyr[k]);

  // Laterals feed encoder-output gradients.
  std::vector<FeatureMap> dstage(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    const FeatureMap& c = cache.stage_inputs[k + 1];
    dstage[k] = FeatureMap(c.channels, c.height, c.width);
    conv1x1_backward(c, slot(k, kLatW).data.data(), dpyr[k], gslot(k, kLatW).data.data(),
                     gslot(k, kLatB).data.data(), dstage[k]);
  }

  // Encoder, coarsest stage first.
  for (std::size_t s = levels; s-- > 0;) {
    FeatureMap dpre = leaky_avgpool_backward(cache.pre_activations[s], dstage[s]);
    FeatureMap* dinput = s > 0 ? &dstage[s - 1] : nullptr;
    conv3x3_backward(cache.stage_inputs[s], slot(s, kEncW), dpre, gslot(s, kEncW),
                     gslot(s, kEncB), dinput);
  }
  return grads;
}

std::vector<std::uint8_t> TinyNet::encode() const {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(config_.input_size);
  w.u32(config_.base_channels);
  w.u32(static_cast<std::uint32_t>(config_.strides.size()));
  for (auto s : config_.strides) w.u32(s);
  w.u64(config_.seed);
  w.u32(static_cast<std::uint32_t>(params_.size()));
  for (const auto& t : params_) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

TinyNet TinyNet::decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kCheckpointMagic, 4)) throw DataError("checkpoint: bad magic");
  if (r.u32() != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
  ModelConfig cfg;
  cfg.input_size = r.u32();
  cfg.base_channels = r.u32();
  const std::uint32_t n_strides = r.u32();
  if (n_strides == 0 || n_strides > 16) throw DataError("checkpoint: bad level count");
  cfg.strides.assign(n_strides, 0);
  for (auto& s : cfg.strides) s = r.u32();
  cfg.seed = r.u64();
  try {
    cfg.check();
  } catch (const ContractError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }

  TinyNet net(cfg);
  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != net.params_.size()) throw DataError("checkpoint: tensor count mismatch");
  for (auto& t : net.params_) {
    const std::string name = r.str(r.u32());
    if (name != t.name) throw DataError("checkpoint: expected tensor '" + t.name + "', found '" + name + "'");
    const std::uint32_t ndims = r.u32();
    if (ndims != t.shape.size()) throw DataError("checkpoint: rank mismatch for '" + name + "'");
    for (auto d : t.shape) {
      if (r.u32() != d) throw DataError("checkpoint: shape mismatch for '" + name + "'");
    }
    for (auto& v : t.data) v = std::bit_cast<float>(r.u32());
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  net.touch();
  return net;
}

void TinyNet::save(const std::filesystem::path& path) const { write_file(path, encode()); }

TinyNet TinyNet::load(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void adam_step(std::span<Tensor> weights, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options) {
  require(weights.size() == grads.size(), "adam: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i].numel() == grads[i].numel(),
            "adam: shape mismatch for '" + weights[i].name + "'");
    for (float g : grads[i].data) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + grads[i].name + "'");
    }
  }
  if (state.m.empty()) {
    for (const auto& w : weights) {
      state.m.emplace_back(w.numel(), 0.0);
      state.v.emplace_back(w.numel(), 0.0);
    }
  }
  require(state.m.size() == weights.size(), "adam: optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = weights[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * static_cast<double>(g[j]) * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      const double update = options.lr * (mhat / (std::sqrt(vhat) + options.eps)) +
                            options.lr * options.weight_decay * w[j];
      w[j] = static_cast<float>(w[j] - update);
    }
  }
}

Heatmap upsample_bilinear(const Heatmap& map, std::size_t rows, std::size_t cols) {
  require(!map.empty(), "upsample: empty map");
  if (map.rows == rows && map.cols == cols) return map;
  Heatmap out(rows, cols);
  const double fy = static_cast<double>(map.rows) / static_cast<double>(rows);
  const double fx = static_cast<double>(map.cols) / static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double sy = std::clamp((r + 0.5) * fy - 0.5, 0.0, map.rows - 1.0);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, map.rows - 1);
    const double ty = sy - y0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double sx = std::clamp((c + 0.5) * fx - 0.5, 0.0, map.cols - 1.0);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, map.cols - 1);
      const double tx = sx - x0;
      out(r, c) = (1 - ty) * ((1 - tx) * map(y0, x0) + tx * map(y0, x1)) +
                  ty * ((1 - tx) * map(y1, x0) + tx * map(y1, x1));
    }
  }
  return out;
}

Heatmap merge_pyramid(const PyramidOutput& out) {
  require(!out.maps.empty(), "merge_pyramid: no levels");
  const std::size_t rows = out.maps.front().rows;
  const std::size_t cols = out.maps.front().cols;
  Heatmap merged(rows, cols);
  for (const auto& level : out.maps) {
    const Heatmap up = upsample_bilinear(level, rows, cols);
    for (std::size_t i = 0; i < merged.size(); ++i) merged.values[i] += up.values[i];
  }
  const double inv = 1.0 / static_cast<double>(out.maps.size());
  for (auto& v : merged.values) v *= inv;
  return merged;
}

}  // namespace wlk
