#pragma once

// Small from-scratch neural networks: an MLP over feature vectors and a
// residual CNN over 4-channel RGB + height rasters. Parameters live in one
// flat vector per network; layers own only their shape.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/parallel.hpp"
#include "agb/core/rng.hpp"
#include "agb/core/tensor.hpp"

namespace agb::nn {

struct Shape {
  std::size_t c = 0, h = 1, w = 1;
  std::size_t size() const noexcept { return c * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline Shape shape_of(const Tensor& t) { return {t.channels, t.height, t.width}; }

enum class LayerType : std::uint8_t { Dense = 1, Conv2d = 2, ChannelAffine = 3, Relu = 4, GlobalAvgPool = 5,
                                      Sigmoid = 6, Residual = 7 };

/// Intermediate activations a layer needs for its backward pass.
using Cache = std::vector<Tensor>;

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerType type() const = 0;
  virtual Shape output_shape(Shape in) const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual void init(std::span<double> /*params*/, RandomStream& /*rng*/) const {}
  virtual Tensor forward(const Tensor& x, std::span<const double> params, Cache* cache) const = 0;
  /// Returns dL/dx and adds dL/dparams into dparams.
  virtual Tensor backward(const Tensor& x, const Tensor& y, const Cache& cache, const Tensor& dy,
                          std::span<const double> params, std::span<double> dparams) const = 0;
  /// Integer hyperparameters, enough to rebuild the layer.
  virtual std::vector<std::uint32_t> config() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, double init_scale = 2.0) : in_(in), out_(out), init_scale_(init_scale) {}
  LayerType type() const override { return LayerType::Dense; }
  Shape output_shape(Shape in) const override {
    if (in.size() != in_) throw DomainError("dense layer input size mismatch");
    return {out_, 1, 1};
  }
  std::size_t param_count() const override { return out_ * in_ + out_; }
  void init(std::span<double> p, RandomStream& rng) const override {
    const double sd = std::sqrt(init_scale_ / static_cast<double>(in_));
    for (std::size_t i = 0; i < out_ * in_; ++i) p[i] = sd * rng.normal();
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(out_ * in_), p.end(), 0.0);
  }
  Tensor forward(const Tensor& x, std::span<const double> p, Cache*) const override {
    Tensor y(out_, 1, 1);
    for (std::size_t o = 0; o < out_; ++o) {
      double s = p[out_ * in_ + o];
      const double* w = &p[o * in_];
      for (std::size_t i = 0; i < in_; ++i) s += w[i] * x.data[i];
      y.data[o] = s;
    }
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor&, const Cache&, const Tensor& dy, std::span<const double> p,
                  std::span<double> dp) const override {
    Tensor dx(x.channels, x.height, x.width);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = dy.data[o];
      dp[out_ * in_ + o] += g;
      const double* w = &p[o * in_];
      double* dw = &dp[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        dw[i] += g * x.data[i];
        dx.data[i] += g * w[i];
      }
    }
    return dx;
  }
  std::vector<std::uint32_t> config() const override {
    return {static_cast<std::uint32_t>(in_), static_cast<std::uint32_t>(out_)};
  }

 private:
  std::size_t in_, out_;
  double init_scale_;
};

/// k x k convolution with zero padding; weights [out][in][k][k] then bias[out].
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_c, std::size_t out_c, std::size_t k = 3, std::size_t stride = 1, std::size_t pad = 1)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {}
  LayerType type() const override { return LayerType::Conv2d; }
  Shape output_shape(Shape in) const override {
    if (in.c != in_c_) throw DomainError("conv layer channel mismatch");
    if (in.h + 2 * pad_ < k_ || in.w + 2 * pad_ < k_) throw DomainError("conv kernel larger than input");
    return {out_c_, (in.h + 2 * pad_ - k_) / stride_ + 1, (in.w + 2 * pad_ - k_) / stride_ + 1};
  }
  std::size_t param_count() const override { return out_c_ * in_c_ * k_ * k_ + out_c_; }
  void init(std::span<double> p, RandomStream& rng) const override {
    const std::size_t nw = out_c_ * in_c_ * k_ * k_;
    const double sd = std::sqrt(2.0 / static_cast<double>(in_c_ * k_ * k_));
    for (std::size_t i = 0; i < nw; ++i) p[i] = sd * rng.normal();
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(nw), p.end(), 0.0);
  }
  Tensor forward(const Tensor& x, std::span<const double> p, Cache*) const override {
    const Shape os = output_shape(shape_of(x));
    Tensor y(os.c, os.h, os.w);
    const std::size_t nw = out_c_ * in_c_ * k_ * k_;
    for (std::size_t o = 0; o < out_c_; ++o) {
      double* yo = &y.data[o * os.h * os.w];
      std::fill(yo, yo + os.h * os.w, p[nw + o]);
      for (std::size_t i = 0; i < in_c_; ++i) {
        const double* xi = &x.data[i * x.height * x.width];
        for (std::size_t ky = 0; ky < k_; ++ky)
          for (std::size_t kx = 0; kx < k_; ++kx) {
            const double w = p[((o * in_c_ + i) * k_ + ky) * k_ + kx];
            for (std::size_t oy = 0; oy < os.h; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.height)) continue;
              const double* row = xi + static_cast<std::size_t>(iy) * x.width;
              double* out = yo + oy * os.w;
              for (std::size_t ox = 0; ox < os.w; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.width)) continue;
                out[ox] += w * row[ix];
              }
            }
          }
      }
    }
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor& y, const Cache&, const Tensor& dy, std::span<const double> p,
                  std::span<double> dp) const override {
    Tensor dx(x.channels, x.height, x.width);
    const std::size_t oh = y.height, ow = y.width;
    const std::size_t nw = out_c_ * in_c_ * k_ * k_;
    for (std::size_t o = 0; o < out_c_; ++o) {
      const double* go = &dy.data[o * oh * ow];
      double bsum = 0.0;
      for (std::size_t t = 0; t < oh * ow; ++t) bsum += go[t];
      dp[nw + o] += bsum;
      for (std::size_t i = 0; i < in_c_; ++i) {
        const double* xi = &x.data[i * x.height * x.width];
        double* dxi = &dx.data[i * x.height * x.width];
        for (std::size_t ky = 0; ky < k_; ++ky)
          for (std::size_t kx = 0; kx < k_; ++kx) {
            const std::size_t widx = ((o * in_c_ + i) * k_ + ky) * k_ + kx;
            const double w = p[widx];
            double gw = 0.0;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.height)) continue;
              const double* row = xi + static_cast<std::size_t>(iy) * x.width;
              double* drow = dxi + static_cast<std::size_t>(iy) * x.width;
              const double* g = go + oy * ow;
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.width)) continue;
                gw += g[ox] * row[ix];
                drow[ix] += g[ox] * w;
              }
            }
            dp[widx] += gw;
          }
      }
    }
    return dx;
  }
  std::vector<std::uint32_t> config() const override {
    return {static_cast<std::uint32_t>(in_c_), static_cast<std::uint32_t>(out_c_), static_cast<std::uint32_t>(k_),
            static_cast<std::uint32_t>(stride_), static_cast<std::uint32_t>(pad_)};
  }

 private:
  std::size_t in_c_, out_c_, k_, stride_, pad_;
};

/// Per-channel learned scale and shift, y = gamma_c * x + beta_c. Used as the
/// normalization slot of residual blocks; it carries no batch statistics, so
/// training and inference compute the same function.
class ChannelAffine final : public Layer {
 public:
  ChannelAffine(std::size_t channels, double gamma0 = 1.0) : c_(channels), gamma0_(gamma0) {}
  LayerType type() const override { return LayerType::ChannelAffine; }
  Shape output_shape(Shape in) const override {
    if (in.c != c_) throw DomainError("affine layer channel mismatch");
    return in;
  }
  std::size_t param_count() const override { return 2 * c_; }
  void init(std::span<double> p, RandomStream&) const override {
    std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(c_), gamma0_);
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(c_), p.end(), 0.0);
  }
  Tensor forward(const Tensor& x, std::span<const double> p, Cache*) const override {
    Tensor y = x;
    const std::size_t hw = x.height * x.width;
    for (std::size_t c = 0; c < c_; ++c)
      for (std::size_t t = 0; t < hw; ++t) y.data[c * hw + t] = p[c] * x.data[c * hw + t] + p[c_ + c];
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor&, const Cache&, const Tensor& dy, std::span<const double> p,
                  std::span<double> dp) const override {
    Tensor dx(x.channels, x.height, x.width);
    const std::size_t hw = x.height * x.width;
    for (std::size_t c = 0; c < c_; ++c) {
      double gg = 0.0, gb = 0.0;
      for (std::size_t t = 0; t < hw; ++t) {
        const double g = dy.data[c * hw + t];
        gg += g * x.data[c * hw + t];
        gb += g;
        dx.data[c * hw + t] = g * p[c];
      }
      dp[c] += gg;
      dp[c_ + c] += gb;
    }
    return dx;
  }
  std::vector<std::uint32_t> config() const override { return {static_cast<std::uint32_t>(c_)}; }

 private:
  std::size_t c_;
  double gamma0_;
};

class Relu final : public Layer {
 public:
  LayerType type() const override { return LayerType::Relu; }
  Shape output_shape(Shape in) const override { return in; }
  Tensor forward(const Tensor& x, std::span<const double>, Cache*) const override {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor&, const Cache&, const Tensor& dy, std::span<const double>,
                  std::span<double>) const override {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (!(x.data[i] > 0.0)) dx.data[i] = 0.0;
    return dx;
  }
  std::vector<std::uint32_t> config() const override { return {}; }
};

class GlobalAvgPool final : public Layer {
 public:
  LayerType type() const override { return LayerType::GlobalAvgPool; }
  Shape output_shape(Shape in) const override { return {in.c, 1, 1}; }
  Tensor forward(const Tensor& x, std::span<const double>, Cache*) const override {
    Tensor y(x.channels, 1, 1);
    const std::size_t hw = x.height * x.width;
    for (std::size_t c = 0; c < x.channels; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < hw; ++t) s += x.data[c * hw + t];
      y.data[c] = s / static_cast<double>(hw);
    }
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor&, const Cache&, const Tensor& dy, std::span<const double>,
                  std::span<double>) const override {
    Tensor dx(x.channels, x.height, x.width);
    const std::size_t hw = x.height * x.width;
    for (std::size_t c = 0; c < x.channels; ++c)
      for (std::size_t t = 0; t < hw; ++t) dx.data[c * hw + t] = dy.data[c] / static_cast<double>(hw);
    return dx;
  }
  std::vector<std::uint32_t> config() const override { return {}; }
};

inline double sigmoid(double z) noexcept {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

class Sigmoid final : public Layer {
 public:
  LayerType type() const override { return LayerType::Sigmoid; }
  Shape output_shape(Shape in) const override { return in; }
  Tensor forward(const Tensor& x, std::span<const double>, Cache*) const override {
    Tensor y = x;
    for (auto& v : y.data) v = sigmoid(v);
    return y;
  }
  Tensor backward(const Tensor&, const Tensor& y, const Cache&, const Tensor& dy, std::span<const double>,
                  std::span<double>) const override {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= y.data[i] * (1.0 - y.data[i]);
    return dx;
  }
  std::vector<std::uint32_t> config() const override { return {}; }
};

/// conv - affine - relu - conv - affine, plus identity skip, relu after add.
class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(std::size_t channels)
      : c_(channels), conv1_(channels, channels), norm1_(channels), conv2_(channels, channels),
        norm2_(channels, 0.0) {}
  LayerType type() const override { return LayerType::Residual; }
  Shape output_shape(Shape in) const override {
    if (in.c != c_) throw DomainError("residual block channel mismatch");
    return in;
  }
  std::size_t param_count() const override { return 2 * conv1_.param_count() + 2 * norm1_.param_count(); }
  void init(std::span<double> p, RandomStream& rng) const override {
    auto parts = split(p);
    conv1_.init(parts[0], rng);
    norm1_.init(parts[1], rng);
    conv2_.init(parts[2], rng);
    norm2_.init(parts[3], rng);
  }
  // Cache layout: [conv1 out, norm1 out, relu out, conv2 out, norm2 out (pre-add), sum (pre-relu)]
  Tensor forward(const Tensor& x, std::span<const double> p, Cache* cache) const override {
    auto parts = split_const(p);
    Tensor a = conv1_.forward(x, parts[0], nullptr);
    Tensor b = norm1_.forward(a, parts[1], nullptr);
    Tensor c = relu_.forward(b, {}, nullptr);
    Tensor d = conv2_.forward(c, parts[2], nullptr);
    Tensor e = norm2_.forward(d, parts[3], nullptr);
    Tensor s = e;
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] += x.data[i];
    Tensor y = relu_.forward(s, {}, nullptr);
    if (cache) *cache = {std::move(a), std::move(b), std::move(c), std::move(d), std::move(e), std::move(s)};
    return y;
  }
  Tensor backward(const Tensor& x, const Tensor& y, const Cache& k, const Tensor& dy, std::span<const double> p,
                  std::span<double> dp) const override {
    auto parts = split_const(p);
    auto dparts = split(dp);
    const Tensor ds = relu_.backward(k[5], y, {}, dy, {}, {});
    const Tensor dd = norm2_.backward(k[3], k[4], {}, ds, parts[3], dparts[3]);
    const Tensor dc = conv2_.backward(k[2], k[3], {}, dd, parts[2], dparts[2]);
    const Tensor db = relu_.backward(k[1], k[2], {}, dc, {}, {});
    const Tensor da = norm1_.backward(k[0], k[1], {}, db, parts[1], dparts[1]);
    Tensor dx = conv1_.backward(x, k[0], {}, da, parts[0], dparts[0]);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
    return dx;
  }
  std::vector<std::uint32_t> config() const override { return {static_cast<std::uint32_t>(c_)}; }

 private:
  std::array<std::span<double>, 4> split(std::span<double> p) const {
    const std::size_t a = conv1_.param_count(), b = norm1_.param_count();
    return {p.subspan(0, a), p.subspan(a, b), p.subspan(a + b, a), p.subspan(2 * a + b, b)};
  }
  std::array<std::span<const double>, 4> split_const(std::span<const double> p) const {
    const std::size_t a = conv1_.param_count(), b = norm1_.param_count();
    return {p.subspan(0, a), p.subspan(a, b), p.subspan(a + b, a), p.subspan(2 * a + b, b)};
  }

  std::size_t c_;
  Conv2d conv1_;
  ChannelAffine norm1_;
  Relu relu_;
  Conv2d conv2_;
  ChannelAffine norm2_;
};

/// Per-sample record of a forward pass.
struct Tape {
  std::vector<Tensor> activations;  // activations[0] is the input
  std::vector<Cache> caches;
};

class Network {
 public:
  Network() = default;
  explicit Network(Shape input) : input_(input) {}

  Network(const Network& o) : input_(o.input_), params_(o.params_), offsets_(o.offsets_) {
    for (const auto& l : o.layers_) layers_.push_back(rebuild(l->type(), l->config()));
  }
  Network& operator=(const Network& o) {
    if (this != &o) {
      Network tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  template <typename L, typename... Args>
  Network& add(Args&&... args) {
    add_layer(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }

  void add_layer(std::unique_ptr<Layer> layer) {
    Shape in = layers_.empty() ? input_ : output_shape();
    out_ = layer->output_shape(in);
    offsets_.push_back(params_.size());
    params_.resize(params_.size() + layer->param_count(), 0.0);
    layers_.push_back(std::move(layer));
  }

  void init(RandomStream& rng) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->init(layer_params(i), rng);
  }

  Shape input_shape() const noexcept { return input_; }
  Shape output_shape() const noexcept { return layers_.empty() ? input_ : out_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  std::span<double> layer_params(std::size_t i) {
    return std::span<double>(params_).subspan(offsets_[i], layers_[i]->param_count());
  }
  std::span<const double> layer_params(std::size_t i) const {
    return std::span<const double>(params_).subspan(offsets_[i], layers_[i]->param_count());
  }

  Tensor forward(const Tensor& x) const {
    check_input(x);
    Tensor a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) a = layers_[i]->forward(a, layer_params(i), nullptr);
    return a;
  }

  Tape forward_tape(const Tensor& x) const {
    check_input(x);
    Tape t;
    t.activations.reserve(layers_.size() + 1);
    t.caches.resize(layers_.size());
    t.activations.push_back(x);
    for (std::size_t i = 0; i < layers_.size(); ++i)
      t.activations.push_back(layers_[i]->forward(t.activations.back(), layer_params(i), &t.caches[i]));
    return t;
  }

  /// Back-propagates dL/d(output) through the tape; adds into grad (same
  /// layout as params) and returns dL/d(input).
  Tensor backward(const Tape& t, const Tensor& dout, std::span<double> grad) const {
    Tensor g = dout;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      auto dp = grad.subspan(offsets_[i], layers_[i]->param_count());
      g = layers_[i]->backward(t.activations[i], t.activations[i + 1], t.caches[i], g, layer_params(i), dp);
    }
    return g;
  }

  static std::unique_ptr<Layer> rebuild(LayerType type, const std::vector<std::uint32_t>& c) {
    auto need = [&](std::size_t n) {
      if (c.size() != n) throw DomainError("bad layer configuration");
    };
    switch (type) {
      case LayerType::Dense: need(2); return std::make_unique<Dense>(c[0], c[1]);
      case LayerType::Conv2d: need(5); return std::make_unique<Conv2d>(c[0], c[1], c[2], c[3], c[4]);
      case LayerType::ChannelAffine: need(1); return std::make_unique<ChannelAffine>(c[0]);
      case LayerType::Relu: need(0); return std::make_unique<Relu>();
      case LayerType::GlobalAvgPool: need(0); return std::make_unique<GlobalAvgPool>();
      case LayerType::Sigmoid: need(0); return std::make_unique<Sigmoid>();
      case LayerType::Residual: need(1); return std::make_unique<ResidualBlock>(c[0]);
    }
    throw DomainError("unknown layer type");
  }

 private:
  void check_input(const Tensor& x) const {
    if (shape_of(x) != input_) throw DomainError("network input shape mismatch");
  }

  Shape input_;
  Shape out_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

// --- architectures -------------------------------------------------------------

struct NetParams {
  std::vector<std::size_t> hidden{32, 32};  // MLP hidden widths
  std::size_t stem_channels = 8;            // CNN
  std::size_t residual_blocks = 4;
  std::size_t stem_stride = 2;
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  int epochs = 15;
  double y_max = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 7;

  void validate() const {
    if (batch_size < 1) throw DomainError("batch_size must be at least 1");
    if (!(learning_rate > 0)) throw DomainError("learning_rate must be positive");
    if (!(y_max > 0)) throw DomainError("y_max must be positive");
    if (epochs < 0) throw DomainError("epochs must be non-negative");
  }
};

/// Dense/ReLU stack ending in dense -> sigmoid.
inline Network make_mlp(std::size_t inputs, const NetParams& p) {
  Network net(Shape{inputs, 1, 1});
  std::size_t width = inputs;
  for (std::size_t h : p.hidden) {
    net.add<Dense>(width, h);
    net.add<Relu>();
    width = h;
  }
  net.add<Dense>(width, std::size_t{1}, 1.0);
  net.add<Sigmoid>();
  return net;
}

/// Stem conv -> residual blocks -> global average pool -> dense -> sigmoid.
inline Network make_residual_cnn(Shape input, const NetParams& p) {
  Network net(input);
  net.add<Conv2d>(input.c, p.stem_channels, std::size_t{3}, p.stem_stride, std::size_t{1});
  net.add<Relu>();
  for (std::size_t b = 0; b < p.residual_blocks; ++b) net.add<ResidualBlock>(p.stem_channels);
  net.add<GlobalAvgPool>();
  net.add<Dense>(p.stem_channels, std::size_t{1}, 1.0);
  net.add<Sigmoid>();
  return net;
}

// --- training ----------------------------------------------------------------------

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Mean squared error of the network output (a single sigmoid unit) against
/// normalized targets, and its gradient summed over the given samples.
inline double batch_loss_and_grad(const Network& net, std::span<const Tensor> inputs,
                                  std::span<const double> targets, std::span<double> grad, unsigned threads = 1) {
  const std::size_t n = inputs.size();
  std::vector<std::vector<double>> grads(n);
  std::vector<double> losses(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const Tape tape = net.forward_tape(inputs[i]);
    const double out = tape.activations.back().data[0];
    const double err = out - targets[i];
    losses[i] = err * err;
    Tensor dout(1, 1, 1);
    dout.data[0] = 2.0 * err / static_cast<double>(n);
    grads[i].assign(net.params().size(), 0.0);
    net.backward(tape, dout, grads[i]);
  });
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += losses[i];
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += grads[i][k];
  }
  return loss / static_cast<double>(n);
}

struct TrainResult {
  std::vector<double> epoch_loss;  // mean per-sample loss seen during each epoch
};

/// Mini-batch Adam on MSE of targets / y_max. Batches follow a per-epoch
/// permutation drawn from the seed; per-sample gradients are reduced in
/// sample order, so the result is independent of the thread count.
inline TrainResult train_network(Network& net, std::span<const Tensor> inputs, std::span<const double> targets,
                                 const NetParams& p, unsigned threads = 1) {
  p.validate();
  if (inputs.size() != targets.size() || inputs.empty()) throw DomainError("inputs and targets must be non-empty and aligned");
  const std::size_t n = inputs.size();
  std::vector<double> norm(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    norm[i] = targets[i] / p.y_max;
    mean += norm[i];
  }
  mean /= static_cast<double>(n);

  const RandomStream root(p.seed, "nn");
  RandomStream init_rng = root.derive("init");
  net.init(init_rng);
  // Start the sigmoid head at the mean target.
  const double m = std::clamp(mean, 0.02, 0.98);
  net.params().back() = std::log(m / (1.0 - m));

  Adam opt(net.params().size(), p.learning_rate, p.beta1, p.beta2, p.adam_eps);
  TrainResult result;
  std::vector<std::size_t> order(n);
  std::vector<Tensor> batch_in;
  std::vector<double> batch_y;
  std::vector<double> grad(net.params().size());
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle = root.derive("epoch", static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += p.batch_size) {
      const std::size_t end = std::min(n, start + p.batch_size);
      batch_in.clear();
      batch_y.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_in.push_back(inputs[order[k]]);
        batch_y.push_back(norm[order[k]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_loss_and_grad(net, batch_in, batch_y, grad, threads);
      if (!std::isfinite(loss)) throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch + 1), epoch + 1);
      epoch_loss += loss * static_cast<double>(end - start);
      opt.step(net.params(), grad);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch + 1), epoch + 1);
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

}  // namespace agb::nn
