#pragma once

// Uniform front for the four regressors plus the CFMD model container:
//   "CFMD" | version u8 | kind u8 | blob length u64 | blob

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "agb/core/bytes.hpp"
#include "agb/core/error.hpp"
#include "agb/core/tensor.hpp"
#include "agb/features.hpp"
#include "agb/ingest/formats.hpp"
#include "agb/models/matrix.hpp"
#include "agb/models/nn.hpp"
#include "agb/models/rfr.hpp"
#include "agb/models/svr.hpp"

namespace agb::models {

enum class ModelKind : std::uint8_t { Rfr = 1, Svr = 2, Mlp = 3, Cnn = 4 };

inline constexpr std::uint8_t kModelVersion = 1;

inline std::string model_name(ModelKind k) {
  switch (k) {
    case ModelKind::Rfr: return "rfr";
    case ModelKind::Svr: return "svr";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Cnn: return "cnn";
  }
  return "?";
}

/// Row label used in reports.
inline std::string model_label(ModelKind k) {
  switch (k) {
    case ModelKind::Rfr: return "RFR";
    case ModelKind::Svr: return "SVR";
    case ModelKind::Mlp: return "ANN (MLP)";
    case ModelKind::Cnn: return "Residual CNN";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::Rfr, ModelKind::Svr, ModelKind::Mlp, ModelKind::Cnn})
    if (model_name(k) == s) return k;
  throw UsageError("unknown model '" + s + "' (expected one of: rfr, svr, mlp, cnn)");
}

inline std::vector<ModelKind> parse_model_list(const std::string& csv) {
  std::vector<ModelKind> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(parse_model_kind(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool uses_tensors(ModelKind k) noexcept { return k == ModelKind::Cnn; }

struct SvrRegressor {
  Standardizer scaler;
  SvrModel svr;
};

struct MlpRegressor {
  Standardizer scaler;
  nn::Network net;
  double y_max = 1.0;
};

struct CnnRegressor {
  nn::Network net;
  double y_max = 1.0;
};

class Regressor {
 public:
  using Body = std::variant<RandomForest, SvrRegressor, MlpRegressor, CnnRegressor>;

  Regressor() = default;
  explicit Regressor(Body body) : body_(std::move(body)) {}

  ModelKind kind() const noexcept { return static_cast<ModelKind>(body_.index() + 1); }
  const Body& body() const noexcept { return body_; }

  double predict(std::span<const double> features) const {
    if (const auto* f = std::get_if<RandomForest>(&body_)) return f->predict(features);
    if (const auto* s = std::get_if<SvrRegressor>(&body_)) return std::max(0.0, s->svr.decision(s->scaler.apply(features)));
    if (const auto* m = std::get_if<MlpRegressor>(&body_)) {
      const auto z = m->scaler.apply(features);
      Tensor t(z.size(), 1, 1);
      t.data = z;
      return m->net.forward(t).data[0] * m->y_max;
    }
    throw DomainError("the CNN regressor takes a 4-channel tensor, not a feature vector");
  }

  double predict(const features::FeatureVec& f) const {
    const auto v = f.values();
    return predict(std::span<const double>(v));
  }

  double predict(const Tensor& t) const {
    const auto* c = std::get_if<CnnRegressor>(&body_);
    if (!c) throw DomainError(model_name(kind()) + " takes a feature vector, not a tensor");
    return c->net.forward(t).data[0] * c->y_max;
  }

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(x.row(i));
    return out;
  }

  std::vector<double> predict(std::span<const Tensor> xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
    return out;
  }

 private:
  Body body_;
};

// --- serialization ------------------------------------------------------------------

namespace detail {

inline void put_doubles(ByteWriter& w, std::span<const double> v) {
  w.u64(v.size());
  for (double d : v) w.f64(d);
}

inline std::vector<double> get_doubles(ByteReader& r, const char* what) {
  const std::uint64_t n = r.u64(what);
  r.need(n * 8, what);
  std::vector<double> v(n);
  for (auto& d : v) d = r.f64(what);
  return v;
}

inline void put_scaler(ByteWriter& w, const Standardizer& s) {
  put_doubles(w, s.mean);
  put_doubles(w, s.scale);
}

inline Standardizer get_scaler(ByteReader& r) {
  Standardizer s;
  s.mean = get_doubles(r, "scaler mean");
  s.scale = get_doubles(r, "scaler scale");
  if (s.mean.size() != s.scale.size()) throw FormatError("scaler mean and scale differ in length", r.offset());
  return s;
}

inline void put_network(ByteWriter& w, const nn::Network& net) {
  const nn::Shape in = net.input_shape();
  w.u32(static_cast<std::uint32_t>(in.c));
  w.u32(static_cast<std::uint32_t>(in.h));
  w.u32(static_cast<std::uint32_t>(in.w));
  w.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    w.u8(static_cast<std::uint8_t>(net.layer(i).type()));
    const auto cfg = net.layer(i).config();
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    for (auto c : cfg) w.u32(c);
  }
  put_doubles(w, net.params());
}

inline nn::Network get_network(ByteReader& r) {
  nn::Shape in;
  in.c = r.u32("network input");
  in.h = r.u32("network input");
  in.w = r.u32("network input");
  nn::Network net(in);
  const std::uint32_t layers = r.u32("layer count");
  for (std::uint32_t i = 0; i < layers; ++i) {
    const std::size_t at = r.offset();
    const auto type = static_cast<nn::LayerType>(r.u8("layer type"));
    const std::uint32_t n = r.u32("layer config");
    if (n > 16) throw FormatError("implausible layer configuration length", at);
    std::vector<std::uint32_t> cfg(n);
    for (auto& c : cfg) c = r.u32("layer config");
    try {
      net.add_layer(nn::Network::rebuild(type, cfg));
    } catch (const DomainError& e) {
      throw FormatError(std::string("invalid layer: ") + e.what(), at);
    }
  }
  const std::size_t at = r.offset();
  auto params = get_doubles(r, "network parameters");
  if (params.size() != net.params().size()) throw FormatError("parameter count does not match the architecture", at);
  net.params() = std::move(params);
  return net;
}

inline void put_forest(ByteWriter& w, const RandomForest& f) {
  w.u32(static_cast<std::uint32_t>(f.dims()));
  w.u32(static_cast<std::uint32_t>(f.trees().size()));
  for (const auto& t : f.trees()) {
    w.u32(static_cast<std::uint32_t>(t.nodes().size()));
    for (const auto& n : t.nodes()) {
      w.u32(static_cast<std::uint32_t>(n.feature));
      w.f64(n.threshold);
      w.u32(static_cast<std::uint32_t>(n.left));
      w.u32(static_cast<std::uint32_t>(n.right));
      w.f64(n.value);
    }
  }
}

inline RandomForest get_forest(ByteReader& r) {
  const std::uint32_t dims = r.u32("forest dims");
  const std::uint32_t n_trees = r.u32("tree count");
  if (n_trees == 0) throw FormatError("forest has no trees", r.offset());
  std::vector<RegressionTree> trees;
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const std::size_t at = r.offset();
    const std::uint32_t count = r.u32("node count");
    r.need(std::uint64_t{count} * 28, "tree nodes");
    if (count == 0) throw FormatError("empty tree", at);
    std::vector<TreeNode> nodes(count);
    for (auto& n : nodes) {
      n.feature = static_cast<std::int32_t>(r.u32("node"));
      n.threshold = r.f64("node");
      n.left = static_cast<std::int32_t>(r.u32("node"));
      n.right = static_cast<std::int32_t>(r.u32("node"));
      n.value = r.f64("node");
    }
    // Children must point forward so prediction always terminates.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.feature < 0) continue;
      const auto ok = [&](std::int32_t c) { return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(count); };
      if (n.feature >= static_cast<std::int32_t>(dims) || !ok(n.left) || !ok(n.right))
        throw FormatError("corrupt tree node", at);
    }
    trees.emplace_back(std::move(nodes));
  }
  return RandomForest(dims, std::move(trees));
}

inline void put_svr(ByteWriter& w, const SvrRegressor& s) {
  put_scaler(w, s.scaler);
  w.u8(static_cast<std::uint8_t>(s.svr.kernel.kind));
  w.f64(s.svr.kernel.gamma);
  w.f64(s.svr.rho);
  w.u64(s.svr.support.rows);
  w.u64(s.svr.support.cols);
  put_doubles(w, s.svr.support.data);
  put_doubles(w, s.svr.coef);
}

inline SvrRegressor get_svr(ByteReader& r) {
  SvrRegressor s;
  s.scaler = get_scaler(r);
  const std::size_t at = r.offset();
  const std::uint8_t k = r.u8("kernel");
  if (k > 1) throw FormatError("unknown kernel", at);
  s.svr.kernel.kind = static_cast<KernelKind>(k);
  s.svr.kernel.gamma = r.f64("kernel gamma");
  s.svr.rho = r.f64("rho");
  s.svr.support.rows = r.u64("support rows");
  s.svr.support.cols = r.u64("support cols");
  const std::size_t data_at = r.offset();
  s.svr.support.data = get_doubles(r, "support vectors");
  s.svr.coef = get_doubles(r, "coefficients");
  if (s.svr.support.data.size() != s.svr.support.rows * s.svr.support.cols ||
      s.svr.coef.size() != s.svr.support.rows)
    throw FormatError("support vector table has inconsistent dimensions", data_at);
  return s;
}

}  // namespace detail

inline std::string encode_model(const Regressor& m) {
  ByteWriter blob;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, RandomForest>) {
          detail::put_forest(blob, b);
        } else if constexpr (std::is_same_v<T, SvrRegressor>) {
          detail::put_svr(blob, b);
        } else if constexpr (std::is_same_v<T, MlpRegressor>) {
          detail::put_scaler(blob, b.scaler);
          blob.f64(b.y_max);
          detail::put_network(blob, b.net);
        } else {
          blob.f64(b.y_max);
          detail::put_network(blob, b.net);
        }
      },
      m.body());
  ByteWriter w;
  w.raw("CFMD");
  w.u8(kModelVersion);
  w.u8(static_cast<std::uint8_t>(m.kind()));
  w.u64(blob.str().size());
  w.raw(blob.str());
  return w.take();
}

inline Regressor decode_model(std::string_view bytes) {
  ByteReader outer(bytes);
  outer.expect_magic("CFMD", "model container");
  const std::size_t vat = outer.offset();
  if (outer.u8("version") != kModelVersion) throw FormatError("unsupported model container version", vat);
  const std::size_t kat = outer.offset();
  const std::uint8_t kind = outer.u8("model kind");
  if (kind < 1 || kind > 4) throw FormatError("unknown model kind " + std::to_string(kind), kat);
  const std::uint64_t len = outer.u64("blob length");
  const std::size_t base = outer.offset();
  const std::string_view blob = outer.bytes(len, "model blob");
  outer.expect_end("model container");

  ByteReader r(blob);
  Regressor out;
  try {
    switch (static_cast<ModelKind>(kind)) {
      case ModelKind::Rfr: out = Regressor(detail::get_forest(r)); break;
      case ModelKind::Svr: out = Regressor(detail::get_svr(r)); break;
      case ModelKind::Mlp: {
        MlpRegressor m;
        m.scaler = detail::get_scaler(r);
        m.y_max = r.f64("y_max");
        m.net = detail::get_network(r);
        out = Regressor(std::move(m));
        break;
      }
      case ModelKind::Cnn: {
        CnnRegressor c;
        c.y_max = r.f64("y_max");
        c.net = detail::get_network(r);
        out = Regressor(std::move(c));
        break;
      }
    }
    r.expect_end("model blob");
  } catch (const FormatError& e) {
    // Re-anchor the offset to the start of the container.
    throw FormatError(std::string("model blob: ") + e.what(), base + e.offset());
  }
  return out;
}

inline void save_model(const std::filesystem::path& p, const Regressor& m) { io::write_file(p, encode_model(m)); }
inline Regressor load_model(const std::filesystem::path& p) { return decode_model(io::read_file(p)); }

// --- training -------------------------------------------------------------------------

struct ModelParams {
  RfrParams rfr;
  SvrParams svr;
  nn::NetParams mlp;
  nn::NetParams cnn;
};

/// Aligned training inputs; `tensors` may be empty unless a CNN is trained.
struct TrainingData {
  Matrix features;
  std::vector<Tensor> tensors;
  std::vector<double> targets;
};

struct TrainOutcome {
  Regressor model;
  std::vector<double> loss_trace;  // per-epoch loss for the networks
};

inline TrainOutcome train_model(ModelKind kind, const TrainingData& data, const ModelParams& p,
                                unsigned threads = 1) {
  TrainOutcome out;
  switch (kind) {
    case ModelKind::Rfr:
      out.model = Regressor(train_rfr(data.features, data.targets, p.rfr, threads));
      break;
    case ModelKind::Svr: {
      check_training_set(data.features, data.targets);
      SvrRegressor s;
      s.scaler = Standardizer::fit(data.features);
      s.svr = train_svr(s.scaler.apply(data.features), data.targets, p.svr).model;
      out.model = Regressor(std::move(s));
      break;
    }
    case ModelKind::Mlp: {
      check_training_set(data.features, data.targets);
      MlpRegressor m;
      m.scaler = Standardizer::fit(data.features);
      m.y_max = p.mlp.y_max;
      m.net = nn::make_mlp(data.features.cols, p.mlp);
      const Matrix z = m.scaler.apply(data.features);
      std::vector<Tensor> rows(z.rows, Tensor(z.cols, 1, 1));
      for (std::size_t i = 0; i < z.rows; ++i) rows[i].data.assign(z.row(i).begin(), z.row(i).end());
      out.loss_trace = nn::train_network(m.net, rows, data.targets, p.mlp, threads).epoch_loss;
      out.model = Regressor(std::move(m));
      break;
    }
    case ModelKind::Cnn: {
      if (data.tensors.size() != data.targets.size() || data.tensors.size() < 2)
        throw DomainError("CNN training needs one tensor per target and at least two samples");
      CnnRegressor c;
      c.y_max = p.cnn.y_max;
      c.net = nn::make_residual_cnn(nn::shape_of(data.tensors.front()), p.cnn);
      out.loss_trace = nn::train_network(c.net, data.tensors, data.targets, p.cnn, threads).epoch_loss;
      out.model = Regressor(std::move(c));
      break;
    }
  }
  return out;
}

}  // namespace agb::models
