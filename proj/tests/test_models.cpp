#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>

#include "agb/core/rng.hpp"
#include "agb/eval/suite.hpp"
#include "agb/models/nn.hpp"
#include "agb/models/regressor.hpp"
#include "agb/models/rfr.hpp"
#include "agb/models/svr.hpp"
#include "agb/synthfield.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::models;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RandomStream& r) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = r.uniform();
  return m;
}

RfrParams single_tree() {
  RfrParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.min_samples_leaf = 1;
  p.features_per_split = 100;
  return p;
}

// Exhaustive CART: every feature, every midpoint, minimum child SSE.
struct OracleNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0;
  double value = 0;
  std::unique_ptr<OracleNode> left, right;
};

double sse(const std::vector<std::size_t>& idx, std::span<const double> y) {
  double m = 0;
  for (auto i : idx) m += y[i];
  m /= static_cast<double>(idx.size());
  double s = 0;
  for (auto i : idx) s += (y[i] - m) * (y[i] - m);
  return s;
}

std::unique_ptr<OracleNode> oracle_tree(const Matrix& x, std::span<const double> y, const std::vector<std::size_t>& idx,
                                        int depth, int max_depth) {
  auto node = std::make_unique<OracleNode>();
  for (auto i : idx) node->value += y[i];
  node->value /= static_cast<double>(idx.size());
  if (idx.size() < 2 || (max_depth >= 0 && depth >= max_depth)) return node;
  const double parent = sse(idx, y);
  double best = parent;
  bool found = false;
  std::size_t bf = 0;
  double bt = 0;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> vals;
    for (auto i : idx) vals.push_back(x(i, f));
    std::sort(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      if (!(vals[k] < vals[k + 1])) continue;
      const double t = 0.5 * (vals[k] + vals[k + 1]);
      std::vector<std::size_t> l, r;
      for (auto i : idx) (x(i, f) <= t ? l : r).push_back(i);
      const double s = sse(l, y) + sse(r, y);
      if (s < best - 1e-12) {
        best = s;
        bf = f;
        bt = t;
        found = true;
      }
    }
  }
  if (!found) return node;
  node->leaf = false;
  node->feature = bf;
  node->threshold = bt;
  std::vector<std::size_t> l, r;
  for (auto i : idx) (x(i, bf) <= bt ? l : r).push_back(i);
  node->left = oracle_tree(x, y, l, depth + 1, max_depth);
  node->right = oracle_tree(x, y, r, depth + 1, max_depth);
  return node;
}

double oracle_predict(const OracleNode& n, std::span<const double> x) {
  if (n.leaf) return n.value;
  return oracle_predict(x[n.feature] <= n.threshold ? *n.left : *n.right, x);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

Tensor random_tensor(nn::Shape s, RandomStream& r) {
  Tensor t(s.c, s.h, s.w);
  for (auto& v : t.data) v = r.normal();
  return t;
}

// Central-difference check of a network under L = sum(w * out).
double fd_relative_error(nn::Network& net, const Tensor& x, RandomStream& r) {
  const nn::Shape os = net.output_shape();
  const Tensor w = random_tensor(os, r);
  auto loss = [&](const Tensor& in) {
    const Tensor y = net.forward(in);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
    return s;
  };
  std::vector<double> grad(net.params().size(), 0.0);
  const Tensor dx = net.backward(net.forward_tape(x), w, grad);
  const double h = 1e-6;
  double worst = 0;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    const double keep = net.params()[k];
    net.params()[k] = keep + h;
    const double lp = loss(x);
    net.params()[k] = keep - h;
    const double lm = loss(x);
    net.params()[k] = keep;
    compare(grad[k], (lp - lm) / (2 * h));
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    Tensor xp = x, xm = x;
    xp.data[k] += h;
    xm.data[k] -= h;
    compare(dx.data[k], (loss(xp) - loss(xm)) / (2 * h));
  }
  return worst;
}

void perturb(nn::Network& net, RandomStream& r, double sd = 0.3) {
  for (auto& p : net.params()) p += sd * r.normal();
}

class GeneratedInputs : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth::FieldConfig c;
    c.noise_sd = 0.0;
    ds_ = new Dataset(synth::generate_field(c, 4).dataset);
    in_ = new eval::SampleInputs(eval::extract_inputs(*ds_, true, 8, 4));
  }
  static void TearDownTestSuite() {
    delete in_;
    delete ds_;
  }
  static TrainingData data(std::size_t n) {
    std::vector<std::size_t> idx = all_indices(std::min(n, in_->targets.size()));
    return eval::subset(*in_, idx);
  }
  static Dataset* ds_;
  static eval::SampleInputs* in_;
};
Dataset* GeneratedInputs::ds_ = nullptr;
eval::SampleInputs* GeneratedInputs::in_ = nullptr;

ModelParams small_params() {
  ModelParams p;
  p.rfr.n_trees = 20;
  p.cnn.stem_channels = 4;
  p.cnn.residual_blocks = 1;
  p.cnn.epochs = 2;
  p.mlp.epochs = 3;
  return p;
}

}  // namespace

// --- random forest -------------------------------------------------------------

TEST(Rfr, SingleTreeMemorisesUniqueRows) {
  RandomStream r(1, "rfr");
  const Matrix x = random_matrix(40, 3, r);
  std::vector<double> y(40);
  for (auto& v : y) v = r.normal();
  const RandomForest f = train_rfr(x, y, single_tree());
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(f.predict(x.row(i)), y[i]);
}

TEST(Rfr, DepthOneSplitMatchesExhaustiveSearch) {
  RandomStream r(2, "rfr");
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix x = random_matrix(4, 2, r);
    std::vector<double> y(4);
    for (auto& v : y) v = r.normal();
    RfrParams p = single_tree();
    p.max_depth = 1;
    const RandomForest f = train_rfr(x, y, p);
    const auto oracle = oracle_tree(x, y, all_indices(4), 0, 1);
    ASSERT_FALSE(oracle->leaf);
    // Several features can induce the same partition, so compare the
    // partition quality and the fitted values rather than the feature id.
    const TreeNode& root = f.trees()[0].nodes()[0];
    ASSERT_GE(root.feature, 0);
    std::vector<std::size_t> l, rr, ol, orr;
    for (std::size_t i = 0; i < 4; ++i) {
      (x(i, static_cast<std::size_t>(root.feature)) <= root.threshold ? l : rr).push_back(i);
      (x(i, oracle->feature) <= oracle->threshold ? ol : orr).push_back(i);
    }
    EXPECT_NEAR(sse(l, y) + sse(rr, y), sse(ol, y) + sse(orr, y), 1e-12);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(f.predict(x.row(i)), oracle_predict(*oracle, x.row(i)));
  }
}

TEST(Rfr, FullTreeMatchesBruteForceOracle) {
  RandomStream r(3, "rfr");
  for (int trial = 0; trial < 10; ++trial) {
    // One feature: no cross-feature ties, so the trees must agree everywhere.
    const Matrix x = random_matrix(12, 1, r);
    std::vector<double> y(12);
    for (auto& v : y) v = r.normal();
    RfrParams p = single_tree();
    p.max_depth = 2 + trial % 3;
    const RandomForest f = train_rfr(x, y, p);
    const auto oracle = oracle_tree(x, y, all_indices(12), 0, p.max_depth);
    for (int k = 0; k < 50; ++k) {
      const double probe[1] = {r.uniform()};
      EXPECT_DOUBLE_EQ(f.predict(probe), oracle_predict(*oracle, probe));
    }
  }
}

TEST(Rfr, InvariantUnderMonotoneFeatureTransform) {
  RandomStream r(4, "rfr");
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(15, 3, r);
    std::vector<double> y(15);
    for (auto& v : y) v = r.normal();
    for (std::size_t j = 0; j < 3; ++j) {
      Matrix xt = x;
      for (std::size_t i = 0; i < xt.rows; ++i) xt(i, j) = std::exp(3 * xt(i, j)) - 7;
      // Without bootstrap every training row is in-bag, so thresholds placed
      // in either space route it identically.
      RfrParams p;
      p.n_trees = 5;
      p.seed = 11;
      p.bootstrap = false;
      p.min_samples_leaf = 1;
      p.features_per_split = 1;
      const RandomForest a = train_rfr(x, y, p);
      const RandomForest b = train_rfr(xt, y, p);
      for (std::size_t i = 0; i < x.rows; ++i) EXPECT_EQ(a.predict(x.row(i)), b.predict(xt.row(i)));
      const auto oa = oracle_tree(x, y, all_indices(15), 0, 3);
      const auto ob = oracle_tree(xt, y, all_indices(15), 0, 3);
      for (std::size_t i = 0; i < x.rows; ++i) EXPECT_EQ(oracle_predict(*oa, x.row(i)), oracle_predict(*ob, xt.row(i)));
    }
  }
}

TEST(Rfr, ConstantTargetGivesSingleLeaves) {
  Matrix x(5, 1);
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = static_cast<double>(i);
  const std::vector<double> y(5, 0.3);
  const RandomForest f = train_rfr(x, y, RfrParams{});
  for (const auto& t : f.trees()) EXPECT_EQ(t.nodes().size(), 1u);
  const double probe[1] = {2.5};
  EXPECT_NEAR(f.predict(probe), 0.3, 1e-15);
}

TEST(Rfr, DeterministicAcrossRunsAndThreads) {
  RandomStream r(5, "rfr");
  const Matrix x = random_matrix(60, 5, r);
  std::vector<double> y(60);
  for (auto& v : y) v = r.normal();
  const RandomForest a = train_rfr(x, y, RfrParams{}, 1);
  const RandomForest b = train_rfr(x, y, RfrParams{}, 4);
  const Matrix probe = random_matrix(20, 5, r);
  for (std::size_t i = 0; i < probe.rows; ++i) EXPECT_EQ(a.predict(probe.row(i)), b.predict(probe.row(i)));
}

TEST(Rfr, RejectsBadInput) {
  Matrix x(1, 2);
  const std::vector<double> y{1.0};
  EXPECT_THROW(train_rfr(x, y, RfrParams{}), DomainError);
  RfrParams p;
  p.n_trees = 0;
  EXPECT_THROW(train_rfr(Matrix(3, 1), std::vector<double>(3), p), DomainError);
}

// --- support vector regression -----------------------------------------------

TEST(Svr, LinearKernelFitsLineWithinEpsilon) {
  Matrix x(21, 1);
  std::vector<double> y(21);
  for (std::size_t i = 0; i < 21; ++i) {
    x(i, 0) = static_cast<double>(i) / 20.0;
    y[i] = 2.0 * x(i, 0);
  }
  SvrParams p;
  p.kernel = KernelKind::Linear;
  p.epsilon = 0.05;
  const SvrFit fit = train_svr(x, y, p);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_LE(std::abs(fit.model.decision(x.row(i)) - y[i]), p.epsilon + p.tol);
}

TEST(Svr, VanishingCapacityGivesConstant) {
  RandomStream r(6, "svr");
  const Matrix x = random_matrix(30, 2, r);
  std::vector<double> y(30);
  for (auto& v : y) v = r.uniform(0.1, 0.9);
  SvrParams p;
  p.C = 1e-7;
  const SvrFit fit = train_svr(x, y, p);
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k < 50; ++k) {
    const double probe[2] = {r.uniform(), r.uniform()};
    const double v = fit.model.decision(probe);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(hi - lo, 1e-5);
  EXPECT_GT(lo, *std::min_element(y.begin(), y.end()));
  EXPECT_LT(hi, *std::max_element(y.begin(), y.end()));
}

TEST(Svr, ConvergedModelsPassIndependentKktAudit) {
  RandomStream r(7, "svr");
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = random_matrix(40, 3, r);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.05 * r.normal();
    SvrParams p;
    p.C = 2.0 + trial;
    p.epsilon = 0.02;
    p.kernel = trial % 2 ? KernelKind::Linear : KernelKind::Rbf;
    const SvrFit fit = train_svr(x, y, p);
    double sum = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      const double a = fit.alpha[i], as = fit.alpha_star[i];
      ASSERT_GE(a, 0.0);
      ASSERT_LE(a, p.C);
      ASSERT_GE(as, 0.0);
      ASSERT_LE(as, p.C);
      sum += a - as;
      const double e = y[i] - fit.model.decision(x.row(i));
      // Free multipliers sit on the tube; bound ones sit outside it.
      const double slack = 2 * p.tol;
      bool ok = true;
      if (a > 0 && a < p.C) ok &= std::abs(e - p.epsilon) <= slack;
      if (as > 0 && as < p.C) ok &= std::abs(e + p.epsilon) <= slack;
      if (a == 0) ok &= e <= p.epsilon + slack;
      if (as == 0) ok &= e >= -p.epsilon - slack;
      if (a == p.C) ok &= e >= p.epsilon - slack;
      if (as == p.C) ok &= e <= -p.epsilon + slack;
      EXPECT_TRUE(ok) << "sample " << i << " residual " << e << " alpha " << a << " alpha* " << as;
    }
    EXPECT_NEAR(sum, 0.0, 1e-9);
    EXPECT_TRUE(audit_kkt(fit, x, y, p.C, p.epsilon, 2 * p.tol).passed(2 * p.tol));
  }
}

TEST(Svr, IterationBudgetExhaustionReportsViolation) {
  RandomStream r(8, "svr");
  const Matrix x = random_matrix(30, 2, r);
  std::vector<double> y(30);
  for (auto& v : y) v = r.normal();
  SvrParams p;
  p.max_passes = 2;
  try {
    train_svr(x, y, p);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.max_violation(), p.tol);
  }
}

// --- networks -------------------------------------------------------------------

TEST(Gradients, DenseLayer) {
  RandomStream r(10, "g");
  nn::Network net(nn::Shape{5, 1, 1});
  net.add<nn::Dense>(std::size_t{5}, std::size_t{3});
  net.init(r);
  perturb(net, r);
  EXPECT_LT(fd_relative_error(net, random_tensor({5, 1, 1}, r), r), 1e-4);
}

TEST(Gradients, ConvLayerStrideOneAndTwo) {
  for (std::size_t stride : {1u, 2u}) {
    RandomStream r(11, "g");
    nn::Network net(nn::Shape{2, 5, 6});
    net.add<nn::Conv2d>(std::size_t{2}, std::size_t{3}, std::size_t{3}, stride, std::size_t{1});
    net.init(r);
    perturb(net, r);
    EXPECT_LT(fd_relative_error(net, random_tensor({2, 5, 6}, r), r), 1e-4) << "stride " << stride;
  }
}

TEST(Gradients, ChannelAffineLayer) {
  RandomStream r(12, "g");
  nn::Network net(nn::Shape{3, 4, 4});
  net.add<nn::ChannelAffine>(std::size_t{3});
  perturb(net, r);
  EXPECT_LT(fd_relative_error(net, random_tensor({3, 4, 4}, r), r), 1e-4);
}

TEST(Gradients, ReluPoolAndSigmoid) {
  RandomStream r(13, "g");
  nn::Network relu(nn::Shape{2, 3, 3});
  relu.add<nn::Relu>();
  EXPECT_LT(fd_relative_error(relu, random_tensor({2, 3, 3}, r), r), 1e-4);
  nn::Network pool(nn::Shape{2, 3, 3});
  pool.add<nn::GlobalAvgPool>();
  EXPECT_LT(fd_relative_error(pool, random_tensor({2, 3, 3}, r), r), 1e-4);
  nn::Network sig(nn::Shape{4, 1, 1});
  sig.add<nn::Sigmoid>();
  EXPECT_LT(fd_relative_error(sig, random_tensor({4, 1, 1}, r), r), 1e-4);
}

TEST(Gradients, ResidualBlock) {
  RandomStream r(14, "g");
  nn::Network net(nn::Shape{3, 5, 5});
  net.add<nn::ResidualBlock>(std::size_t{3});
  net.init(r);
  perturb(net, r);
  EXPECT_LT(fd_relative_error(net, random_tensor({3, 5, 5}, r), r), 1e-4);
}

TEST(Gradients, TwoBlockMicroNetOnEightSamples) {
  RandomStream r(15, "g");
  nn::NetParams p;
  p.stem_channels = 3;
  p.residual_blocks = 2;
  p.stem_stride = 1;
  nn::Network net = nn::make_residual_cnn({4, 6, 6}, p);
  net.init(r);
  perturb(net, r, 0.2);
  std::vector<Tensor> xs;
  std::vector<double> ys;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(random_tensor({4, 6, 6}, r));
    ys.push_back(r.uniform());
  }
  auto mse = [&] {
    double s = 0;
    for (int i = 0; i < 8; ++i) {
      const double e = net.forward(xs[i]).data[0] - ys[i];
      s += e * e;
    }
    return s / 8;
  };
  std::vector<double> grad(net.params().size(), 0.0);
  const double loss = nn::batch_loss_and_grad(net, xs, ys, grad, 2);
  EXPECT_NEAR(loss, mse(), 1e-12);
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    const double keep = net.params()[k];
    net.params()[k] = keep + h;
    const double lp = mse();
    net.params()[k] = keep - h;
    const double lm = mse();
    net.params()[k] = keep;
    const double num = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(grad[k] - num) / std::max({std::abs(grad[k]), std::abs(num), 1e-6}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Networks, ZeroWeightsPredictHalfOfYMax) {
  nn::NetParams p;
  p.stem_channels = 4;
  p.residual_blocks = 2;
  CnnRegressor c{nn::make_residual_cnn({4, 8, 8}, p), 0.8};
  MlpRegressor m{Standardizer{std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)}, nn::make_mlp(5, p), 0.8};
  const Regressor cnn{c}, mlp{m};
  RandomStream r(16, "z");
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(cnn.predict(random_tensor({4, 8, 8}, r)), 0.4);
    const double f[5] = {r.normal(), r.normal(), r.normal(), r.normal(), r.normal()};
    EXPECT_DOUBLE_EQ(mlp.predict(std::span<const double>(f)), 0.4);
  }
}

TEST(Networks, DeepResidualConfigurationIsConstructible) {
  nn::NetParams p;
  p.residual_blocks = 16;
  p.stem_channels = 4;
  nn::Network net = nn::make_residual_cnn({4, 16, 16}, p);
  EXPECT_EQ(net.layer_count(), 2u + 16 + 3);
  RandomStream r(17, "deep");
  net.init(r);
  const double y = net.forward(random_tensor({4, 16, 16}, r)).data[0];
  EXPECT_GT(y, 0.0);
  EXPECT_LT(y, 1.0);
}

TEST(Networks, ShapeMismatchRejected) {
  nn::Network net(nn::Shape{3, 1, 1});
  EXPECT_THROW(net.add<nn::Dense>(std::size_t{4}, std::size_t{1}), DomainError);
  nn::Network ok = nn::make_mlp(3, nn::NetParams{});
  EXPECT_THROW(ok.forward(Tensor(4, 1, 1)), DomainError);
}

TEST(Networks, NonFiniteTargetsDivergeInFirstEpoch) {
  nn::Network net = nn::make_mlp(2, nn::NetParams{});
  std::vector<Tensor> xs(4, Tensor(2, 1, 1, 0.5));
  const std::vector<double> ys{0.1, NAN, 0.3, 0.2};
  try {
    nn::train_network(net, xs, ys, nn::NetParams{});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(Networks, InvalidParamsRejected) {
  nn::NetParams p;
  p.batch_size = 0;
  EXPECT_THROW(p.validate(), DomainError);
  p = {};
  p.learning_rate = 0;
  EXPECT_THROW(p.validate(), DomainError);
  p = {};
  p.y_max = -1;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST_F(GeneratedInputs, MlpLossTraceIsNonIncreasing) {
  ModelParams p;
  const TrainOutcome o = train_model(ModelKind::Mlp, data(135), p, 2);
  ASSERT_EQ(o.loss_trace.size(), 15u);
  const double jitter = 0.02 * o.loss_trace.front();
  for (std::size_t e = 1; e < o.loss_trace.size(); ++e) EXPECT_LE(o.loss_trace[e], o.loss_trace[e - 1] + jitter) << e;
  EXPECT_LT(o.loss_trace.back(), o.loss_trace.front());
}

TEST_F(GeneratedInputs, CnnLossTraceIsNonIncreasing) {
  ModelParams p;
  p.cnn.stem_channels = 4;
  p.cnn.residual_blocks = 2;
  const TrainOutcome o = train_model(ModelKind::Cnn, data(135), p, 2);
  ASSERT_EQ(o.loss_trace.size(), 15u);
  const double jitter = 0.02 * o.loss_trace.front();
  for (std::size_t e = 1; e < o.loss_trace.size(); ++e) EXPECT_LE(o.loss_trace[e], o.loss_trace[e - 1] + jitter) << e;
}

TEST_F(GeneratedInputs, SigmoidHeadsStayInsideRange) {
  ModelParams p = small_params();
  p.mlp.y_max = 0.9;
  p.cnn.y_max = 0.9;
  const auto d = data(40);
  for (ModelKind k : {ModelKind::Mlp, ModelKind::Cnn}) {
    const Regressor m = train_model(k, d, p).model;
    for (std::size_t i = 0; i < in_->targets.size(); ++i) {
      const double v = eval::predict_sample(m, *in_, i);
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 0.9);
    }
  }
}

TEST_F(GeneratedInputs, PredictionsFiniteAndNonNegative) {
  const auto d = data(60);
  for (ModelKind k : {ModelKind::Rfr, ModelKind::Svr}) {
    const Regressor m = train_model(k, d, small_params()).model;
    for (std::size_t i = 0; i < in_->targets.size(); ++i) {
      const double v = eval::predict_sample(m, *in_, i);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST_F(GeneratedInputs, BatchPredictEqualsSinglePredict) {
  const auto d = data(40);
  for (ModelKind k : {ModelKind::Rfr, ModelKind::Svr, ModelKind::Mlp, ModelKind::Cnn}) {
    const Regressor m = train_model(k, d, small_params()).model;
    const auto batch = uses_tensors(k) ? m.predict(std::span<const Tensor>(in_->tensors)) : m.predict(in_->features);
    for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(batch[i], eval::predict_sample(m, *in_, i));
  }
}

TEST_F(GeneratedInputs, ModalityMismatchRejected) {
  const auto d = data(20);
  const ModelParams p = small_params();
  const Regressor rfr = train_model(ModelKind::Rfr, d, p).model;
  const Regressor cnn = train_model(ModelKind::Cnn, d, p).model;
  EXPECT_THROW(rfr.predict(in_->tensors[0]), DomainError);
  EXPECT_THROW(cnn.predict(in_->features.row(0)), DomainError);
  EXPECT_THROW(rfr.predict(std::span<const double>(in_->features.row(0)).subspan(1)), DomainError);
}

TEST_F(GeneratedInputs, ModelContainerRoundTrips) {
  const auto d = data(40);
  agb::testing::TempDir tmp("cfmd");
  for (ModelKind k : {ModelKind::Rfr, ModelKind::Svr, ModelKind::Mlp, ModelKind::Cnn}) {
    const Regressor m = train_model(k, d, small_params()).model;
    const std::string bytes = encode_model(m);
    EXPECT_EQ(bytes.substr(0, 4), "CFMD");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(static_cast<int>(bytes[5]), static_cast<int>(k));
    const auto path = tmp.path() / (model_name(k) + ".cfmd");
    save_model(path, m);
    const Regressor back = load_model(path);
    EXPECT_EQ(back.kind(), k);
    EXPECT_EQ(encode_model(back), bytes);
    for (std::size_t i = 0; i < in_->targets.size(); i += 7)
      EXPECT_EQ(eval::predict_sample(back, *in_, i), eval::predict_sample(m, *in_, i));
  }
}

TEST_F(GeneratedInputs, ModelContainerRejectsCorruption) {
  const std::string bytes = encode_model(train_model(ModelKind::Rfr, data(20), small_params()).model);
  auto offset_of = [](const std::string& s) -> std::size_t {
    try {
      decode_model(s);
    } catch (const FormatError& e) {
      return e.offset();
    }
    return SIZE_MAX;
  };
  EXPECT_EQ(offset_of("XFMD" + bytes.substr(4)), 0u);
  std::string bad_kind = bytes;
  bad_kind[5] = 9;
  EXPECT_EQ(offset_of(bad_kind), 5u);
  EXPECT_NE(offset_of(bytes.substr(0, bytes.size() - 1)), SIZE_MAX);
  EXPECT_NE(offset_of(bytes + "x"), SIZE_MAX);
}

TEST_F(GeneratedInputs, TrainingIsThreadIndependent) {
  const auto d = data(48);
  for (ModelKind k : {ModelKind::Rfr, ModelKind::Svr, ModelKind::Mlp, ModelKind::Cnn}) {
    const auto a = train_model(k, d, small_params(), 1);
    const auto b = train_model(k, d, small_params(), 4);
    const auto c = train_model(k, d, small_params(), 1);
    EXPECT_EQ(encode_model(a.model), encode_model(b.model)) << model_name(k);
    EXPECT_EQ(encode_model(a.model), encode_model(c.model)) << model_name(k);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
  }
}

TEST(ModelNames, ParseAndReject) {
  EXPECT_EQ(parse_model_kind("cnn"), ModelKind::Cnn);
  const auto all = parse_model_list("rfr,svr,mlp,cnn");
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[1], ModelKind::Svr);
  EXPECT_THROW(parse_model_kind("resnet"), UsageError);
}
