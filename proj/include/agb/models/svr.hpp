#pragma once

// epsilon-SVR trained by SMO on the 2l-variable dual with second-order
// working-set selection.
//
//   min_b  1/2 b'Qb + p'b   s.t.  z'b = 0,  0 <= b <= C
//   b = [alpha; alpha*],  z = [+1; -1],  p = [eps - y; eps + y],
//   Q_st = z_s z_t K(x_s mod l, x_t mod l)
//
// f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) - rho

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/models/matrix.hpp"

namespace agb::models {

enum class KernelKind : std::uint8_t { Rbf = 0, Linear = 1 };

struct SvrParams {
  KernelKind kernel = KernelKind::Rbf;
  double gamma = 0.0;  // RBF width; 0 selects 1 / n_features
  double C = 10.0;
  double epsilon = 0.01;
  double tol = 1e-3;
  long max_passes = 1'000'000;  // SMO iterations

  void validate() const {
    if (!(C > 0)) throw DomainError("SVR C must be positive");
    if (!(epsilon >= 0)) throw DomainError("SVR epsilon must be non-negative");
    if (!(tol > 0)) throw DomainError("SVR tol must be positive");
    if (!(gamma >= 0)) throw DomainError("SVR gamma must be non-negative");
    if (max_passes < 1) throw DomainError("SVR max_passes must be positive");
  }
};

struct Kernel {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const noexcept {
    double acc = 0.0;
    if (kind == KernelKind::Linear) {
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      return acc;
    }
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-gamma * acc);
  }
};

struct SvrModel {
  Kernel kernel;
  Matrix support;             // rows with non-zero coefficient
  std::vector<double> coef;   // alpha_i - alpha*_i
  double rho = 0.0;

  double decision(std::span<const double> x) const {
    if (x.size() != support.cols && support.rows > 0) throw DomainError("feature dimension does not match the SVR");
    double s = -rho;
    for (std::size_t i = 0; i < support.rows; ++i) s += coef[i] * kernel(support.row(i), x);
    return s;
  }
};

struct SvrFit {
  SvrModel model;
  std::vector<double> alpha;
  std::vector<double> alpha_star;
  long iterations = 0;
  double final_gap = 0.0;
};

inline SvrFit train_svr(const Matrix& x, std::span<const double> y, const SvrParams& p) {
  p.validate();
  check_training_set(x, y);
  const std::size_t l = x.rows;
  const std::size_t n = 2 * l;
  const double C = p.C;
  constexpr double kTau = 1e-12;

  Kernel kern{p.kernel, p.gamma > 0 ? p.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(1, x.cols))};
  std::vector<double> K(l * l);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = i; j < l; ++j) K[i * l + j] = K[j * l + i] = kern(x.row(i), x.row(j));

  auto sign = [l](std::size_t t) { return t < l ? 1.0 : -1.0; };
  auto Q = [&](std::size_t s, std::size_t t) { return sign(s) * sign(t) * K[(s % l) * l + (t % l)]; };

  std::vector<double> beta(n, 0.0), grad(n);
  for (std::size_t i = 0; i < l; ++i) {
    grad[i] = p.epsilon - y[i];
    grad[i + l] = p.epsilon + y[i];
  }
  auto at_upper = [&](std::size_t t) { return beta[t] >= C; };
  auto at_lower = [&](std::size_t t) { return beta[t] <= 0.0; };

  long iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (; iter < p.max_passes; ++iter) {
    // Maximal violating index i, then j by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t ii = -1, jj = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (sign(t) > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) { gmax = -grad[t]; ii = static_cast<std::ptrdiff_t>(t); }
      } else {
        if (!at_lower(t) && grad[t] >= gmax) { gmax = grad[t]; ii = static_cast<std::ptrdiff_t>(t); }
      }
    }
    double best_obj = std::numeric_limits<double>::infinity();
    if (ii >= 0) {
      const auto i = static_cast<std::size_t>(ii);
      const double zi = sign(i);
      for (std::size_t t = 0; t < n; ++t) {
        if (sign(t) > 0) {
          if (at_lower(t)) continue;
          const double diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (diff > 0) {
            double quad = Q(i, i) + Q(t, t) - 2.0 * zi * Q(i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best_obj) { best_obj = obj; jj = static_cast<std::ptrdiff_t>(t); }
          }
        } else {
          if (at_upper(t)) continue;
          const double diff = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
          if (diff > 0) {
            double quad = Q(i, i) + Q(t, t) + 2.0 * zi * Q(i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best_obj) { best_obj = obj; jj = static_cast<std::ptrdiff_t>(t); }
          }
        }
      }
    }
    gap = gmax + gmax2;
    if (ii < 0 || jj < 0 || gap < p.tol) break;

    const auto i = static_cast<std::size_t>(ii);
    const auto j = static_cast<std::size_t>(jj);
    const double old_i = beta[i], old_j = beta[j];
    if (sign(i) != sign(j)) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = beta[i] - beta[j];
      beta[i] += delta;
      beta[j] += delta;
      if (diff > 0) {
        if (beta[j] < 0) { beta[j] = 0; beta[i] = diff; }
      } else {
        if (beta[i] < 0) { beta[i] = 0; beta[j] = -diff; }
      }
      if (diff > 0) {
        if (beta[i] > C) { beta[i] = C; beta[j] = C - diff; }
      } else {
        if (beta[j] > C) { beta[j] = C; beta[i] = C + diff; }
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = beta[i] + beta[j];
      beta[i] -= delta;
      beta[j] += delta;
      if (sum > C) {
        if (beta[i] > C) { beta[i] = C; beta[j] = sum - C; }
      } else {
        if (beta[j] < 0) { beta[j] = 0; beta[i] = sum; }
      }
      if (sum > C) {
        if (beta[j] > C) { beta[j] = C; beta[i] = sum - C; }
      } else {
        if (beta[i] < 0) { beta[i] = 0; beta[j] = sum; }
      }
    }
    const double di = beta[i] - old_i, dj = beta[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += Q(i, t) * di + Q(j, t) * dj;
  }
  if (!(gap < p.tol) && iter >= p.max_passes)
    throw ConvergenceError("SVR did not converge within " + std::to_string(p.max_passes) +
                               " iterations; max KKT violation " + std::to_string(gap),
                           gap);

  // rho: mean of z*G over free variables, else the midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double zg = sign(t) * grad[t];
    if (at_upper(t)) {
      if (sign(t) < 0) ub = std::min(ub, zg); else lb = std::max(lb, zg);
    } else if (at_lower(t)) {
      if (sign(t) > 0) ub = std::min(ub, zg); else lb = std::max(lb, zg);
    } else {
      ++n_free;
      free_sum += zg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);

  SvrFit fit;
  fit.alpha.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(l));
  fit.alpha_star.assign(beta.begin() + static_cast<std::ptrdiff_t>(l), beta.end());
  fit.iterations = iter;
  fit.final_gap = gap;
  fit.model.kernel = kern;
  fit.model.rho = rho;
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < l; ++i)
    if (fit.alpha[i] - fit.alpha_star[i] != 0.0) sv.push_back(i);
  fit.model.support = Matrix(sv.size(), x.cols);
  for (std::size_t k = 0; k < sv.size(); ++k) {
    std::copy(x.row(sv[k]).begin(), x.row(sv[k]).end(), fit.model.support.row(k).begin());
    fit.model.coef.push_back(fit.alpha[sv[k]] - fit.alpha_star[sv[k]]);
  }
  return fit;
}

struct KktAudit {
  double max_violation = 0.0;
  std::size_t violations = 0;  // samples violating by more than tol
  bool passed(double tol) const noexcept { return max_violation <= tol; }
};

/// Re-derives every training residual from the fitted decision function and
/// checks the epsilon-insensitive KKT conditions of each multiplier pair.
inline KktAudit audit_kkt(const SvrFit& fit, const Matrix& x, std::span<const double> y, double C,
                          double epsilon, double tol) {
  KktAudit a;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double e = y[i] - fit.model.decision(x.row(i));
    double v = 0.0;
    const double al = fit.alpha[i], as = fit.alpha_star[i];
    if (al <= 0.0) v = std::max(v, e - epsilon);
    else if (al >= C) v = std::max(v, epsilon - e);
    else v = std::max(v, std::abs(e - epsilon));
    if (as <= 0.0) v = std::max(v, -epsilon - e);
    else if (as >= C) v = std::max(v, e + epsilon);
    else v = std::max(v, std::abs(e + epsilon));
    a.max_violation = std::max(a.max_violation, v);
    if (v > tol) ++a.violations;
  }
  return a;
}

}  // namespace agb::models
