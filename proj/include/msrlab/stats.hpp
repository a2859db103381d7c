#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "msrlab/error.hpp"
#include "msrlab/parallel.hpp"
#include "msrlab/rng.hpp"

namespace msrlab::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw InvalidArgumentError("mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgumentError("pearson: length mismatch");
  if (x.size() < 2) throw InvalidArgumentError("pearson: need at least 2 observations");
  double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedStatisticError("pearson: constant input");
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgumentError("spearman: length mismatch");
  return pearson(average_ranks(x), average_ranks(y));
}

template <typename Label>
double cohen_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  if (a.size() != b.size()) throw InvalidArgumentError("cohen_kappa: length mismatch");
  if (a.empty()) throw InvalidArgumentError("cohen_kappa: empty input");
  auto n = static_cast<double>(a.size());
  std::map<Label, double> fa, fb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    fa[a[i]] += 1;
    fb[b[i]] += 1;
    if (a[i] == b[i]) agree += 1;
  }
  double po = agree / n;
  double pe = 0;
  for (const auto& [label, count] : fa) {
    auto it = fb.find(label);
    if (it != fb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0) throw UndefinedStatisticError("cohen_kappa: expected agreement is 1");
  return (po - pe) / (1.0 - pe);
}

enum class KappaBand { poor, slight, fair, moderate, substantial, almost_perfect };

inline KappaBand kappa_band(double kappa) {
  if (kappa < 0) return KappaBand::poor;
  if (kappa <= 0.20) return KappaBand::slight;
  if (kappa <= 0.40) return KappaBand::fair;
  if (kappa <= 0.60) return KappaBand::moderate;
  if (kappa <= 0.80) return KappaBand::substantial;
  return KappaBand::almost_perfect;
}

inline std::string to_string(KappaBand b) {
  switch (b) {
    case KappaBand::poor: return "poor";
    case KappaBand::slight: return "slight";
    case KappaBand::fair: return "fair";
    case KappaBand::moderate: return "moderate";
    case KappaBand::substantial: return "substantial";
    default: return "almost perfect";
  }
}

// ---------------------------------------------------------------------------
// Ordinary least squares

struct Term {
  std::string name;
  double coefficient = 0;
  double standard_error = 0;
};

struct ModelFit {
  std::vector<Term> terms;
  double r2 = 0;
  double adj_r2 = 0;
  std::size_t n = 0;
  std::vector<double> fitted;
  std::vector<double> residuals;

  const Term& term(const std::string& name) const {
    for (const auto& t : terms)
      if (t.name == name) return t;
    throw InvalidArgumentError("model has no term '" + name + "'");
  }
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

// design: n rows, one column per term (include the intercept column yourself).
inline ModelFit ols(const std::vector<std::vector<double>>& design, const std::vector<double>& y,
                    const std::vector<std::string>& term_names) {
  const std::size_t n = design.size();
  const std::size_t p = term_names.size();
  if (y.size() != n) throw InvalidArgumentError("ols: response length mismatch");
  if (n <= p) throw InvalidArgumentError("ols: need more observations than terms");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (design[i].size() != p) throw InvalidArgumentError("ols: ragged design matrix");
    for (std::size_t j = 0; j < p; ++j) X(i, j) = design[i][j];
    Y(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < static_cast<Eigen::Index>(p)) throw RankDeficientError("ols: design matrix is rank deficient");
  Eigen::VectorXd beta = qr.solve(Y);
  Eigen::VectorXd fitted = X * beta;
  Eigen::VectorXd resid = Y - fitted;

  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
  Eigen::MatrixXd P = qr.colsPermutation();
  Eigen::MatrixXd cov = P * cov_perm * P.transpose();

  double rss = resid.squaredNorm();
  double sigma2 = rss / static_cast<double>(n - p);
  double ybar = Y.mean();
  double tss = (Y.array() - ybar).square().sum();

  ModelFit fit;
  fit.n = n;
  for (std::size_t j = 0; j < p; ++j)
    fit.terms.push_back({term_names[j], beta(j), std::sqrt(std::max(0.0, sigma2 * cov(j, j)))});
  fit.r2 = tss > 0 ? 1.0 - rss / tss : std::nan("");
  fit.adj_r2 = tss > 0 ? 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) / static_cast<double>(n - p)
                       : std::nan("");
  fit.fitted.assign(fitted.data(), fitted.data() + n);
  fit.residuals.assign(resid.data(), resid.data() + n);
  return fit;
}

// ---------------------------------------------------------------------------
// Bootstrap

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InvalidArgumentError("quantile of empty sample");
  double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ConfidenceInterval {
  double lo = 0;
  double hi = 0;
  double level = 0.95;
  std::size_t b_resamples = 0;
  std::size_t skipped = 0;
  std::uint64_t seed = 0;
  std::string rng = std::string(SplitMix64::name);
};

using Statistic = double (*)(const std::vector<double>&, const std::vector<double>&);

// Percentile bootstrap over paired observations. Resample b draws its indices
// from stream_for(seed, b), so the interval does not depend on `jobs`.
inline ConfidenceInterval bootstrap_ci(const std::vector<double>& x, const std::vector<double>& y, std::size_t B,
                                       std::uint64_t seed, double level = 0.95, Statistic statistic = spearman,
                                       unsigned jobs = 1) {
  if (x.size() != y.size()) throw InvalidArgumentError("bootstrap: length mismatch");
  if (B < 1) throw InvalidArgumentError("bootstrap: need at least one resample");
  if (x.size() < 3) throw InvalidArgumentError("bootstrap: need at least 3 pairs");
  if (!(level > 0 && level < 1)) throw InvalidArgumentError("bootstrap: level must lie in (0, 1)");
  const std::size_t n = x.size();
  std::vector<std::optional<double>> values(B);
  parallel_for(B, jobs, [&](std::size_t b) {
    auto rng = stream_for(seed, b);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto k = rng.below(n);
      xs[i] = x[k];
      ys[i] = y[k];
    }
    try {
      values[b] = statistic(xs, ys);
    } catch (const UndefinedStatisticError&) {
    }
  });
  std::vector<double> defined;
  for (const auto& v : values)
    if (v) defined.push_back(*v);
  if (defined.empty()) throw UndefinedStatisticError("bootstrap: statistic undefined on every resample");
  std::sort(defined.begin(), defined.end());
  double alpha = 1.0 - level;
  ConfidenceInterval ci;
  ci.lo = quantile_sorted(defined, alpha / 2);
  ci.hi = quantile_sorted(defined, 1 - alpha / 2);
  ci.level = level;
  ci.b_resamples = B;
  ci.skipped = B - defined.size();
  ci.seed = seed;
  return ci;
}

enum class Significance { positive, negative, none };

inline Significance significance(const ConfidenceInterval& ci) {
  if (ci.lo > ci.hi) throw InvalidArgumentError("significance: interval lo exceeds hi");
  if (ci.lo > 0) return Significance::positive;
  if (ci.hi < 0) return Significance::negative;
  return Significance::none;
}

inline std::string to_string(Significance s) {
  switch (s) {
    case Significance::positive: return "positive";
    case Significance::negative: return "negative";
    default: return "none";
  }
}

}  // namespace msrlab::stats
