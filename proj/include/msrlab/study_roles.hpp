#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/error.hpp"
#include "msrlab/gitio.hpp"
#include "msrlab/identity.hpp"
#include "msrlab/network.hpp"
#include "msrlab/stats.hpp"

namespace msrlab::roles {

enum class Metric { loc, commits, degree, evcent, hierarchy };

inline const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> m{Metric::loc, Metric::commits, Metric::degree, Metric::evcent, Metric::hierarchy};
  return m;
}

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::loc: return "loc";
    case Metric::commits: return "commits";
    case Metric::degree: return "degree";
    case Metric::evcent: return "evcent";
    default: return "hierarchy";
  }
}

inline Metric metric_from_string(const std::string& s) {
  for (auto m : all_metrics())
    if (to_string(m) == s) return m;
  throw InvalidArgumentError("unknown role metric '" + s + "'");
}

struct DevActivity {
  std::int64_t commit_count = 0;
  std::int64_t loc_churn = 0;
};

// Commits authored and churn of kept file changes per developer.
inline std::map<std::string, DevActivity> count_metrics(const std::vector<gitio::CommitRecord>& commits,
                                                        const std::vector<gitio::FileChange>& changes,
                                                        const identity::Resolver& resolver) {
  std::map<std::string, DevActivity> out;
  std::map<std::string, std::string> dev_of;
  for (const auto& c : commits) {
    const auto& dev = resolver.author_of(c);
    dev_of[c.hash] = dev;
    out[dev].commit_count += 1;
  }
  for (const auto& fc : changes) {
    auto it = dev_of.find(fc.commit);
    if (it != dev_of.end()) out[it->second].loc_churn += fc.churn();
  }
  return out;
}

struct RoleClassification {
  std::int64_t window = 0;
  Metric metric = Metric::commits;
  std::set<std::string> core;
  std::set<std::string> universe;

  bool is_core(const std::string& dev) const { return core.count(dev) > 0; }
};

// Core = shortest prefix of developers sorted by (value desc, id asc) whose
// cumulative value reaches threshold_fraction of the total.
inline RoleClassification classify_core(const std::map<std::string, double>& values, double threshold_fraction = 0.8,
                                        Metric metric = Metric::commits, std::int64_t window = 0) {
  if (!(threshold_fraction > 0 && threshold_fraction <= 1))
    throw InvalidArgumentError("threshold fraction must lie in (0, 1]");
  double total = 0;
  for (const auto& [dev, v] : values) {
    if (v < 0 || !std::isfinite(v)) throw InvalidArgumentError("metric values must be finite and non-negative");
    total += v;
  }
  if (total <= 0) throw UndefinedStatisticError("all metric values are zero");
  std::vector<std::pair<std::string, double>> order(values.begin(), values.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RoleClassification rc;
  rc.window = window;
  rc.metric = metric;
  for (const auto& [dev, v] : values) rc.universe.insert(dev);
  double target = threshold_fraction * total * (1 - 1e-12);
  double cumulative = 0;
  for (const auto& [dev, v] : order) {
    if (cumulative >= target) break;
    rc.core.insert(dev);
    cumulative += v;
  }
  return rc;
}

inline double metric_value(Metric m, const DevActivity* activity, const network::NodeMetrics* node) {
  switch (m) {
    case Metric::loc: return activity ? static_cast<double>(activity->loc_churn) : 0.0;
    case Metric::commits: return activity ? static_cast<double>(activity->commit_count) : 0.0;
    case Metric::degree: return node ? static_cast<double>(node->degree) : 0.0;
    case Metric::evcent: return node ? node->evcent : 0.0;
    default: return node ? node->hierarchy : 0.0;
  }
}

using WindowClassifications = std::map<Metric, std::optional<RoleClassification>>;

// One classification per metric over the window's active developers; a
// metric that is zero for everyone leaves its classification absent.
inline WindowClassifications classify_window(const std::map<std::string, DevActivity>& activity,
                                             const std::vector<network::NodeMetrics>& nodes,
                                             double threshold_fraction, std::int64_t window) {
  std::map<std::string, const network::NodeMetrics*> by_dev;
  for (const auto& n : nodes) by_dev[n.dev] = &n;
  WindowClassifications out;
  for (auto m : all_metrics()) {
    std::map<std::string, double> values;
    for (const auto& [dev, act] : activity) {
      auto it = by_dev.find(dev);
      values[dev] = metric_value(m, &act, it == by_dev.end() ? nullptr : it->second);
    }
    try {
      out[m] = classify_core(values, threshold_fraction, m, window);
    } catch (const UndefinedStatisticError&) {
      out[m] = std::nullopt;
    }
  }
  return out;
}

inline std::vector<int> core_labels(const RoleClassification& rc, const std::vector<std::string>& devs) {
  std::vector<int> out;
  out.reserve(devs.size());
  for (const auto& d : devs) out.push_back(rc.is_core(d) ? 1 : 0);
  return out;
}

struct AgreementCell {
  Metric a = Metric::loc;
  Metric b = Metric::loc;
  std::optional<double> mean_kappa;
  std::int64_t windows_used = 0;
  std::int64_t windows_skipped = 0;
};

// Mean kappa per metric pair over the windows in `span`. Windows where either
// classification is absent or kappa is undefined are skipped and counted.
inline std::vector<AgreementCell> agreement_matrix(const std::vector<WindowClassifications>& windows,
                                                   const std::vector<std::size_t>& span) {
  std::vector<AgreementCell> out;
  for (auto a : all_metrics()) {
    for (auto b : all_metrics()) {
      AgreementCell cell{a, b, std::nullopt, 0, 0};
      double sum = 0;
      for (auto w : span) {
        const auto& cls = windows.at(w);
        const auto& ca = cls.at(a);
        const auto& cb = cls.at(b);
        if (!ca || !cb) {
          ++cell.windows_skipped;
          continue;
        }
        std::vector<std::string> devs(ca->universe.begin(), ca->universe.end());
        try {
          sum += stats::cohen_kappa(core_labels(*ca, devs), core_labels(*cb, devs));
          ++cell.windows_used;
        } catch (const UndefinedStatisticError&) {
          ++cell.windows_skipped;
        }
      }
      if (cell.windows_used > 0) cell.mean_kappa = sum / static_cast<double>(cell.windows_used);
      out.push_back(cell);
    }
  }
  return out;
}

inline const AgreementCell& cell(const std::vector<AgreementCell>& cells, Metric a, Metric b) {
  for (const auto& c : cells)
    if (c.a == a && c.b == b) return c;
  throw InvalidArgumentError("no agreement cell for the metric pair");
}

struct HierarchyRow {
  std::int64_t window = 0;
  std::string dev;
  std::int64_t degree = 0;
  std::optional<double> clustering;
  bool core = false;
};

struct HierarchyEmbedding {
  std::vector<HierarchyRow> rows;
  std::optional<double> slope;  // OLS slope of log(clustering) on log(degree)
  std::size_t eligible = 0;
};

inline HierarchyEmbedding hierarchy_embedding(const std::vector<network::NodeMetrics>& nodes,
                                              const std::optional<RoleClassification>& roles, std::int64_t window) {
  HierarchyEmbedding h;
  std::vector<std::vector<double>> design;
  std::vector<double> y;
  for (const auto& n : nodes) {
    h.rows.push_back({window, n.dev, n.degree, n.clustering, roles && roles->is_core(n.dev)});
    if (n.degree >= 2 && n.clustering && *n.clustering > 0) {
      design.push_back({1.0, std::log(static_cast<double>(n.degree))});
      y.push_back(std::log(*n.clustering));
    }
  }
  h.eligible = y.size();
  if (y.size() < 3) return h;
  try {
    double my = stats::mean(y);
    bool flat_y = std::all_of(y.begin(), y.end(), [&](double v) { return std::abs(v - my) < 1e-12; });
    if (flat_y) return h;
    auto fit = stats::ols(design, y, {"(IC)", "log_degree"});
    h.slope = fit.term("log_degree").coefficient;
  } catch (const Error&) {
  }
  return h;
}

// Kappa of aligned core labels for developers matched by display name. Every
// entry of `variants` holds, per window index, the classification of one
// metric with developer ids already mapped to display names.
struct CrossAgreement {
  std::optional<double> kappa;
  std::size_t common_developers = 0;
  std::size_t labels = 0;
};

inline CrossAgreement cross_variant_agreement(const std::vector<std::optional<RoleClassification>>& a,
                                              const std::vector<std::optional<RoleClassification>>& b,
                                              const std::set<std::string>& universe_a,
                                              const std::set<std::string>& universe_b) {
  std::set<std::string> common;
  std::set_intersection(universe_a.begin(), universe_a.end(), universe_b.begin(), universe_b.end(),
                        std::inserter(common, common.begin()));
  CrossAgreement r;
  r.common_developers = common.size();
  if (common.empty()) throw InvalidArgumentError("cross-variant agreement: no common developers");
  std::vector<int> la, lb;
  for (std::size_t w = 0; w < std::min(a.size(), b.size()); ++w) {
    if (!a[w] || !b[w]) continue;
    for (const auto& dev : common) {
      if (!a[w]->universe.count(dev) || !b[w]->universe.count(dev)) continue;
      la.push_back(a[w]->is_core(dev) ? 1 : 0);
      lb.push_back(b[w]->is_core(dev) ? 1 : 0);
    }
  }
  r.labels = la.size();
  if (la.empty()) return r;
  try {
    r.kappa = stats::cohen_kappa(la, lb);
  } catch (const UndefinedStatisticError&) {
  }
  return r;
}

// Replaces developer ids by display names.
inline RoleClassification by_display_name(const RoleClassification& rc, const identity::Resolver& resolver) {
  RoleClassification out;
  out.window = rc.window;
  out.metric = rc.metric;
  for (const auto& d : rc.core) out.core.insert(resolver.display_name(d));
  for (const auto& d : rc.universe) out.universe.insert(resolver.display_name(d));
  return out;
}

inline std::string agreement_csv(const std::vector<AgreementCell>& cells) {
  csv::Writer w({"metric_a", "metric_b", "mean_kappa", "windows_used", "windows_skipped"});
  for (const auto& c : cells)
    w.row({to_string(c.a), to_string(c.b), c.mean_kappa ? csv::format_double(*c.mean_kappa) : "",
           std::to_string(c.windows_used), std::to_string(c.windows_skipped)});
  return w.str();
}

inline std::string hierarchy_csv(const std::vector<HierarchyRow>& rows) {
  csv::Writer w({"window", "dev", "degree", "clustering", "role"});
  for (const auto& r : rows)
    w.row({std::to_string(r.window), r.dev, std::to_string(r.degree),
           r.clustering ? csv::format_double(*r.clustering) : "", r.core ? "core" : "peripheral"});
  return w.str();
}

}  // namespace msrlab::roles
