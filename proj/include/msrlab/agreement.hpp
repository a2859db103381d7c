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
#include "msrlab/stats.hpp"

namespace msrlab::agreement {

enum class Subject { baseline_counts, role_classification, brooks_sign, turnover_significance };
enum class Verdict { agree, differ, conflict };
enum class Trend { up, down, flat };

inline std::string to_string(Subject s) {
  switch (s) {
    case Subject::baseline_counts: return "baseline_counts";
    case Subject::role_classification: return "role_classification";
    case Subject::brooks_sign: return "brooks_sign";
    default: return "turnover_significance";
  }
}
inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::agree: return "agree";
    case Verdict::differ: return "differ";
    default: return "conflict";
  }
}
inline std::string to_string(Trend t) {
  switch (t) {
    case Trend::up: return "up";
    case Trend::down: return "down";
    default: return "flat";
  }
}

// ---------------------------------------------------------------------------
// Baseline series

inline const std::vector<std::string>& baseline_metrics() {
  static const std::vector<std::string> m{"commits", "files", "developers", "entities"};
  return m;
}

struct BaselinePoint {
  std::string variant;
  std::int64_t window = 0;
  std::string metric;
  std::int64_t value = 0;
  bool absent = false;
};

// Per-window counts of one variant, keyed by metric.
using Series = std::map<std::string, std::vector<std::int64_t>>;

// Long-format table aligned on window index. Variants with fewer windows
// get zero-valued rows flagged absent; differing window starts are an error.
inline std::vector<BaselinePoint> baseline_series(const std::vector<std::string>& variants,
                                                  const std::vector<Series>& series,
                                                  const std::vector<std::vector<std::int64_t>>& window_starts) {
  if (variants.size() != series.size() || variants.size() != window_starts.size())
    throw InvalidArgumentError("baseline_series: inconsistent inputs");
  std::size_t n = 0;
  for (const auto& ws : window_starts) n = std::max(n, ws.size());
  for (std::size_t i = 0; i < window_starts.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      auto m = std::min(window_starts[i].size(), window_starts[j].size());
      if (!std::equal(window_starts[i].begin(), window_starts[i].begin() + static_cast<std::ptrdiff_t>(m),
                      window_starts[j].begin()))
        throw InvalidArgumentError("baseline_series: variants '" + variants[j] + "' and '" + variants[i] +
                                   "' use misaligned windows");
    }
  std::vector<BaselinePoint> out;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (const auto& metric : baseline_metrics()) {
      const auto& vals = series[v].count(metric) ? series[v].at(metric) : std::vector<std::int64_t>{};
      for (std::size_t w = 0; w < n; ++w) {
        bool present = w < vals.size() && w < window_starts[v].size();
        out.push_back({variants[v], static_cast<std::int64_t>(w), metric, present ? vals[w] : 0, !present});
      }
    }
  return out;
}

// Sign of the least-squares slope over the trailing k points; flat when
// |slope| < epsilon * |mean|.
inline Trend trend_direction(const std::vector<double>& series, std::size_t k, double epsilon = 0.01) {
  if (k < 3) throw InvalidArgumentError("trend_direction: k must be at least 3");
  if (series.size() < k) throw InvalidArgumentError("trend_direction: fewer than k windows");
  std::vector<double> tail(series.end() - static_cast<std::ptrdiff_t>(k), series.end());
  double mean_y = stats::mean(tail);
  double mean_x = static_cast<double>(k - 1) / 2.0;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (tail[i] - mean_y);
    sxx += dx * dx;
  }
  double slope = sxy / sxx;
  if (std::abs(slope) < epsilon * std::abs(mean_y) || slope == 0) return Trend::flat;
  return slope > 0 ? Trend::up : Trend::down;
}

// ---------------------------------------------------------------------------
// Verdicts

struct AgreementVerdict {
  Subject subject = Subject::baseline_counts;
  std::string variant_a;
  std::string variant_b;
  std::string item;  // metric, metric pair, or target|form
  Verdict verdict = Verdict::agree;
  std::string detail;
  std::vector<std::string> provenance;  // differing configuration keys
};

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : "absent"; }

inline Verdict baseline_verdict(const std::vector<double>& a, const std::vector<double>& b, std::size_t k,
                                std::string& detail) {
  if (a == b) {
    detail = "identical series";
    return Verdict::agree;
  }
  if (a.size() < k || b.size() < k) {
    detail = "series differ; fewer than " + std::to_string(k) + " windows for a trend";
    return Verdict::differ;
  }
  auto ta = trend_direction(a, k), tb = trend_direction(b, k);
  detail = "trend " + to_string(ta) + " vs " + to_string(tb);
  bool opposite = (ta == Trend::up && tb == Trend::down) || (ta == Trend::down && tb == Trend::up);
  return opposite ? Verdict::conflict : Verdict::differ;
}

inline Verdict kappa_verdict(const std::optional<double>& a, const std::optional<double>& b, std::string& detail) {
  detail = "kappa " + opt(a) + " vs " + opt(b);
  if (!a && !b) return Verdict::agree;
  if (!a || !b) return Verdict::differ;
  auto ba = static_cast<int>(stats::kappa_band(*a)), bb = static_cast<int>(stats::kappa_band(*b));
  detail += " (" + stats::to_string(stats::kappa_band(*a)) + " vs " + stats::to_string(stats::kappa_band(*b)) + ")";
  int delta = std::abs(ba - bb);
  if (delta == 0) return Verdict::agree;
  return delta == 1 ? Verdict::differ : Verdict::conflict;
}

inline int sign(double v) { return (v > 0) - (v < 0); }

inline Verdict sign_verdict(const std::optional<double>& a, const std::optional<double>& b, std::string& detail) {
  detail = "TS coefficient " + opt(a) + " vs " + opt(b);
  if (!a && !b) return Verdict::agree;
  if (!a || !b) return Verdict::differ;
  return sign(*a) == sign(*b) ? Verdict::agree : Verdict::conflict;
}

inline bool is_absent_label(const std::string& s) { return s.rfind("absent", 0) == 0; }

inline Verdict significance_verdict(const std::string& a, const std::string& b, std::string& detail) {
  detail = "significance " + a + " vs " + b;
  if (a == b) return Verdict::agree;
  if (is_absent_label(a) || is_absent_label(b)) return Verdict::differ;
  return Verdict::conflict;
}

// Study outputs of one variant, as read back from its CSV tables.
struct StudyOutputs {
  std::string variant;
  Series baseline;
  std::map<std::string, std::optional<double>> role_kappa;     // "a|b" -> mean kappa
  std::map<std::string, std::optional<double>> brooks_ts;      // "target|form" -> TS coefficient
  std::map<std::string, std::string> turnover_significance;    // metric -> label
  bool has_roles = false;
  bool has_brooks = false;
  bool has_turnover = false;
};

template <typename V>
std::set<std::string> keys_of(const std::map<std::string, V>& a, const std::map<std::string, V>& b) {
  std::set<std::string> k;
  for (const auto& [key, v] : a) k.insert(key);
  for (const auto& [key, v] : b) k.insert(key);
  return k;
}

// Verdicts for one variant pair. Every verdict carries the configuration
// keys on which the two variants differ.
inline std::vector<AgreementVerdict> conclusion_report(const StudyOutputs& a, const StudyOutputs& b,
                                                       const std::vector<std::string>& differing_keys,
                                                       std::size_t trend_k = 3) {
  std::vector<AgreementVerdict> out;
  auto add = [&](Subject s, const std::string& item, Verdict v, const std::string& detail) {
    out.push_back({s, a.variant, b.variant, item, v, detail, differing_keys});
  };
  for (const auto& metric : baseline_metrics()) {
    auto to_d = [](const Series& s, const std::string& m) {
      std::vector<double> v;
      if (auto it = s.find(m); it != s.end())
        for (auto x : it->second) v.push_back(static_cast<double>(x));
      return v;
    };
    std::string detail;
    auto v = baseline_verdict(to_d(a.baseline, metric), to_d(b.baseline, metric), trend_k, detail);
    add(Subject::baseline_counts, metric, v, detail);
  }
  if (a.has_roles && b.has_roles) {
    for (const auto& key : keys_of(a.role_kappa, b.role_kappa)) {
      auto ia = a.role_kappa.find(key), ib = b.role_kappa.find(key);
      std::string detail;
      auto v = kappa_verdict(ia == a.role_kappa.end() ? std::nullopt : ia->second,
                             ib == b.role_kappa.end() ? std::nullopt : ib->second, detail);
      add(Subject::role_classification, key, v, detail);
    }
  }
  if (a.has_brooks && b.has_brooks) {
    for (const auto& key : keys_of(a.brooks_ts, b.brooks_ts)) {
      auto ia = a.brooks_ts.find(key), ib = b.brooks_ts.find(key);
      std::string detail;
      auto v = sign_verdict(ia == a.brooks_ts.end() ? std::nullopt : ia->second,
                            ib == b.brooks_ts.end() ? std::nullopt : ib->second, detail);
      add(Subject::brooks_sign, key, v, detail);
    }
  }
  if (a.has_turnover && b.has_turnover) {
    for (const auto& key : keys_of(a.turnover_significance, b.turnover_significance)) {
      auto ia = a.turnover_significance.find(key), ib = b.turnover_significance.find(key);
      std::string detail;
      auto v = significance_verdict(ia == a.turnover_significance.end() ? "absent:missing" : ia->second,
                                    ib == b.turnover_significance.end() ? "absent:missing" : ib->second, detail);
      add(Subject::turnover_significance, key, v, detail);
    }
  }
  return out;
}

inline std::string verdicts_csv(const std::vector<AgreementVerdict>& verdicts) {
  csv::Writer w({"subject", "variant_a", "variant_b", "verdict", "detail"});
  for (const auto& v : verdicts) {
    std::string detail = v.item + ": " + v.detail;
    if (v.verdict != Verdict::agree)
      detail += "; flags: " + (v.provenance.empty() ? std::string("none") : join(v.provenance, " "));
    w.row({to_string(v.subject), v.variant_a, v.variant_b, to_string(v.verdict), detail});
  }
  return w.str();
}

inline std::size_t count(const std::vector<AgreementVerdict>& verdicts, Verdict kind) {
  return static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [&](const auto& v) { return v.verdict == kind; }));
}

}  // namespace msrlab::agreement
