#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/error.hpp"
#include "msrlab/stats.hpp"

namespace msrlab::turnover {

inline constexpr std::string_view kUnassigned = "unassigned";

class ModuleMap {
 public:
  ModuleMap() = default;
  explicit ModuleMap(std::vector<std::pair<std::string, std::string>> rules,
                     std::string unassigned = std::string(kUnassigned))
      : rules_(std::move(rules)), unassigned_(std::move(unassigned)) {
    for (const auto& [pattern, module] : rules_) {
      try {
        compiled_.emplace_back(pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw InvalidArgumentError("invalid module pattern '" + pattern + "': " + e.what());
      }
    }
  }

  // First matching pattern wins; unmatched paths go to the unassigned bucket.
  const std::string& module_of(const std::string& path) const {
    for (std::size_t i = 0; i < compiled_.size(); ++i)
      if (std::regex_search(path, compiled_[i], std::regex_constants::match_continuous)) return rules_[i].second;
    return unassigned_;
  }

  const std::string& unassigned() const noexcept { return unassigned_; }
  const std::vector<std::pair<std::string, std::string>>& rules() const noexcept { return rules_; }

  std::vector<std::string> modules() const {
    std::set<std::string> s;
    for (const auto& [p, m] : rules_) s.insert(m);
    return {s.begin(), s.end()};
  }

 private:
  std::vector<std::pair<std::string, std::string>> rules_;
  std::vector<std::regex> compiled_;
  std::string unassigned_ = std::string(kUnassigned);
};

// Ordered CSV with columns pattern,module.
inline ModuleMap read_module_map(const std::string& path) {
  auto t = csv::read_table(path);
  auto pc = t.column("pattern");
  auto mc = t.column("module");
  std::vector<std::pair<std::string, std::string>> rules;
  for (const auto& r : t.rows) rules.emplace_back(r.at(pc), r.at(mc));
  return ModuleMap(std::move(rules));
}

inline std::string map_file_to_module(const std::string& path, const ModuleMap& map) { return map.module_of(path); }

enum class Role { newcomer, leaver, stayer, absent };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::newcomer: return "newcomer";
    case Role::leaver: return "leaver";
    case Role::stayer: return "stayer";
    default: return "absent";
  }
}

inline Role role_of(bool active_before, bool active_after) {
  if (active_before && active_after) return Role::stayer;
  if (active_after) return Role::newcomer;
  if (active_before) return Role::leaver;
  return Role::absent;
}

struct TurnoverRecord {
  std::int64_t pair = 0;  // index t of the pair (t-1, t)
  std::string dev;
  std::string scope;      // "project" or "module:<name>"
  Role role = Role::absent;
};

// Activity sets per interval -> one record per (dev, pair) over the universe.
inline std::vector<TurnoverRecord> classify_turnover(const std::vector<std::set<std::string>>& active_per_interval,
                                                     const std::set<std::string>& universe,
                                                     const std::string& scope = "project") {
  std::vector<TurnoverRecord> out;
  for (std::size_t t = 1; t < active_per_interval.size(); ++t) {
    const auto& before = active_per_interval[t - 1];
    const auto& after = active_per_interval[t];
    for (const auto& dev : universe)
      out.push_back({static_cast<std::int64_t>(t), dev, scope, role_of(before.count(dev) > 0, after.count(dev) > 0)});
  }
  return out;
}

// One churn contribution: developer `dev` changed `churn` lines of `module`
// during interval `interval`.
struct Contribution {
  std::size_t interval = 0;
  std::string dev;
  std::string module;
  std::int64_t churn = 0;
};

struct GroupActivity {
  std::int64_t ena = 0;  // external newcomers
  std::int64_t ela = 0;  // external leavers
  std::int64_t ina = 0;  // external stayers that are internal newcomers
  std::int64_t ila = 0;  // external stayers that are internal leavers
  std::int64_t sta = 0;  // stayers at both scopes

  std::int64_t total() const noexcept { return ena + ela + ina + ila + sta; }
  GroupActivity& operator+=(const GroupActivity& o) {
    ena += o.ena;
    ela += o.ela;
    ina += o.ina;
    ila += o.ila;
    sta += o.sta;
    return *this;
  }
  std::int64_t get(const std::string& metric) const {
    if (metric == "ENA") return ena;
    if (metric == "ELA") return ela;
    if (metric == "INA") return ina;
    if (metric == "ILA") return ila;
    if (metric == "StA") return sta;
    throw InvalidArgumentError("unknown group metric '" + metric + "'");
  }
};

inline const std::vector<std::string>& group_metrics() {
  static const std::vector<std::string> m{"ENA", "ELA", "INA", "ILA", "StA"};
  return m;
}

// For every pair of consecutive intervals (t-1, t) inside one period, the
// churn a developer put into module m over both intervals is credited to
// exactly one group: by project-scope role for newcomers and leavers, by
// module-scope role for project stayers.
inline std::map<std::string, GroupActivity> group_activity(const std::vector<Contribution>& contributions,
                                                           std::size_t n_intervals) {
  std::vector<std::set<std::string>> external(n_intervals);
  std::vector<std::map<std::string, std::set<std::string>>> internal(n_intervals);
  std::vector<std::map<std::pair<std::string, std::string>, std::int64_t>> churn(n_intervals);
  for (const auto& c : contributions) {
    if (c.interval >= n_intervals) throw InvalidArgumentError("contribution outside the period's intervals");
    external[c.interval].insert(c.dev);
    internal[c.interval][c.module].insert(c.dev);
    churn[c.interval][{c.dev, c.module}] += c.churn;
  }
  std::map<std::string, GroupActivity> out;
  for (std::size_t t = 1; t < n_intervals; ++t) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_churn;
    for (auto k : {t - 1, t})
      for (const auto& [key, v] : churn[k]) pair_churn[key] += v;
    for (const auto& [key, v] : pair_churn) {
      const auto& [dev, module] = key;
      auto& g = out[module];
      auto ext = role_of(external[t - 1].count(dev) > 0, external[t].count(dev) > 0);
      if (ext == Role::newcomer) {
        g.ena += v;
      } else if (ext == Role::leaver) {
        g.ela += v;
      } else {
        auto in_before = internal[t - 1].count(module) && internal[t - 1].at(module).count(dev);
        auto in_after = internal[t].count(module) && internal[t].at(module).count(dev);
        auto inner = role_of(in_before, in_after);
        if (inner == Role::newcomer) g.ina += v;
        else if (inner == Role::leaver) g.ila += v;
        else g.sta += v;
      }
    }
  }
  return out;
}

// Share of developers that are newcomers or leavers among the non-absent
// project-scope records.
inline std::optional<double> turnover_share(const std::vector<TurnoverRecord>& records) {
  std::int64_t moving = 0, present = 0;
  for (const auto& r : records) {
    if (r.role == Role::absent) continue;
    ++present;
    if (r.role != Role::stayer) ++moving;
  }
  if (present == 0) return std::nullopt;
  return static_cast<double>(moving) / static_cast<double>(present);
}

// Bug-fix commits touching each module (a commit counts once per module).
inline std::map<std::string, std::int64_t> bugfix_counts(
    const std::map<std::string, std::set<std::string>>& modules_touched_by_commit,
    const std::set<std::string>& bugfixes) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [commit, modules] : modules_touched_by_commit) {
    if (!bugfixes.count(commit)) continue;
    for (const auto& m : modules) out[m] += 1;
  }
  return out;
}

inline std::map<std::string, double> bug_density(const std::map<std::string, std::int64_t>& bugfixes,
                                                 const std::map<std::string, std::int64_t>& loc) {
  std::map<std::string, double> out;
  for (const auto& [module, lines] : loc) {
    auto it = bugfixes.find(module);
    std::int64_t n = it == bugfixes.end() ? 0 : it->second;
    if (lines <= 0) {
      if (n > 0) throw InvalidArgumentError("module '" + module + "' has bug fixes but no lines of code");
      continue;
    }
    out[module] = static_cast<double>(n) / static_cast<double>(lines);
  }
  for (const auto& [module, n] : bugfixes)
    if (n > 0 && !loc.count(module))
      throw InvalidArgumentError("module '" + module + "' has bug fixes but no lines of code");
  return out;
}

// Plain text, one 40-hex hash per line; blank lines and '#' comments skipped.
inline std::set<std::string> read_bugfix_list(const std::string& path) {
  std::set<std::string> out;
  auto text = csv::read_file(path);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    std::string line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    line = b == std::string::npos ? "" : line.substr(b);
    if (!line.empty() && line[0] != '#') {
      bool hex = line.size() == 40 && line.find_first_not_of("0123456789abcdefABCDEF") == std::string::npos;
      if (!hex) throw ParseError("bug-fix list: not a 40-hex commit hash: '" + line + "'");
      for (auto& c : line) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.insert(line);
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return out;
}

inline std::map<std::string, std::int64_t> read_loc_table(const std::string& path) {
  auto t = csv::read_table(path);
  auto mc = t.column("module");
  auto lc = t.column("loc");
  std::map<std::string, std::int64_t> out;
  for (const auto& r : t.rows) {
    auto v = csv::to_int(r.at(lc));
    if (!v || *v < 0) throw ParseError("loc table: invalid line count '" + r.at(lc) + "'");
    out[r.at(mc)] = *v;
  }
  return out;
}

struct CorrelationResult {
  std::string metric;
  std::optional<stats::ConfidenceInterval> ci;
  std::string absent_reason;
  std::size_t modules = 0;

  std::string significance_label() const {
    return ci ? stats::to_string(stats::significance(*ci)) : "absent:" + absent_reason;
  }
};

// Spearman CI between one group activity and bug density across modules.
inline CorrelationResult turnover_quality_correlation(const std::string& metric,
                                                      const std::map<std::string, GroupActivity>& activity,
                                                      const std::map<std::string, double>& density, std::size_t B,
                                                      std::uint64_t seed, double level = 0.95, unsigned jobs = 1,
                                                      const std::string& unassigned = std::string(kUnassigned)) {
  CorrelationResult r;
  r.metric = metric;
  std::vector<double> x, y;
  for (const auto& [module, d] : density) {
    if (module == unassigned) continue;
    auto it = activity.find(module);
    x.push_back(it == activity.end() ? 0.0 : static_cast<double>(it->second.get(metric)));
    y.push_back(d);
  }
  r.modules = x.size();
  if (x.size() < 3) {
    r.absent_reason = "insufficient modules";
    return r;
  }
  try {
    r.ci = stats::bootstrap_ci(x, y, B, seed, level, stats::spearman, jobs);
  } catch (const UndefinedStatisticError&) {
    r.absent_reason = "undefined statistic";
  }
  return r;
}

struct ActivityRow {
  std::string project;
  std::string period;
  std::string module;
  GroupActivity activity;
  std::int64_t bugfixes = 0;
  std::int64_t loc = 0;
  std::optional<double> density;
};

inline std::string activity_csv(const std::vector<ActivityRow>& rows) {
  csv::Writer w({"project", "period", "module", "ENA", "ELA", "INA", "ILA", "StA", "bugfixes", "loc", "density"});
  for (const auto& r : rows)
    w.row({r.project, r.period, r.module, std::to_string(r.activity.ena), std::to_string(r.activity.ela),
           std::to_string(r.activity.ina), std::to_string(r.activity.ila), std::to_string(r.activity.sta),
           std::to_string(r.bugfixes), std::to_string(r.loc), r.density ? csv::format_double(*r.density) : ""});
  return w.str();
}

inline std::string ci_csv(const std::string& project, const std::vector<CorrelationResult>& results, std::size_t B,
                          std::uint64_t seed) {
  csv::Writer w({"project", "metric", "lo", "hi", "significance", "B", "seed"});
  for (const auto& r : results)
    w.row({project, r.metric, r.ci ? csv::format_double(r.ci->lo) : "", r.ci ? csv::format_double(r.ci->hi) : "",
           r.significance_label(), std::to_string(B), std::to_string(seed)});
  return w.str();
}

}  // namespace msrlab::turnover
