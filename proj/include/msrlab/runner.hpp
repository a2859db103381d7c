#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msrlab/agreement.hpp"
#include "msrlab/config.hpp"
#include "msrlab/error.hpp"
#include "msrlab/pipeline.hpp"
#include "msrlab/report.hpp"
#include "msrlab/rng.hpp"
#include "msrlab/svg.hpp"

namespace msrlab::run {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class Command { extract, networks, roles, brooks, turnover, compare, report };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::extract: return "extract";
    case Command::networks: return "networks";
    case Command::roles: return "roles";
    case Command::brooks: return "brooks";
    case Command::turnover: return "turnover";
    case Command::compare: return "compare";
    default: return "report";
  }
}

struct Options {
  fs::path out = "out";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  pipeline::Logger log;
};

struct VariantStatus {
  std::string name;
  bool ok = true;
  std::string stage;
  std::string error;
  bool repository_error = false;
};

struct Summary {
  std::vector<VariantStatus> variants;
  int exit_code = 0;
};

inline json base_meta() {
  json m;
  m["tool"] = std::string(config::kToolVersion);
  m["rng"] = std::string(SplitMix64::name);
  return m;
}

inline json meta_for(const config::ProjectConfig& p, const config::VariantConfig& v) {
  auto m = base_meta();
  m["project"] = config::to_json(p);
  m["variant"] = config::to_json(v);
  return m;
}

inline json meta_for(const config::ProjectConfig& p, const std::vector<config::VariantConfig>& vs) {
  auto m = base_meta();
  m["project"] = config::to_json(p);
  m["variants"] = json::array();
  for (const auto& v : vs) m["variants"].push_back(config::to_json(v));
  return m;
}

// Writes artifacts under one root. CSV and markdown files get a sibling
// <name>.meta.json; SVG files carry the same document in <metadata>.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const noexcept { return root_; }

  void write(const fs::path& rel, const std::string& content, const json& meta) const {
    put(rel, content);
    put(fs::path(rel.string() + ".meta.json"), meta.dump(2) + "\n");
  }

  void write_svg(const fs::path& rel, svg::Chart chart, const json& meta) const {
    chart.metadata = meta.dump();
    put(rel, svg::render(chart));
  }

  void clear(const fs::path& rel) const {
    std::error_code ec;
    fs::remove_all(root_ / rel, ec);
  }

 private:
  void put(const fs::path& rel, const std::string& content) const {
    auto p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
  }

  fs::path root_;
};

// ---------------------------------------------------------------------------
// Charts

inline svg::Chart hierarchy_chart(const std::string& variant, const std::vector<roles::HierarchyRow>& rows) {
  svg::Chart c{"Hierarchy: " + variant, "log degree", "log clustering", "", {}};
  svg::Series core{"core", {}, {}}, peripheral{"peripheral", {}, {}};
  for (const auto& r : rows) {
    if (r.degree < 2 || !r.clustering || *r.clustering <= 0) continue;
    auto& s = r.core ? core : peripheral;
    s.x.push_back(std::log(static_cast<double>(r.degree)));
    s.y.push_back(std::log(*r.clustering));
  }
  c.layers.push_back({core, svg::Style::points});
  c.layers.push_back({peripheral, svg::Style::points});
  return c;
}

inline svg::Chart brooks_chart(const std::string& variant, const std::string& target,
                               const pipeline::BrooksResult& r, const config::BrooksConfig& cfg) {
  svg::Chart c{"Productivity vs team size: " + variant, "team size (transformed)", target + " per member (transformed)",
               "", {}};
  svg::Series obs{"windows", {}, {}};
  for (const auto& w : r.table) {
    auto x = brooks::model_value(w, "team_size", cfg.transforms);
    auto y = brooks::model_value(w, target, cfg.transforms);
    if (x && y) {
      obs.x.push_back(*x);
      obs.y.push_back(*y);
    }
  }
  c.layers.push_back({obs, svg::Style::points});
  if (obs.x.empty()) return c;
  double lo = *std::min_element(obs.x.begin(), obs.x.end());
  double hi = *std::max_element(obs.x.begin(), obs.x.end());
  for (const auto& m : r.models) {
    if (m.target != target || !m.controls.empty() || !m.fit) continue;
    const auto& fit = *m.fit;
    double b0 = fit.term("(IC)").coefficient, b1 = fit.term("TS").coefficient;
    double b2 = m.form == brooks::Form::quadratic ? fit.term("TS^2").coefficient : 0.0;
    c.layers.push_back({svg::curve(m.form_label(), lo, hi, [&](double x) { return b0 + b1 * x + b2 * x * x; }),
                        svg::Style::line});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Stages

namespace detail {

struct VariantState {
  const config::VariantConfig* cfg = nullptr;
  std::shared_ptr<const pipeline::VariantFacts> facts;
  VariantStatus status;
};

inline void fail(VariantState& s, const std::string& stage, const std::exception& e, const pipeline::Logger& log) {
  s.status.ok = false;
  s.status.stage = stage;
  s.status.error = e.what();
  s.status.repository_error = dynamic_cast<const RepositoryError*>(&e) != nullptr;
  if (log) log("variant '" + s.status.name + "' failed in stage '" + stage + "': " + e.what());
}

inline bool wants(Command cmd, Command stage, bool enabled) {
  if (cmd == stage) return true;
  return cmd == Command::compare && enabled;
}

inline void run_variant(pipeline::Workspace& ws, const Artifacts& art, const config::ProjectConfig& project,
                        const pipeline::Range& range, VariantState& s, Command cmd) {
  const auto& v = *s.cfg;
  const auto& f = *s.facts;
  auto meta = meta_for(project, v);
  auto jobs = ws.jobs();
  std::string stage = "extract";
  try {
    auto facts_dir = fs::path("facts") / v.name;
    art.clear(facts_dir);
    art.write(facts_dir / "commits.csv", gitio::commits_csv(f.stored->commits), meta);
    art.write(facts_dir / "file_changes.csv", gitio::file_changes_csv(f.stored->file_changes), meta);
    art.write(facts_dir / "identities.csv", identity::identities_csv(f.resolver->developers()), meta);
    art.write(facts_dir / "entity_changes.csv", entities::entity_changes_csv(*f.entity_changes), meta);
    auto wins = pipeline::make_windows(range, v.windows.length, v.windows.step);
    art.write(facts_dir / "windows.csv", windows::windows_csv(wins), meta);
    auto slices = pipeline::slice(f, wins);
    art.write(facts_dir / "baseline.csv", pipeline::baseline_csv(pipeline::baseline_counts(wins, slices)), meta);
    if (cmd == Command::extract) return;

    auto studies_dir = fs::path("studies") / v.name;
    std::vector<pipeline::WindowNetwork> nets;
    if (cmd == Command::networks || wants(cmd, Command::roles, v.studies.roles)) {
      stage = "networks";
      nets = pipeline::window_networks(f, slices, v.network, jobs);
      auto net_dir = fs::path("networks") / v.name;
      art.clear(net_dir);
      for (std::size_t w = 0; w < nets.size(); ++w)
        art.write(net_dir / ("edges_w" + std::to_string(w) + ".csv"), network::edges_csv(nets[w].net), meta);
      art.write(net_dir / "network_metrics.csv", pipeline::graph_metrics_csv(nets), meta);
    }
    if (wants(cmd, Command::roles, v.studies.roles)) {
      stage = "roles";
      auto r = pipeline::run_roles(f, v, wins, slices, nets);
      art.write(studies_dir / "roles_agreement.csv", roles::agreement_csv(r.recent), meta);
      art.write(studies_dir / "roles_agreement_all.csv", roles::agreement_csv(r.all), meta);
      art.write(studies_dir / "roles_core.csv", pipeline::roles_core_csv(r, *f.resolver), meta);
      art.write(studies_dir / "hierarchy.csv", roles::hierarchy_csv(r.hierarchy), meta);
      art.write(studies_dir / "hierarchy_slopes.csv", pipeline::hierarchy_slopes_csv(r), meta);
      art.write_svg(studies_dir / "hierarchy.svg", hierarchy_chart(v.name, r.hierarchy), meta);
    }
    if (wants(cmd, Command::brooks, v.studies.brooks)) {
      stage = "brooks";
      auto r = pipeline::run_brooks(ws, f, v, range);
      art.write(studies_dir / "brooks_metrics.csv", brooks::metrics_csv(r.table), meta);
      art.write(studies_dir / "brooks_models.csv", brooks::models_csv(r.models), meta);
      if (r.correlation) art.write(studies_dir / "brooks_correlation.csv", brooks::correlation_csv(*r.correlation), meta);
      for (const std::string target : {"commits", "delta_functions", "halstead_effort"})
        art.write_svg(studies_dir / ("brooks_" + target + ".svg"), brooks_chart(v.name, target, r, v.brooks), meta);
    }
    if (wants(cmd, Command::turnover, v.studies.turnover)) {
      stage = "turnover";
      auto tf = ws.facts(v, v.turnover.branch_mode);
      auto r = pipeline::run_turnover(ws, *tf, v, range);
      art.write(studies_dir / "turnover_activity.csv", turnover::activity_csv(r.rows), meta);
      art.write(studies_dir / "turnover_ci.csv",
                turnover::ci_csv(project.name, r.results, v.turnover.resamples, v.seed), meta);
      csv::Writer w({"key", "value"});
      w.row({"turnover_share", r.share ? csv::format_double(*r.share) : ""});
      w.row({"periods", std::to_string(r.periods.size())});
      w.row({"loc_source", r.loc_source});
      w.row({"module_source", r.module_source});
      art.write(studies_dir / "turnover_summary.csv", w.str(), meta);
    }
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline void run_compare(const Artifacts& art, const config::Config& cfg, const std::vector<VariantState>& states,
                        const pipeline::Logger& log) {
  std::vector<config::VariantConfig> ok;
  for (const auto& s : states)
    if (s.status.ok) ok.push_back(*s.cfg);
  auto meta = meta_for(cfg.project, ok);
  art.clear("compare");

  std::vector<std::string> names;
  std::vector<agreement::StudyOutputs> outputs;
  std::vector<agreement::Series> series;
  std::vector<std::vector<std::int64_t>> starts;
  for (const auto& v : ok) {
    names.push_back(v.name);
    outputs.push_back(report::read_study_outputs(art.root(), v.name));
    series.push_back(outputs.back().baseline);
    starts.push_back(report::window_starts(art.root(), v.name));
  }

  try {
    auto points = agreement::baseline_series(names, series, starts);
    csv::Writer w({"variant", "window", "metric", "value", "absent"});
    for (const auto& p : points)
      w.row({p.variant, std::to_string(p.window), p.metric, std::to_string(p.value), p.absent ? "1" : "0"});
    art.write("compare/baseline.csv", w.str(), meta);
  } catch (const InvalidArgumentError& e) {
    if (log) log(std::string("baseline series not aligned: ") + e.what());
    for (auto& o : outputs) o.baseline.clear();
  }
  for (const auto& metric : agreement::baseline_metrics()) {
    svg::Chart c{"Per-window " + metric, "window", metric, "", {}};
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      svg::Series s{names[i], {}, {}};
      if (auto it = outputs[i].baseline.find(metric); it != outputs[i].baseline.end())
        for (std::size_t w = 0; w < it->second.size(); ++w) {
          s.x.push_back(static_cast<double>(w));
          s.y.push_back(static_cast<double>(it->second[w]));
        }
      c.layers.push_back({s, svg::Style::line});
    }
    art.write_svg("compare/baseline_" + metric + ".svg", c, meta);
  }

  std::vector<agreement::AgreementVerdict> verdicts;
  for (std::size_t i = 0; i < ok.size(); ++i)
    for (std::size_t j = i + 1; j < ok.size(); ++j) {
      auto v = agreement::conclusion_report(outputs[i], outputs[j], config::differing_keys(ok[i], ok[j]),
                                            cfg.project.trend_k);
      verdicts.insert(verdicts.end(), v.begin(), v.end());
    }
  art.write("compare/verdicts.csv", agreement::verdicts_csv(verdicts), meta);

  // Same-metric role agreement across variants, matching developers by display name.
  using PerWindow = std::vector<std::optional<roles::RoleClassification>>;
  auto load_roles = [&](const std::string& variant) {
    std::map<roles::Metric, PerWindow> out;
    std::set<std::string> universe;
    auto t = report::try_table(art.root() / "studies" / variant / "roles_core.csv");
    if (!t) return std::make_pair(out, universe);
    std::size_t n = report::window_starts(art.root(), variant).size();
    for (auto m : roles::all_metrics()) out[m].assign(n, std::nullopt);
    for (const auto& row : t->rows) {
      auto w = static_cast<std::size_t>(*csv::to_int(report::cell(*t, row, "window")));
      auto m = roles::metric_from_string(report::cell(*t, row, "metric"));
      auto& slot = out[m].at(w);
      if (!slot) slot = roles::RoleClassification{static_cast<std::int64_t>(w), m, {}, {}};
      const auto& dev = report::cell(*t, row, "developer");
      slot->universe.insert(dev);
      universe.insert(dev);
      if (report::cell(*t, row, "role") == "core") slot->core.insert(dev);
    }
    return std::make_pair(out, universe);
  };
  csv::Writer cross({"variant_a", "variant_b", "metric", "kappa", "common_developers", "labels"});
  std::vector<std::pair<std::map<roles::Metric, PerWindow>, std::set<std::string>>> loaded;
  for (const auto& n : names) loaded.push_back(load_roles(n));
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      if (loaded[i].first.empty() || loaded[j].first.empty()) continue;
      for (auto m : roles::all_metrics()) {
        roles::CrossAgreement ca;
        try {
          ca = roles::cross_variant_agreement(loaded[i].first.at(m), loaded[j].first.at(m), loaded[i].second,
                                              loaded[j].second);
        } catch (const InvalidArgumentError&) {
        }
        cross.row({names[i], names[j], roles::to_string(m), ca.kappa ? csv::format_double(*ca.kappa) : "",
                   std::to_string(ca.common_developers), std::to_string(ca.labels)});
      }
    }
  art.write("compare/roles_cross_variant.csv", cross.str(), meta);
}

}  // namespace detail

inline void write_report(const Artifacts& art, const config::Config& cfg, const std::vector<std::string>& variants) {
  std::vector<config::VariantConfig> vs;
  for (const auto& v : cfg.variants)
    if (std::find(variants.begin(), variants.end(), v.name) != variants.end()) vs.push_back(v);
  art.write("report.md", report::render(art.root(), cfg, variants), meta_for(cfg.project, vs));
}

// Runs `cmd` for every variant of `cfg`. Repository-level failures before any
// variant starts propagate; failures inside a variant are recorded and the
// remaining variants still run.
inline Summary run(config::Config cfg, Command cmd, const Options& opts) {
  if (opts.seed)
    for (auto& v : cfg.variants) v.seed = *opts.seed;
  Artifacts art(opts.out);
  Summary summary;

  if (cmd == Command::report) {
    std::vector<std::string> names;
    for (const auto& v : cfg.variants) names.push_back(v.name);
    write_report(art, cfg, names);
    return summary;
  }

  pipeline::Workspace ws(cfg.project, opts.jobs, opts.log);
  ws.repo();

  std::vector<detail::VariantState> states;
  for (const auto& v : cfg.variants) {
    detail::VariantState s;
    s.cfg = &v;
    s.status.name = v.name;
    try {
      s.facts = ws.facts(v);
    } catch (const std::exception& e) {
      detail::fail(s, "extract", e, opts.log);
    }
    states.push_back(std::move(s));
  }
  std::vector<std::shared_ptr<const pipeline::VariantFacts>> ok_facts;
  for (const auto& s : states)
    if (s.status.ok) ok_facts.push_back(s.facts);
  auto range = pipeline::common_range(cfg.project, ok_facts);

  for (auto& s : states) {
    if (!s.status.ok) continue;
    try {
      detail::run_variant(ws, art, cfg.project, range, s, cmd);
    } catch (const StageError& e) {
      detail::fail(s, e.stage(), e, opts.log);
    }
  }

  if (cmd == Command::compare) {
    detail::run_compare(art, cfg, states, opts.log);
    std::vector<std::string> names;
    for (const auto& s : states)
      if (s.status.ok) names.push_back(s.status.name);
    write_report(art, cfg, names);
  }

  bool any_ok = false, all_repo = true;
  for (const auto& s : states) {
    summary.variants.push_back(s.status);
    if (s.status.ok) any_ok = true;
    else if (!s.status.repository_error) all_repo = false;
  }
  if (!any_ok && !states.empty() && all_repo) summary.exit_code = 3;
  else if (std::any_of(states.begin(), states.end(), [](const auto& s) { return !s.status.ok; })) summary.exit_code = 1;
  return summary;
}

}  // namespace msrlab::run
