#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msrlab/config.hpp"
#include "msrlab/entities.hpp"
#include "msrlab/error.hpp"
#include "msrlab/gitio.hpp"
#include "msrlab/identity.hpp"
#include "msrlab/network.hpp"
#include "msrlab/parallel.hpp"
#include "msrlab/study_brooks.hpp"
#include "msrlab/study_roles.hpp"
#include "msrlab/study_turnover.hpp"
#include "msrlab/windows.hpp"

namespace msrlab::pipeline {

using Logger = std::function<void(const std::string&)>;

// Fact tables of one variant under one traversal.
struct VariantFacts {
  std::shared_ptr<const gitio::ExtractedHistory> raw;
  std::shared_ptr<const gitio::ExtractedHistory> stored;
  std::vector<gitio::FileChange> analysis_changes;  // stored rows kept by the filters
  std::shared_ptr<const identity::Resolver> resolver;
  std::vector<std::string> author;   // per stored commit
  std::vector<std::int64_t> time;    // per stored commit, the windowing timestamp
  std::map<std::string, std::size_t> position;  // hash -> stored commit index
  std::shared_ptr<const std::vector<entities::EntityChange>> entity_changes;  // commit order
  std::shared_ptr<const std::vector<network::LineModification>> line_mods;    // commit order
};

inline std::vector<entities::EntityChange> commit_entity_changes(const gitio::Repository& repo,
                                                                 const gitio::CommitRecord& c, const std::string& dev,
                                                                 const gitio::FileFilter& filter,
                                                                 const entities::MappingOptions& opts) {
  std::vector<entities::EntityChange> out;
  auto diffs = repo.diff_hunks(c);
  for (const auto& d : *diffs) {
    if (d.is_binary || !filter.keeps_path(d.path)) continue;
    auto lines = entities::changed_lines(d);
    if (lines.empty()) continue;
    auto lang = entities::language_for_path(d.path);
    std::vector<entities::EntitySpan> post, pre;
    if (lang != entities::Language::unsupported) {
      bool need_post = false, need_pre = false;
      for (const auto& l : lines) (l.image == entities::Image::post ? need_post : need_pre) = true;
      if (need_post) {
        auto text = repo.file_at(c.hash, d.path);
        post = entities::detect_entities_declared(text.value_or(""), lang, d.path).spans;
      }
      if (need_pre && !c.parents.empty()) {
        auto text = repo.file_at(c.parents.front(), d.pre_path());
        pre = entities::detect_entities_declared(text.value_or(""), entities::language_for_path(d.pre_path()),
                                                 d.pre_path())
                  .spans;
      }
    }
    auto recs = entities::map_changes_to_entities(lines, post, pre, opts, c.hash, d.path, dev);
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

// Deleted pre-image lines of one commit with their blame owner at the first parent.
inline std::vector<network::LineModification> commit_line_modifications(
    const gitio::Repository& repo, const gitio::CommitRecord& c, const std::string& dev,
    const gitio::FileFilter& filter, const identity::Resolver& resolver,
    const std::map<std::string, std::string>& author_by_commit) {
  std::vector<network::LineModification> out;
  if (c.parents.empty()) return out;
  auto diffs = repo.diff_hunks(c);
  for (const auto& d : *diffs) {
    if (d.is_binary || d.is_new || !filter.keeps_path(d.path) || d.deleted_count() == 0) continue;
    std::shared_ptr<const std::vector<gitio::LineAttribution>> blame;
    try {
      blame = repo.blame_at(c.parents.front(), d.pre_path());
    } catch (const PathAbsentError&) {
    }
    std::map<std::int64_t, const gitio::LineAttribution*> by_line;
    if (blame)
      for (const auto& a : *blame) by_line[a.line_no] = &a;
    for (const auto& h : d.hunks) {
      for (std::int64_t k = 0; k < static_cast<std::int64_t>(h.deleted.size()); ++k) {
        network::LineModification m{c.hash, dev, d.path, h.old_start + k, std::nullopt};
        if (auto it = by_line.find(m.line); it != by_line.end()) {
          if (auto id = resolver.find({it->second->owner_name, it->second->owner_email})) {
            m.owner = *id;
          } else if (auto ac = author_by_commit.find(it->second->owner_commit); ac != author_by_commit.end()) {
            m.owner = ac->second;
          }
        }
        out.push_back(std::move(m));
      }
    }
  }
  return out;
}

// Shared extraction state for every variant of one project. Intermediate
// tables are cached by the configuration slice they depend on, so variants
// that differ only downstream reuse upstream work.
class Workspace {
 public:
  Workspace(config::ProjectConfig project, unsigned jobs = 1, Logger log = {})
      : project_(std::move(project)), jobs_(std::max(1u, jobs)), log_(std::move(log)) {}

  const config::ProjectConfig& project() const noexcept { return project_; }
  unsigned jobs() const noexcept { return jobs_; }

  const gitio::Repository& repo() {
    std::lock_guard lock(mutex_);
    if (!repo_) repo_ = std::make_unique<gitio::Repository>(project_.repo);
    return *repo_;
  }

  void log(const std::string& msg) const {
    if (log_) log_(msg);
  }

  std::shared_ptr<const VariantFacts> facts(const config::VariantConfig& v, gitio::BranchMode mode) {
    auto filters_key = config::to_json(v).at("filters").dump();
    std::string raw_key = gitio::to_string(mode) + "|" + project_.branch;
    std::string stored_key =
        raw_key + "|" + (v.filters.order == gitio::FilterOrder::filter_before_store ? filters_key : "");
    std::string resolver_key = stored_key + "|" + config::to_json(v).at("identity").dump();
    std::string facts_key = resolver_key + "|" + filters_key + "|" + config::to_json(v).at("entities").dump() + "|" +
                            config::enum_name(v.extraction.timestamp);
    if (auto it = facts_cache_.find(facts_key); it != facts_cache_.end()) {
      log("cache hit: facts for variant '" + v.name + "' (" + gitio::to_string(mode) + ") reused");
      return it->second;
    }

    auto f = std::make_shared<VariantFacts>();
    if (auto it = raw_cache_.find(raw_key); it != raw_cache_.end()) {
      log("cache hit: git history (" + gitio::to_string(mode) + ") reused for variant '" + v.name + "'");
      f->raw = it->second;
    } else {
      log("extracting git history (" + gitio::to_string(mode) + ")");
      auto h = std::make_shared<gitio::ExtractedHistory>(repo().extract_history(mode, project_.branch));
      for (auto& c : h->commits) c.branch_scope = mode;
      f->raw = h;
      raw_cache_[raw_key] = h;
    }
    if (auto it = stored_cache_.find(stored_key); it != stored_cache_.end()) {
      f->stored = it->second;
    } else {
      f->stored = std::make_shared<gitio::ExtractedHistory>(gitio::store(*f->raw, v.filters));
      stored_cache_[stored_key] = f->stored;
    }
    if (auto it = resolver_cache_.find(resolver_key); it != resolver_cache_.end()) {
      log("cache hit: identities reused for variant '" + v.name + "'");
      f->resolver = it->second;
    } else {
      f->resolver = std::make_shared<identity::Resolver>(identity::resolve(f->stored->commits, v.identity));
      resolver_cache_[resolver_key] = f->resolver;
    }

    const auto& commits = f->stored->commits;
    f->analysis_changes = gitio::apply_file_filters(f->stored->file_changes, v.filters);
    std::map<std::string, std::string> author_by_commit;
    for (std::size_t i = 0; i < commits.size(); ++i) {
      const auto& c = commits[i];
      f->author.push_back(f->resolver->author_of(c));
      f->time.push_back(v.extraction.timestamp == config::Timestamp::author ? c.author_time : c.commit_time);
      f->position[c.hash] = i;
      author_by_commit[c.hash] = f->author.back();
    }

    gitio::FileFilter filter(v.filters);
    const auto& repository = repo();
    std::vector<std::vector<entities::EntityChange>> per_commit(commits.size());
    try {
      parallel_for(commits.size(), jobs_, [&](std::size_t i) {
        per_commit[i] = commit_entity_changes(repository, commits[i], f->author[i], filter, v.entities);
      });
    } catch (const RepositoryError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("entities", e.what());
    }
    auto ec = std::make_shared<std::vector<entities::EntityChange>>();
    for (auto& pc : per_commit) ec->insert(ec->end(), pc.begin(), pc.end());
    f->entity_changes = ec;

    std::string mods_key = resolver_key + "|" + filters_key;
    if (auto it = mods_cache_.find(mods_key); it != mods_cache_.end()) {
      f->line_mods = it->second;
    } else {
      std::vector<std::vector<network::LineModification>> mods(commits.size());
      try {
        parallel_for(commits.size(), jobs_, [&](std::size_t i) {
          mods[i] = commit_line_modifications(repository, commits[i], f->author[i], filter, *f->resolver,
                                              author_by_commit);
        });
      } catch (const RepositoryError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError("ownership", e.what());
      }
      auto lm = std::make_shared<std::vector<network::LineModification>>();
      for (auto& m : mods) lm->insert(lm->end(), m.begin(), m.end());
      f->line_mods = lm;
      mods_cache_[mods_key] = lm;
    }
    facts_cache_[facts_key] = f;
    return f;
  }

  std::shared_ptr<const VariantFacts> facts(const config::VariantConfig& v) {
    return facts(v, v.extraction.branch_mode);
  }

  // Number of declared functions in the supported-language files kept by
  // `filter` at `commit`.
  std::int64_t function_count(const std::string& commit, const gitio::FileFilter& filter) {
    std::int64_t total = 0;
    for (const auto& e : repo().tree(commit)) {
      if (!filter.keeps_path(e.path)) continue;
      auto lang = entities::language_for_path(e.path);
      if (lang == entities::Language::unsupported) continue;
      std::string key = e.blob + "|" + entities::to_string(lang);
      {
        std::lock_guard lock(mutex_);
        if (auto it = function_cache_.find(key); it != function_cache_.end()) {
          total += it->second;
          continue;
        }
      }
      auto text = repo().blob(e.blob);
      auto n = static_cast<std::int64_t>(entities::count_functions(entities::detect_entities_declared(*text, lang)));
      std::lock_guard lock(mutex_);
      function_cache_[key] = n;
      total += n;
    }
    return total;
  }

  // Non-blank lines per module of the kept files at `commit`.
  std::map<std::string, std::int64_t> loc_per_module(const std::string& commit, const gitio::FileFilter& filter,
                                                     const turnover::ModuleMap& modules) {
    std::map<std::string, std::int64_t> out;
    for (const auto& m : modules.modules()) out[m] = 0;
    for (const auto& e : repo().tree(commit)) {
      if (!filter.keeps_path(e.path)) continue;
      auto text = repo().blob(e.blob);
      std::int64_t n = 0;
      bool blank = true;
      for (char ch : *text) {
        if (ch == '\n') {
          if (!blank) ++n;
          blank = true;
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
          blank = false;
        }
      }
      if (!blank) ++n;
      out[modules.module_of(e.path)] += n;
    }
    return out;
  }

  std::optional<std::string> tip() {
    auto r = repo().git_raw({"rev-parse", "--verify", "--quiet", project_.branch + "^{commit}"});
    if (r.exit_code != 0) return std::nullopt;
    return std::string(gitio::parse::lines(r.out).at(0));
  }

 private:
  config::ProjectConfig project_;
  unsigned jobs_;
  Logger log_;
  std::mutex mutex_;
  std::unique_ptr<gitio::Repository> repo_;
  std::map<std::string, std::shared_ptr<const gitio::ExtractedHistory>> raw_cache_;
  std::map<std::string, std::shared_ptr<const gitio::ExtractedHistory>> stored_cache_;
  std::map<std::string, std::shared_ptr<const identity::Resolver>> resolver_cache_;
  std::map<std::string, std::shared_ptr<const std::vector<network::LineModification>>> mods_cache_;
  std::map<std::string, std::shared_ptr<const VariantFacts>> facts_cache_;
  std::map<std::string, std::int64_t> function_cache_;
};

// ---------------------------------------------------------------------------
// Windowed slices

struct Range {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool empty() const noexcept { return end <= start; }
};

// Pinned configuration bounds, else [first fact time, last fact time + 1).
inline Range common_range(const config::ProjectConfig& project,
                          const std::vector<std::shared_ptr<const VariantFacts>>& facts) {
  std::optional<std::int64_t> lo, hi;
  for (const auto& f : facts)
    for (auto t : f->time) {
      lo = lo ? std::min(*lo, t) : t;
      hi = hi ? std::max(*hi, t) : t;
    }
  Range r;
  r.start = project.window_origin.value_or(lo.value_or(0));
  r.end = project.window_end.value_or(hi ? *hi + 1 : r.start);
  return r;
}

inline std::vector<windows::TimeWindow> make_windows(const Range& r, const windows::LengthSpec& length,
                                                     std::optional<double> step = std::nullopt) {
  if (r.empty()) return {};
  return windows::split_windows(r.start, r.end, length, step);
}

struct WindowSlice {
  std::vector<std::size_t> commits;                 // stored commit indices
  std::vector<gitio::CommitRecord> commit_records;
  std::vector<gitio::FileChange> changes;           // analysis-level rows
  std::vector<gitio::FileChange> stored_changes;    // fact-table rows
  std::vector<entities::EntityChange> entity_changes;
  std::vector<network::LineModification> line_mods;
  std::vector<std::string> authors;                 // sorted, unique
};

inline std::vector<WindowSlice> slice(const VariantFacts& f, const std::vector<windows::TimeWindow>& ws) {
  std::vector<WindowSlice> out(ws.size());
  std::map<std::string, std::vector<std::int64_t>> windows_of;
  for (std::size_t i = 0; i < f.stored->commits.size(); ++i) {
    auto idx = windows::assign(f.time[i], ws);
    for (auto w : idx) {
      out[static_cast<std::size_t>(w)].commits.push_back(i);
      out[static_cast<std::size_t>(w)].commit_records.push_back(f.stored->commits[i]);
    }
    windows_of[f.stored->commits[i].hash] = std::move(idx);
  }
  auto each = [&](const std::string& commit, auto&& fn) {
    auto it = windows_of.find(commit);
    if (it == windows_of.end()) return;
    for (auto w : it->second) fn(out[static_cast<std::size_t>(w)]);
  };
  for (const auto& c : f.analysis_changes) each(c.commit, [&](WindowSlice& s) { s.changes.push_back(c); });
  for (const auto& c : f.stored->file_changes) each(c.commit, [&](WindowSlice& s) { s.stored_changes.push_back(c); });
  for (const auto& c : *f.entity_changes) each(c.commit, [&](WindowSlice& s) { s.entity_changes.push_back(c); });
  for (const auto& m : *f.line_mods) each(m.commit, [&](WindowSlice& s) { s.line_mods.push_back(m); });
  for (auto& s : out) {
    std::set<std::string> a;
    for (auto i : s.commits) a.insert(f.author[i]);
    s.authors.assign(a.begin(), a.end());
  }
  return out;
}

inline network::DevNetwork build_network(const VariantFacts& f, const WindowSlice& s, const config::NetworkConfig& cfg,
                                         std::int64_t window) {
  switch (cfg.variant) {
    case network::Variant::temporal_entity:
      return network::build_temporal_entity_network(s.entity_changes, cfg.weight_scheme, s.authors, window);
    case network::Variant::line_ownership:
      return network::build_line_ownership_network(s.line_mods, s.authors, window);
    default: {
      std::vector<network::DevFileTouch> touches;
      for (const auto& c : s.changes) touches.push_back({f.author.at(f.position.at(c.commit)), c.path});
      return network::build_bipartite_projection(touches, s.authors, window);
    }
  }
}

inline network::MetricOptions metric_options(const config::NetworkConfig& cfg) {
  network::MetricOptions o;
  o.weighted_evcent = cfg.weighted_evcent;
  o.hierarchy = cfg.hierarchy;
  return o;
}

// ---------------------------------------------------------------------------
// Study drivers

// ---------------------------------------------------------------------------
// Baseline counts

struct BaselineRow {
  std::int64_t window = 0;
  std::int64_t start = 0;
  std::int64_t commits = 0;
  std::int64_t files = 0;
  std::int64_t developers = 0;
  std::int64_t entities = 0;
};

inline std::vector<BaselineRow> baseline_counts(const std::vector<windows::TimeWindow>& ws,
                                                const std::vector<WindowSlice>& slices) {
  std::vector<BaselineRow> out;
  for (std::size_t w = 0; w < ws.size(); ++w) {
    const auto& s = slices[w];
    std::set<std::string> files;
    for (const auto& c : s.stored_changes) files.insert(c.path);
    out.push_back({ws[w].index, ws[w].start, static_cast<std::int64_t>(s.commits.size()),
                   static_cast<std::int64_t>(files.size()), static_cast<std::int64_t>(s.authors.size()),
                   static_cast<std::int64_t>(s.entity_changes.size())});
  }
  return out;
}

inline std::string baseline_csv(const std::vector<BaselineRow>& rows) {
  csv::Writer w({"index", "start_iso8601", "commits", "files", "developers", "entities"});
  for (const auto& r : rows)
    w.row({std::to_string(r.window), windows::iso8601(r.start), std::to_string(r.commits), std::to_string(r.files),
           std::to_string(r.developers), std::to_string(r.entities)});
  return w.str();
}

// ---------------------------------------------------------------------------
// Networks

struct WindowNetwork {
  network::DevNetwork net;
  std::vector<network::NodeMetrics> nodes;
  std::optional<network::GraphMetrics> graph;
};

inline std::vector<WindowNetwork> window_networks(const VariantFacts& f, const std::vector<WindowSlice>& slices,
                                                  const config::NetworkConfig& cfg, unsigned jobs) {
  std::vector<WindowNetwork> out(slices.size());
  parallel_for(slices.size(), jobs, [&](std::size_t w) {
    auto& wn = out[w];
    wn.net = build_network(f, slices[w], cfg, static_cast<std::int64_t>(w));
    if (wn.net.nodes.empty()) return;
    wn.nodes = network::node_metrics(wn.net, metric_options(cfg));
    wn.graph = network::graph_metrics(wn.net);
  });
  return out;
}

inline std::string graph_metrics_csv(const std::vector<WindowNetwork>& nets) {
  csv::Writer w({"window", "n_nodes", "n_edges", "density", "diameter", "global_clustering", "mean_in_degree"});
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const auto& g = nets[i].graph;
    if (!g) continue;
    w.row({std::to_string(i), std::to_string(g->n_nodes), std::to_string(g->n_edges), csv::format_double(g->density),
           std::to_string(g->diameter), csv::format_double(g->global_clustering),
           csv::format_double(g->mean_in_degree)});
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Roles

struct RolesResult {
  std::vector<roles::WindowClassifications> classifications;
  std::vector<std::size_t> recent_span;
  std::vector<roles::AgreementCell> recent;
  std::vector<roles::AgreementCell> all;
  std::vector<roles::HierarchyRow> hierarchy;
  std::vector<std::pair<std::int64_t, roles::HierarchyEmbedding>> embeddings;
};

inline RolesResult run_roles(const VariantFacts& f, const config::VariantConfig& v,
                             const std::vector<windows::TimeWindow>& ws, const std::vector<WindowSlice>& slices,
                             const std::vector<WindowNetwork>& nets) {
  RolesResult r;
  auto role_metric = roles::metric_from_string(v.roles.role_metric);
  std::vector<std::size_t> every;
  for (std::size_t w = 0; w < ws.size(); ++w) {
    every.push_back(w);
    roles::WindowClassifications cls;
    if (slices[w].commits.empty()) {
      for (auto m : roles::all_metrics()) cls[m] = std::nullopt;
    } else {
      auto activity = roles::count_metrics(slices[w].commit_records, slices[w].changes, *f.resolver);
      cls = roles::classify_window(activity, nets[w].nodes, v.roles.threshold_fraction, ws[w].index);
      auto emb = roles::hierarchy_embedding(nets[w].nodes, cls.at(role_metric), ws[w].index);
      r.hierarchy.insert(r.hierarchy.end(), emb.rows.begin(), emb.rows.end());
      r.embeddings.emplace_back(ws[w].index, std::move(emb));
    }
    r.classifications.push_back(std::move(cls));
  }
  if (!ws.empty()) {
    auto cutoff = windows::add_months(ws.back().end, -v.roles.recent_months);
    for (std::size_t w = 0; w < ws.size(); ++w)
      if (ws[w].start >= cutoff) r.recent_span.push_back(w);
  }
  r.recent = roles::agreement_matrix(r.classifications, r.recent_span);
  r.all = roles::agreement_matrix(r.classifications, every);
  return r;
}

// Core/peripheral labels per window and metric, keyed by display name.
inline std::string roles_core_csv(const RolesResult& r, const identity::Resolver& resolver) {
  csv::Writer w({"window", "metric", "developer", "role"});
  for (std::size_t i = 0; i < r.classifications.size(); ++i)
    for (const auto& [metric, cls] : r.classifications[i]) {
      if (!cls) continue;
      std::map<std::string, bool> names;
      for (const auto& d : cls->universe) names[resolver.display_name(d)] |= cls->is_core(d);
      for (const auto& [name, core] : names)
        w.row({std::to_string(i), roles::to_string(metric), name, core ? "core" : "peripheral"});
    }
  return w.str();
}

inline std::string hierarchy_slopes_csv(const RolesResult& r) {
  csv::Writer w({"window", "eligible", "slope"});
  for (const auto& [window, e] : r.embeddings)
    w.row({std::to_string(window), std::to_string(e.eligible), e.slope ? csv::format_double(*e.slope) : ""});
  return w.str();
}

// ---------------------------------------------------------------------------
// Team size and productivity

// First-parent chain from `tip`, newest first, through the raw commit table.
inline std::vector<const gitio::CommitRecord*> first_parent_chain(const gitio::ExtractedHistory& raw,
                                                                  const std::string& tip) {
  std::map<std::string, const gitio::CommitRecord*> by_hash;
  for (const auto& c : raw.commits) by_hash[c.hash] = &c;
  std::vector<const gitio::CommitRecord*> chain;
  auto it = by_hash.find(tip);
  std::set<std::string> seen;
  while (it != by_hash.end() && seen.insert(it->first).second) {
    chain.push_back(it->second);
    if (it->second->parents.empty()) break;
    it = by_hash.find(it->second->parents.front());
  }
  return chain;
}

struct BrooksResult {
  std::vector<windows::TimeWindow> windows;
  std::vector<brooks::WindowProductivity> table;
  std::vector<brooks::ModelResult> models;
  std::optional<brooks::CorrelationMatrix> correlation;
};

inline BrooksResult run_brooks(Workspace& ws, const VariantFacts& f, const config::VariantConfig& v,
                               const Range& range) {
  BrooksResult r;
  r.windows = make_windows(range, v.brooks.window);
  auto slices = slice(f, r.windows);
  gitio::FileFilter filter(v.filters);
  auto tip = ws.tip();
  std::vector<const gitio::CommitRecord*> chain;
  if (tip) chain = first_parent_chain(*f.raw, *tip);
  auto stamp = [&](const gitio::CommitRecord& c) {
    return v.extraction.timestamp == config::Timestamp::author ? c.author_time : c.commit_time;
  };
  auto functions_before = [&](std::int64_t t) -> std::int64_t {
    for (const auto* c : chain)
      if (stamp(*c) < t) return ws.function_count(c->hash, filter);
    return 0;
  };
  std::vector<std::optional<brooks::WindowProductivity>> rows(r.windows.size());
  const auto& repo = ws.repo();
  parallel_for(r.windows.size(), ws.jobs(), [&](std::size_t w) {
    const auto& s = slices[w];
    if (s.commits.empty()) return;
    brooks::WindowProductivity p;
    p.project = ws.project().name;
    p.window = r.windows[w].index;
    p.commits = static_cast<std::int64_t>(s.commits.size());
    p.team_size = static_cast<std::int64_t>(s.authors.size());
    auto net = build_network(f, s, v.network, p.window);
    auto g = network::graph_metrics(net);
    p.n_nodes = g.n_nodes;
    p.mean_in_degree = g.mean_in_degree;
    p.mean_fmodr = network::foreign_modification_ratio(s.line_mods).mean;
    for (const auto& c : s.commit_records) p.halstead_effort += brooks::commit_effort(*repo.diff_hunks(c), &filter);
    p.delta_functions = functions_before(r.windows[w].end) - functions_before(r.windows[w].start);
    rows[w] = std::move(p);
  });
  for (auto& row : rows)
    if (row) r.table.push_back(std::move(*row));
  r.models = brooks::fit_models(r.table, v.brooks.control_sets, v.brooks.transforms);
  try {
    r.correlation = brooks::correlation_matrix(r.table, v.brooks.transforms);
  } catch (const InvalidArgumentError&) {
  }
  return r;
}

// ---------------------------------------------------------------------------
// Turnover and quality

inline std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

// One module per top-level directory of the tip tree.
inline turnover::ModuleMap default_module_map(const std::vector<gitio::TreeEntry>& tree) {
  std::set<std::string> dirs;
  for (const auto& e : tree)
    if (auto slash = e.path.find('/'); slash != std::string::npos) dirs.insert(e.path.substr(0, slash));
  std::vector<std::pair<std::string, std::string>> rules;
  for (const auto& d : dirs) rules.emplace_back("^" + regex_escape(d) + "/", d);
  return turnover::ModuleMap(std::move(rules));
}

struct TurnoverResult {
  std::vector<windows::TimeWindow> periods;
  std::vector<turnover::ActivityRow> rows;
  std::vector<turnover::CorrelationResult> results;
  std::optional<double> share;
  std::string loc_source;
  std::string module_source;
};

inline TurnoverResult run_turnover(Workspace& ws, const VariantFacts& f, const config::VariantConfig& v,
                                   const Range& range) {
  TurnoverResult r;
  const auto& project = ws.project();
  auto tip = ws.tip();
  gitio::FileFilter filter(v.filters);

  turnover::ModuleMap modules;
  if (project.module_map) {
    modules = turnover::read_module_map(project.module_map->string());
    r.module_source = "module_map";
  } else {
    modules = default_module_map(tip ? ws.repo().tree(*tip) : std::vector<gitio::TreeEntry>{});
    r.module_source = "top_level_directories";
  }
  std::set<std::string> bugfixes;
  if (project.bugfix_list) bugfixes = turnover::read_bugfix_list(project.bugfix_list->string());
  std::map<std::string, std::int64_t> loc;
  if (project.loc_table) {
    loc = turnover::read_loc_table(project.loc_table->string());
    r.loc_source = "loc_table";
  } else {
    if (tip) loc = ws.loc_per_module(*tip, filter, modules);
    r.loc_source = "builtin_nonblank_counter";
  }

  std::map<std::string, std::set<std::string>> touched;  // commit -> modules
  std::map<std::string, std::vector<const gitio::FileChange*>> changes_of;
  for (const auto& c : f.analysis_changes) {
    touched[c.commit].insert(modules.module_of(c.path));
    changes_of[c.commit].push_back(&c);
  }

  r.periods = make_windows(range, windows::LengthSpec::months(v.turnover.period_months));
  struct PeriodOut {
    std::map<std::string, turnover::GroupActivity> activity;
    std::map<std::string, std::set<std::string>> touched;
    std::vector<turnover::TurnoverRecord> records;
  };
  std::vector<PeriodOut> per(r.periods.size());
  parallel_for(r.periods.size(), ws.jobs(), [&](std::size_t p) {
    const auto& period = r.periods[p];
    auto intervals = windows::split_windows(period.start, period.end, windows::LengthSpec::weeks(v.turnover.interval_weeks));
    std::vector<turnover::Contribution> contributions;
    std::vector<std::set<std::string>> active(intervals.size());
    std::set<std::string> universe;
    for (std::size_t i = 0; i < f.stored->commits.size(); ++i) {
      if (!period.contains(f.time[i])) continue;
      auto idx = windows::assign(f.time[i], intervals);
      if (idx.empty()) continue;
      auto k = static_cast<std::size_t>(idx.front());
      const auto& c = f.stored->commits[i];
      active[k].insert(f.author[i]);
      universe.insert(f.author[i]);
      if (auto t = touched.find(c.hash); t != touched.end()) per[p].touched[c.hash] = t->second;
      if (auto it = changes_of.find(c.hash); it != changes_of.end())
        for (const auto* fc : it->second)
          contributions.push_back({k, f.author[i], modules.module_of(fc->path), fc->churn()});
    }
    per[p].activity = turnover::group_activity(contributions, intervals.size());
    per[p].records = turnover::classify_turnover(active, universe);
  });

  auto all_fixes = turnover::bugfix_counts(touched, bugfixes);
  auto density = turnover::bug_density(all_fixes, loc);
  auto module_names = [&](const std::map<std::string, turnover::GroupActivity>& act) {
    std::set<std::string> names;
    for (const auto& [m, n] : loc) names.insert(m);
    for (const auto& [m, a] : act) names.insert(m);
    return names;
  };
  auto value = [](const std::map<std::string, std::int64_t>& m, const std::string& k) -> std::int64_t {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  };

  std::map<std::string, turnover::GroupActivity> total;
  std::vector<turnover::TurnoverRecord> records;
  for (std::size_t p = 0; p < per.size(); ++p) {
    auto fixes = turnover::bugfix_counts(per[p].touched, bugfixes);
    for (const auto& m : module_names(per[p].activity)) {
      turnover::ActivityRow row{project.name, std::to_string(p), m, {}, value(fixes, m), value(loc, m), std::nullopt};
      if (auto it = per[p].activity.find(m); it != per[p].activity.end()) row.activity = it->second;
      if (row.loc > 0) row.density = static_cast<double>(row.bugfixes) / static_cast<double>(row.loc);
      r.rows.push_back(std::move(row));
    }
    for (const auto& [m, a] : per[p].activity) total[m] += a;
    records.insert(records.end(), per[p].records.begin(), per[p].records.end());
  }
  for (const auto& m : module_names(total)) {
    turnover::ActivityRow row{project.name, "all", m, {}, value(all_fixes, m), value(loc, m), std::nullopt};
    if (auto it = total.find(m); it != total.end()) row.activity = it->second;
    if (auto it = density.find(m); it != density.end()) row.density = it->second;
    r.rows.push_back(std::move(row));
  }
  r.share = turnover::turnover_share(records);

  const auto* activity = &total;
  if (v.turnover.analysis_period) {
    auto p = static_cast<std::size_t>(*v.turnover.analysis_period);
    if (p >= per.size()) throw InvalidArgumentError("turnover analysis period " + std::to_string(p) + " does not exist");
    activity = &per[p].activity;
  }
  for (const auto& metric : turnover::group_metrics())
    r.results.push_back(turnover::turnover_quality_correlation(metric, *activity, density, v.turnover.resamples,
                                                               v.seed, v.turnover.level, ws.jobs(),
                                                               modules.unassigned()));
  return r;
}

}  // namespace msrlab::pipeline
