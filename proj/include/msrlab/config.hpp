#pragma once

#include <json.hpp>
#include <toml.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msrlab/entities.hpp"
#include "msrlab/error.hpp"
#include "msrlab/gitio.hpp"
#include "msrlab/identity.hpp"
#include "msrlab/network.hpp"
#include "msrlab/windows.hpp"

namespace msrlab::config {

inline constexpr std::string_view kToolVersion = "msrlab 1.0.0";

enum class Timestamp { author, committer };
inline std::string to_string(Timestamp t) { return t == Timestamp::author ? "author" : "committer"; }

enum class Transform { none, log1p, signed_log1p, sqrt };

inline std::string to_string(Transform t) {
  switch (t) {
    case Transform::none: return "none";
    case Transform::log1p: return "log1p";
    case Transform::signed_log1p: return "signed_log1p";
    default: return "sqrt";
  }
}

struct ExtractionConfig {
  gitio::BranchMode branch_mode = gitio::BranchMode::single_branch;
  Timestamp timestamp = Timestamp::author;
};

struct WindowConfig {
  windows::LengthSpec length = windows::LengthSpec::months(3);
  std::optional<double> step;
};

struct NetworkConfig {
  network::Variant variant = network::Variant::temporal_entity;
  network::WeightScheme weight_scheme = network::WeightScheme::count_per_prior_dev;
  bool weighted_evcent = true;
  network::HierarchyFormula hierarchy = network::HierarchyFormula::degree_complement;
};

struct RolesConfig {
  double threshold_fraction = 0.8;
  double recent_months = 12;
  std::string role_metric = "degree";
};

struct BrooksConfig {
  windows::LengthSpec window = windows::LengthSpec::months(9);
  std::vector<std::vector<std::string>> control_sets{{}, {"mean_in_degree", "mean_fmodr"}};
  std::map<std::string, Transform> transforms{
      {"commits", Transform::log1p},         {"delta_functions", Transform::signed_log1p},
      {"halstead_effort", Transform::log1p}, {"team_size", Transform::log1p},
      {"mean_in_degree", Transform::log1p},  {"mean_fmodr", Transform::sqrt},
      {"n_nodes", Transform::log1p}};
};

struct TurnoverConfig {
  double interval_weeks = 2;
  double period_months = 6;
  gitio::BranchMode branch_mode = gitio::BranchMode::all_branches;
  std::size_t resamples = 2000;
  double level = 0.95;
  std::optional<std::int64_t> analysis_period;
};

struct StudiesConfig {
  bool roles = true;
  bool brooks = true;
  bool turnover = true;
};

struct VariantConfig {
  std::string name;
  ExtractionConfig extraction;
  gitio::FilterConfig filters;
  identity::IdentityConfig identity;
  entities::MappingOptions entities;
  WindowConfig windows;
  NetworkConfig network;
  RolesConfig roles;
  BrooksConfig brooks;
  TurnoverConfig turnover;
  StudiesConfig studies;
  std::uint64_t seed = 42;
};

struct ProjectConfig {
  std::string name = "project";
  std::filesystem::path repo;
  std::string branch = "HEAD";
  std::optional<std::filesystem::path> bugfix_list;
  std::optional<std::filesystem::path> module_map;
  std::optional<std::filesystem::path> loc_table;
  std::optional<std::int64_t> window_origin;
  std::optional<std::int64_t> window_end;
  std::size_t trend_k = 3;
};

struct Config {
  ProjectConfig project;
  std::vector<VariantConfig> variants;
};

// ---------------------------------------------------------------------------
// Enum spellings

template <typename E>
struct EnumNames;

#define MSRLAB_ENUM_NAMES(E, ...)                                        \
  template <>                                                            \
  struct EnumNames<E> {                                                  \
    static const std::vector<std::pair<std::string, E>>& get() {         \
      static const std::vector<std::pair<std::string, E>> v{__VA_ARGS__}; \
      return v;                                                          \
    }                                                                    \
  };

MSRLAB_ENUM_NAMES(gitio::BranchMode, {"single_branch", gitio::BranchMode::single_branch},
                  {"all_branches", gitio::BranchMode::all_branches})
MSRLAB_ENUM_NAMES(gitio::FilterOrder, {"filter_before_store", gitio::FilterOrder::filter_before_store},
                  {"filter_at_analysis", gitio::FilterOrder::filter_at_analysis})
MSRLAB_ENUM_NAMES(Timestamp, {"author", Timestamp::author}, {"committer", Timestamp::committer})
MSRLAB_ENUM_NAMES(identity::Mode, {"exact", identity::Mode::exact}, {"edit_distance", identity::Mode::edit_distance})
MSRLAB_ENUM_NAMES(identity::Scope, {"author_only", identity::Scope::author_only},
                  {"author_and_committer", identity::Scope::author_and_committer})
MSRLAB_ENUM_NAMES(entities::CountingMode, {"summarise_per_entity", entities::CountingMode::summarise_per_entity},
                  {"distinct_blocks", entities::CountingMode::distinct_blocks})
MSRLAB_ENUM_NAMES(windows::Unit, {"months", windows::Unit::months}, {"weeks", windows::Unit::weeks})
MSRLAB_ENUM_NAMES(network::Variant, {"temporal_entity", network::Variant::temporal_entity},
                  {"line_ownership", network::Variant::line_ownership},
                  {"bipartite_projection", network::Variant::bipartite_projection})
MSRLAB_ENUM_NAMES(network::WeightScheme, {"count_per_prior_dev", network::WeightScheme::count_per_prior_dev},
                  {"count_once", network::WeightScheme::count_once})
MSRLAB_ENUM_NAMES(network::HierarchyFormula, {"degree_complement", network::HierarchyFormula::degree_complement},
                  {"degree_over_clustering", network::HierarchyFormula::degree_over_clustering})
MSRLAB_ENUM_NAMES(Transform, {"none", Transform::none}, {"log1p", Transform::log1p},
                  {"signed_log1p", Transform::signed_log1p}, {"sqrt", Transform::sqrt})

#undef MSRLAB_ENUM_NAMES

template <typename E>
std::string enum_name(E value) {
  for (const auto& [name, v] : EnumNames<E>::get())
    if (v == value) return name;
  return "?";
}

template <typename E>
E parse_enum(const std::string& text, const std::string& key) {
  std::string allowed;
  for (const auto& [name, v] : EnumNames<E>::get()) {
    if (name == text) return v;
    allowed += (allowed.empty() ? "" : ", ") + name;
  }
  throw ConfigError("invalid value '" + text + "' for key '" + key + "' (expected one of: " + allowed + ")");
}

inline std::int64_t parse_iso8601(const std::string& text, const std::string& key) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  if (n == 3 || ((n == 6 || n == 7) && (n == 6 || tail == 'Z')))
    return windows::utc(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
  throw ConfigError("invalid timestamp '" + text + "' for key '" + key + "' (expected YYYY-MM-DD[THH:MM:SSZ])");
}

// ---------------------------------------------------------------------------
// TOML reading with unknown-key detection

class TableReader {
 public:
  TableReader(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool has(const std::string& key) const { return table_ && table_->contains(key); }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const toml::node* node(const std::string& key) {
    if (!table_) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (n->is_integer()) return n->value<std::int64_t>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return n->value<bool>();
    } else {
      if (n->is_string()) return n->value<std::string>();
    }
    throw ConfigError("wrong type for key '" + key_path(key) + "'");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  template <typename E>
  void read_enum(const std::string& key, E& out) {
    if (auto v = get<std::string>(key)) out = parse_enum<E>(*v, key_path(key));
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback = {}) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError("key '" + key_path(key) + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      auto s = e.value<std::string>();
      if (!s) throw ConfigError("key '" + key_path(key) + "' must be an array of strings");
      out.push_back(*s);
    }
    return out;
  }

  TableReader sub(const std::string& key) {
    const toml::node* n = node(key);
    if (n && !n->is_table()) throw ConfigError("key '" + key_path(key) + "' must be a table");
    return TableReader(n ? n->as_table() : nullptr, key_path(key));
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      std::string key(k.str());
      if (!used_.count(key)) throw ConfigError("unknown key '" + key_path(key) + "'");
    }
  }

 private:
  const toml::table* table_;
  std::string path_;
  std::set<std::string> used_;
};

inline VariantConfig parse_variant(TableReader& r, const VariantConfig& base) {
  VariantConfig v = base;
  r.read("name", v.name);
  if (v.name.empty()) throw ConfigError("key '" + r.key_path("name") + "' is required");
  for (char c : v.name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      throw ConfigError("key '" + r.key_path("name") + "' may only hold letters, digits, '-', '_' and '.'");

  {
    auto t = r.sub("extraction");
    t.read_enum("branch_mode", v.extraction.branch_mode);
    t.read_enum("timestamp", v.extraction.timestamp);
    t.finish();
  }
  {
    auto t = r.sub("filters");
    v.filters.allow_extensions = t.strings("allow_extensions", v.filters.allow_extensions);
    v.filters.allow_patterns = t.strings("allow_patterns", v.filters.allow_patterns);
    v.filters.deny_extensions = t.strings("deny_extensions", v.filters.deny_extensions);
    v.filters.deny_patterns = t.strings("deny_patterns", v.filters.deny_patterns);
    t.read("drop_binary", v.filters.drop_binary);
    t.read_enum("order", v.filters.order);
    t.finish();
    try {
      gitio::FileFilter check(v.filters);
    } catch (const Error& e) {
      throw ConfigError("invalid filter in '" + r.key_path("filters") + "': " + e.what());
    }
  }
  {
    auto t = r.sub("identity");
    t.read_enum("mode", v.identity.mode);
    if (auto th = t.get<std::int64_t>("threshold")) {
      if (*th < 0) throw ConfigError("key '" + t.key_path("threshold") + "' must be non-negative");
      v.identity.threshold = static_cast<std::size_t>(*th);
    }
    t.read_enum("scope", v.identity.scope);
    t.finish();
  }
  {
    auto t = r.sub("entities");
    t.read_enum("mode", v.entities.mode);
    if (auto g = t.get<std::int64_t>("gap")) {
      if (*g < 0) throw ConfigError("key '" + t.key_path("gap") + "' must be non-negative");
      v.entities.gap = *g;
    }
    t.read("fallback", v.entities.fallback);
    t.finish();
  }
  {
    auto t = r.sub("windows");
    t.read_enum("unit", v.windows.length.unit);
    t.read("length", v.windows.length.amount);
    if (auto s = t.get<double>("step")) v.windows.step = *s;
    t.finish();
    if (!(v.windows.length.amount > 0)) throw ConfigError("key '" + t.key_path("length") + "' must be positive");
    if (v.windows.step && (!(*v.windows.step > 0) || *v.windows.step > v.windows.length.amount))
      throw ConfigError("key '" + t.key_path("step") + "' must be positive and at most the window length");
  }
  {
    auto t = r.sub("network");
    t.read_enum("variant", v.network.variant);
    t.read_enum("weight_scheme", v.network.weight_scheme);
    t.read("weighted_evcent", v.network.weighted_evcent);
    t.read_enum("hierarchy", v.network.hierarchy);
    t.finish();
  }
  {
    auto t = r.sub("roles");
    t.read("threshold_fraction", v.roles.threshold_fraction);
    t.read("recent_months", v.roles.recent_months);
    t.read("role_metric", v.roles.role_metric);
    t.finish();
    if (!(v.roles.threshold_fraction > 0 && v.roles.threshold_fraction <= 1))
      throw ConfigError("key '" + t.key_path("threshold_fraction") + "' must lie in (0, 1]");
    static const std::set<std::string> metrics{"loc", "commits", "degree", "evcent", "hierarchy"};
    if (!metrics.count(v.roles.role_metric))
      throw ConfigError("invalid value '" + v.roles.role_metric + "' for key '" + t.key_path("role_metric") + "'");
  }
  {
    auto t = r.sub("brooks");
    t.read_enum("window_unit", v.brooks.window.unit);
    t.read("window_length", v.brooks.window.amount);
    if (t.has("control_sets")) {
      const toml::node* n = t.node("control_sets");
      const auto* arr = n->as_array();
      if (!arr) throw ConfigError("key '" + t.key_path("control_sets") + "' must be an array of arrays");
      static const std::set<std::string> allowed{"mean_in_degree", "mean_fmodr", "n_nodes"};
      v.brooks.control_sets.clear();
      for (const auto& e : *arr) {
        const auto* inner = e.as_array();
        if (!inner) throw ConfigError("key '" + t.key_path("control_sets") + "' must be an array of arrays");
        std::vector<std::string> set;
        for (const auto& s : *inner) {
          auto name = s.value<std::string>();
          if (!name || !allowed.count(*name))
            throw ConfigError("invalid control in '" + t.key_path("control_sets") + "'");
          set.push_back(*name);
        }
        v.brooks.control_sets.push_back(set);
      }
    }
    auto tr = t.sub("transforms");
    for (auto& [metric, transform] : v.brooks.transforms) tr.read_enum(metric, transform);
    tr.finish();
    t.finish();
  }
  {
    auto t = r.sub("turnover");
    t.read("interval_weeks", v.turnover.interval_weeks);
    t.read("period_months", v.turnover.period_months);
    t.read_enum("branch_mode", v.turnover.branch_mode);
    if (auto b = t.get<std::int64_t>("resamples")) {
      if (*b < 1) throw ConfigError("key '" + t.key_path("resamples") + "' must be at least 1");
      v.turnover.resamples = static_cast<std::size_t>(*b);
    }
    t.read("level", v.turnover.level);
    if (auto p = t.get<std::int64_t>("analysis_period")) v.turnover.analysis_period = *p;
    t.finish();
  }
  {
    auto t = r.sub("studies");
    if (t.has("enabled")) {
      auto list = t.strings("enabled");
      v.studies = {false, false, false};
      for (const auto& s : list) {
        if (s == "roles") v.studies.roles = true;
        else if (s == "brooks") v.studies.brooks = true;
        else if (s == "turnover") v.studies.turnover = true;
        else throw ConfigError("invalid value '" + s + "' for key '" + t.key_path("enabled") + "'");
      }
    }
    t.finish();
  }
  {
    auto t = r.sub("seeds");
    if (auto s = t.get<std::int64_t>("bootstrap")) v.seed = static_cast<std::uint64_t>(*s);
    t.finish();
  }
  r.finish();
  return v;
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline Config parse(std::string_view text, const std::filesystem::path& base_dir = ".") {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("config does not parse: ") + std::string(e.description()));
  }
  TableReader top(&root, "");
  Config cfg;
  {
    auto p = top.sub("project");
    p.read("name", cfg.project.name);
    auto repo = p.get<std::string>("repo");
    if (!repo) throw ConfigError("key 'project.repo' is required");
    cfg.project.repo = resolve_path(base_dir, *repo);
    p.read("branch", cfg.project.branch);
    if (auto s = p.get<std::string>("bugfix_list")) cfg.project.bugfix_list = resolve_path(base_dir, *s);
    if (auto s = p.get<std::string>("module_map")) cfg.project.module_map = resolve_path(base_dir, *s);
    if (auto s = p.get<std::string>("loc_table")) cfg.project.loc_table = resolve_path(base_dir, *s);
    if (auto s = p.get<std::string>("window_origin")) cfg.project.window_origin = parse_iso8601(*s, "project.window_origin");
    if (auto s = p.get<std::string>("window_end")) cfg.project.window_end = parse_iso8601(*s, "project.window_end");
    if (auto k = p.get<std::int64_t>("trend_windows")) {
      if (*k < 3) throw ConfigError("key 'project.trend_windows' must be at least 3");
      cfg.project.trend_k = static_cast<std::size_t>(*k);
    }
    p.finish();
  }
  VariantConfig base;
  const toml::node* vs = top.node("variant");
  if (!vs) throw ConfigError("config declares no [[variant]]");
  const auto* arr = vs->as_array();
  if (!arr || !arr->is_array_of_tables()) throw ConfigError("key 'variant' must be an array of tables");
  std::set<std::string> names;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    TableReader r((*arr)[i].as_table(), "variant[" + std::to_string(i) + "]");
    auto v = parse_variant(r, base);
    if (!names.insert(v.name).second) throw ConfigError("duplicate variant name '" + v.name + "'");
    cfg.variants.push_back(std::move(v));
  }
  top.finish();
  return cfg;
}

inline Config load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = csv::read_file(path.string());
  } catch (const Error&) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  return parse(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Resolved configuration as JSON (for metadata and provenance)

inline nlohmann::ordered_json to_json(const VariantConfig& v) {
  nlohmann::ordered_json j;
  j["name"] = v.name;
  j["extraction"] = {{"branch_mode", enum_name(v.extraction.branch_mode)},
                     {"timestamp", enum_name(v.extraction.timestamp)}};
  j["filters"] = {{"allow_extensions", v.filters.allow_extensions},
                  {"allow_patterns", v.filters.allow_patterns},
                  {"deny_extensions", v.filters.deny_extensions},
                  {"deny_patterns", v.filters.deny_patterns},
                  {"drop_binary", v.filters.drop_binary},
                  {"order", enum_name(v.filters.order)}};
  j["identity"] = {{"mode", enum_name(v.identity.mode)},
                   {"threshold", v.identity.threshold},
                   {"scope", enum_name(v.identity.scope)}};
  j["entities"] = {{"mode", enum_name(v.entities.mode)}, {"gap", v.entities.gap}, {"fallback", v.entities.fallback}};
  j["windows"] = {{"unit", enum_name(v.windows.length.unit)},
                  {"length", v.windows.length.amount},
                  {"step", v.windows.step ? nlohmann::ordered_json(*v.windows.step) : nlohmann::ordered_json()}};
  j["network"] = {{"variant", enum_name(v.network.variant)},
                  {"weight_scheme", enum_name(v.network.weight_scheme)},
                  {"weighted_evcent", v.network.weighted_evcent},
                  {"hierarchy", enum_name(v.network.hierarchy)}};
  j["roles"] = {{"threshold_fraction", v.roles.threshold_fraction},
                {"recent_months", v.roles.recent_months},
                {"role_metric", v.roles.role_metric}};
  nlohmann::ordered_json transforms;
  for (const auto& [m, t] : v.brooks.transforms) transforms[m] = enum_name(t);
  j["brooks"] = {{"window_unit", enum_name(v.brooks.window.unit)},
                 {"window_length", v.brooks.window.amount},
                 {"control_sets", v.brooks.control_sets},
                 {"transforms", transforms}};
  j["turnover"] = {{"interval_weeks", v.turnover.interval_weeks},
                   {"period_months", v.turnover.period_months},
                   {"branch_mode", enum_name(v.turnover.branch_mode)},
                   {"resamples", v.turnover.resamples},
                   {"level", v.turnover.level},
                   {"analysis_period", v.turnover.analysis_period ? nlohmann::ordered_json(*v.turnover.analysis_period)
                                                                  : nlohmann::ordered_json()}};
  std::vector<std::string> enabled;
  if (v.studies.roles) enabled.push_back("roles");
  if (v.studies.brooks) enabled.push_back("brooks");
  if (v.studies.turnover) enabled.push_back("turnover");
  j["studies"] = {{"enabled", enabled}};
  j["seeds"] = {{"bootstrap", v.seed}};
  return j;
}

inline nlohmann::ordered_json to_json(const ProjectConfig& p) {
  auto opt_path = [](const std::optional<std::filesystem::path>& x) {
    return x ? nlohmann::ordered_json(x->string()) : nlohmann::ordered_json();
  };
  auto opt_time = [](const std::optional<std::int64_t>& x) {
    return x ? nlohmann::ordered_json(windows::iso8601(*x)) : nlohmann::ordered_json();
  };
  return {{"name", p.name},
          {"repo", p.repo.string()},
          {"branch", p.branch},
          {"bugfix_list", opt_path(p.bugfix_list)},
          {"module_map", opt_path(p.module_map)},
          {"loc_table", opt_path(p.loc_table)},
          {"window_origin", opt_time(p.window_origin)},
          {"window_end", opt_time(p.window_end)},
          {"trend_windows", p.trend_k}};
}

namespace detail {

inline void flatten(const nlohmann::ordered_json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace detail

// Dotted keys whose values differ between two variants (the name excluded).
inline std::vector<std::string> differing_keys(const VariantConfig& a, const VariantConfig& b) {
  std::map<std::string, std::string> fa, fb;
  detail::flatten(to_json(a), "", fa);
  detail::flatten(to_json(b), "", fb);
  std::vector<std::string> out;
  for (const auto& [k, v] : fa)
    if (k != "name" && fb[k] != v) out.push_back(k);
  return out;
}

}  // namespace msrlab::config
