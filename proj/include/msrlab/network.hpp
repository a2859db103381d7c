#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/entities.hpp"
#include "msrlab/error.hpp"

namespace msrlab::network {

enum class Variant { temporal_entity, line_ownership, bipartite_projection };
enum class WeightScheme { count_per_prior_dev, count_once };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::temporal_entity: return "temporal_entity";
    case Variant::line_ownership: return "line_ownership";
    default: return "bipartite_projection";
  }
}
inline std::string to_string(WeightScheme w) {
  return w == WeightScheme::count_per_prior_dev ? "count_per_prior_dev" : "count_once";
}

// Parallel edges between the same ordered pair are stored once with their
// count in `multiplicity`; `weight` is the summed weight.
struct Edge {
  std::string src;
  std::string dst;
  double weight = 0;
  std::int64_t multiplicity = 1;
};

struct DevNetwork {
  std::int64_t window = 0;
  std::vector<std::string> nodes;  // sorted, unique
  std::vector<Edge> edges;         // sorted by (src, dst)
  bool directed = true;
  Variant variant = Variant::temporal_entity;

  std::int64_t edge_count() const {
    std::int64_t n = 0;
    for (const auto& e : edges) n += e.multiplicity;
    return n;
  }
};

namespace detail {

struct EdgeAccumulator {
  std::map<std::pair<std::string, std::string>, Edge> edges;
  std::set<std::string> nodes;

  void add(const std::string& src, const std::string& dst, double weight, std::int64_t multiplicity) {
    if (src == dst) return;
    auto& e = edges.try_emplace({src, dst}, Edge{src, dst, 0, 0}).first->second;
    e.weight += weight;
    e.multiplicity += multiplicity;
  }

  DevNetwork finish(std::int64_t window, bool directed, Variant variant) {
    DevNetwork net;
    net.window = window;
    net.directed = directed;
    net.variant = variant;
    for (auto& [key, e] : edges) {
      nodes.insert(e.src);
      nodes.insert(e.dst);
      net.edges.push_back(std::move(e));
    }
    net.nodes.assign(nodes.begin(), nodes.end());
    return net;
  }
};

}  // namespace detail

// `changes` must be in commit order, (commit_time, hash). A change by d to an
// entity previously changed by others adds d's changed lines as weight to an
// edge d -> each prior developer, or only to the most recent one.
inline DevNetwork build_temporal_entity_network(const std::vector<entities::EntityChange>& changes,
                                                WeightScheme scheme, const std::vector<std::string>& active = {},
                                                std::int64_t window = 0) {
  detail::EdgeAccumulator acc;
  acc.nodes.insert(active.begin(), active.end());
  // entity -> prior contributors, most recent last
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> history;
  for (const auto& c : changes) {
    acc.nodes.insert(c.dev);
    auto& prior = history[{c.path, c.entity_name}];
    if (scheme == WeightScheme::count_per_prior_dev) {
      std::set<std::string> seen;
      for (const auto& p : prior)
        if (p != c.dev && seen.insert(p).second)
          acc.add(c.dev, p, static_cast<double>(c.lines_changed), 1);
    } else {
      for (auto it = prior.rbegin(); it != prior.rend(); ++it) {
        if (*it != c.dev) {
          acc.add(c.dev, *it, static_cast<double>(c.lines_changed), 1);
          break;
        }
      }
    }
    auto pos = std::find(prior.begin(), prior.end(), c.dev);
    if (pos != prior.end()) prior.erase(pos);
    prior.push_back(c.dev);
  }
  for (auto& [key, e] : acc.edges) e.multiplicity = 1;
  return acc.finish(window, true, Variant::temporal_entity);
}

// One modified (deleted or rewritten) pre-image line of a commit.
struct LineModification {
  std::string commit;
  std::string dev;
  std::string path;
  std::int64_t line = 0;
  std::optional<std::string> owner;  // absent when the pre-image has no known owner
};

// One parallel edge modifier -> owner per modified line owned by someone else.
inline DevNetwork build_line_ownership_network(const std::vector<LineModification>& mods,
                                               const std::vector<std::string>& active = {},
                                               std::int64_t window = 0) {
  detail::EdgeAccumulator acc;
  acc.nodes.insert(active.begin(), active.end());
  for (const auto& m : mods) {
    acc.nodes.insert(m.dev);
    if (m.owner && *m.owner != m.dev) acc.add(m.dev, *m.owner, 1.0, 1);
  }
  return acc.finish(window, true, Variant::line_ownership);
}

struct DevFileTouch {
  std::string dev;
  std::string path;
};

// Undirected developer graph induced by shared files, weighted by
// sum over shared files of min(changes by d1, changes by d2).
inline DevNetwork build_bipartite_projection(const std::vector<DevFileTouch>& touches,
                                             const std::vector<std::string>& active = {},
                                             std::int64_t window = 0) {
  std::map<std::string, std::map<std::string, std::int64_t>> per_file;
  std::set<std::string> nodes(active.begin(), active.end());
  for (const auto& t : touches) {
    per_file[t.path][t.dev] += 1;
    nodes.insert(t.dev);
  }
  std::map<std::pair<std::string, std::string>, double> weights;
  for (const auto& [path, devs] : per_file) {
    for (auto a = devs.begin(); a != devs.end(); ++a) {
      for (auto b = std::next(a); b != devs.end(); ++b)
        weights[{a->first, b->first}] += static_cast<double>(std::min(a->second, b->second));
    }
  }
  DevNetwork net;
  net.window = window;
  net.directed = false;
  net.variant = Variant::bipartite_projection;
  net.nodes.assign(nodes.begin(), nodes.end());
  for (const auto& [key, w] : weights) net.edges.push_back({key.first, key.second, w, 1});
  return net;
}

// ---------------------------------------------------------------------------
// Metrics

enum class HierarchyFormula { degree_complement, degree_over_clustering };

inline std::string to_string(HierarchyFormula f) {
  return f == HierarchyFormula::degree_complement ? "degree_complement" : "degree_over_clustering";
}

struct MetricOptions {
  bool weighted_evcent = true;
  HierarchyFormula hierarchy = HierarchyFormula::degree_complement;
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct NodeMetrics {
  std::string dev;
  std::int64_t degree = 0;
  std::optional<std::int64_t> in_degree;  // directed networks only
  double evcent = 0;
  std::optional<double> clustering;       // absent for degree < 2
  double hierarchy = 0;
};

// Undirected simple graph over node indices with summed weights.
struct SimpleGraph {
  std::vector<std::string> nodes;
  std::vector<std::map<std::size_t, double>> adj;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& a : adj) n += a.size();
    return n / 2;
  }
};

inline SimpleGraph symmetrize(const DevNetwork& net) {
  SimpleGraph g;
  g.nodes = net.nodes;
  g.adj.resize(g.nodes.size());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i]] = i;
  for (const auto& e : net.edges) {
    auto a = index.at(e.src), b = index.at(e.dst);
    if (a == b) continue;
    g.adj[a][b] += e.weight;
    g.adj[b][a] += e.weight;
  }
  return g;
}

inline std::vector<std::optional<double>> local_clustering(const SimpleGraph& g) {
  std::vector<std::optional<double>> out(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto k = g.adj[v].size();
    if (k < 2) continue;
    std::size_t links = 0;
    for (auto a = g.adj[v].begin(); a != g.adj[v].end(); ++a)
      for (auto b = std::next(a); b != g.adj[v].end(); ++b)
        if (g.adj[a->first].count(b->first)) ++links;
    out[v] = static_cast<double>(links) / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
  }
  return out;
}

// Dominant eigenvector of the (weighted) adjacency matrix, unit L2 norm.
// Iterates x <- (A/max(A) + I) x from the uniform vector; the identity shift
// keeps bipartite graphs from oscillating and leaves eigenvectors unchanged.
inline std::vector<double> eigenvector_centrality(const SimpleGraph& g, bool weighted = true, double tolerance = 1e-10,
                                                  int max_iterations = 10000) {
  const std::size_t n = g.size();
  if (n == 0) return {};
  double max_w = 0;
  for (const auto& a : g.adj)
    for (const auto& [j, w] : a) max_w = std::max(max_w, weighted ? w : 1.0);
  double scale = max_w > 0 ? 1.0 / max_w : 1.0;
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), next(n);
  for (int it = 1; it <= max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (const auto& [j, w] : g.adj[i]) s += (weighted ? w : 1.0) * scale * x[j];
      next[i] = s;
    }
    double norm = 0;
    for (double v : next) norm += v * v;
    norm = std::sqrt(norm);
    double diff = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= norm;
      diff = std::max(diff, std::abs(next[i] - x[i]));
    }
    std::swap(x, next);
    if (diff < tolerance) return x;
  }
  throw NonConvergenceError("eigenvector centrality did not converge", max_iterations);
}

inline double hierarchy_value(HierarchyFormula f, std::int64_t degree, std::optional<double> clustering) {
  double c = clustering.value_or(0.0);
  auto d = static_cast<double>(degree);
  if (f == HierarchyFormula::degree_complement) return d * (1.0 - c);
  return c > 0 ? d / c : d;
}

inline std::vector<NodeMetrics> node_metrics(const DevNetwork& net, const MetricOptions& opts = {}) {
  if (net.nodes.empty()) throw InvalidArgumentError("node_metrics: empty network");
  auto g = symmetrize(net);
  auto cc = local_clustering(g);
  auto ev = eigenvector_centrality(g, opts.weighted_evcent, opts.tolerance, opts.max_iterations);
  std::map<std::string, std::int64_t> in_deg;
  if (net.directed)
    for (const auto& e : net.edges) in_deg[e.dst] += e.multiplicity;
  std::vector<NodeMetrics> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    NodeMetrics m;
    m.dev = g.nodes[i];
    m.degree = static_cast<std::int64_t>(g.adj[i].size());
    if (net.directed) m.in_degree = in_deg[m.dev];
    m.evcent = ev[i];
    m.clustering = cc[i];
    m.hierarchy = hierarchy_value(opts.hierarchy, m.degree, m.clustering);
    out.push_back(std::move(m));
  }
  return out;
}

struct GraphMetrics {
  std::int64_t n_nodes = 0;
  std::int64_t n_edges = 0;
  double density = 0;
  std::int64_t diameter = 0;
  double global_clustering = 0;
  double mean_in_degree = 0;
};

inline std::vector<std::vector<std::size_t>> components(const SimpleGraph& g) {
  std::vector<int> seen(g.size(), 0);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp;
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      auto v = q.front();
      q.pop_front();
      comp.push_back(v);
      for (const auto& [u, w] : g.adj[v])
        if (!seen[u]) {
          seen[u] = 1;
          q.push_back(u);
        }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

inline std::int64_t eccentricity(const SimpleGraph& g, std::size_t s) {
  std::vector<std::int64_t> dist(g.size(), -1);
  std::deque<std::size_t> q{s};
  dist[s] = 0;
  std::int64_t far = 0;
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    far = std::max(far, dist[v]);
    for (const auto& [u, w] : g.adj[v])
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push_back(u);
      }
  }
  return far;
}

inline GraphMetrics graph_metrics(const DevNetwork& net) {
  if (net.nodes.empty()) throw InvalidArgumentError("graph_metrics: empty network");
  auto g = symmetrize(net);
  GraphMetrics m;
  auto n = static_cast<double>(g.size());
  m.n_nodes = static_cast<std::int64_t>(g.size());
  m.n_edges = net.directed ? net.edge_count() : static_cast<std::int64_t>(g.edge_count());
  m.density = g.size() > 1 ? static_cast<double>(g.edge_count()) / (n * (n - 1) / 2.0) : 0.0;

  auto comps = components(g);
  const std::vector<std::size_t>* largest = &comps.front();
  for (const auto& c : comps)
    if (c.size() > largest->size()) largest = &c;
  for (auto v : *largest) m.diameter = std::max(m.diameter, eccentricity(g, v));

  double closed = 0, triples = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto k = static_cast<double>(g.adj[v].size());
    triples += k * (k - 1) / 2.0;
    for (auto a = g.adj[v].begin(); a != g.adj[v].end(); ++a)
      for (auto b = std::next(a); b != g.adj[v].end(); ++b)
        if (g.adj[a->first].count(b->first)) closed += 1;
  }
  m.global_clustering = triples > 0 ? closed / triples : 0.0;

  if (net.directed) {
    m.mean_in_degree = static_cast<double>(net.edge_count()) / n;
  } else {
    double deg = 0;
    for (const auto& a : g.adj) deg += static_cast<double>(a.size());
    m.mean_in_degree = deg / n;
  }
  return m;
}

struct FmodrResult {
  std::map<std::string, double> per_dev;
  std::optional<double> mean;  // absent when no developer has a known-owner modification
};

inline FmodrResult foreign_modification_ratio(const std::vector<LineModification>& mods) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;  // (foreign, known)
  for (const auto& m : mods) {
    if (!m.owner) continue;
    auto& c = counts[m.dev];
    ++c.second;
    if (*m.owner != m.dev) ++c.first;
  }
  FmodrResult r;
  double sum = 0;
  for (const auto& [dev, c] : counts) {
    double v = static_cast<double>(c.first) / static_cast<double>(c.second);
    r.per_dev[dev] = v;
    sum += v;
  }
  if (!counts.empty()) r.mean = sum / static_cast<double>(counts.size());
  return r;
}

inline std::string edges_csv(const DevNetwork& net) {
  csv::Writer w({"src_dev", "dst_dev", "weight", "multiplicity"});
  for (const auto& e : net.edges)
    w.row({e.src, e.dst, csv::format_double(e.weight), std::to_string(e.multiplicity)});
  return w.str();
}

}  // namespace msrlab::network
