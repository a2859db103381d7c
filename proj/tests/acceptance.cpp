// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "msrlab/msrlab.hpp"

namespace fs = std::filesystem;
using namespace msrlab;
using fixtures::day;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ProcessResult cli(const std::vector<std::string>& args) {
  std::vector<std::string> argv{MSRLAB_CLI_PATH};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_process(argv);
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::vector<std::int64_t> column_ints(const fs::path& csv_path, const std::string& col) {
  auto t = csv::read_table(csv_path.string());
  std::vector<std::int64_t> out;
  for (const auto& row : t.rows) out.push_back(csv::to_int(row.at(t.column(col))).value_or(-1));
  return out;
}

// ---------------------------------------------------------------------------

Outcome branch_mode_divergence() {
  Outcome o;
  fixtures::Repo repo("acc-f1");
  fixtures::build_branch_fixture(repo);
  auto dir = fixtures::scratch_dir("acc-c1");
  auto cfg = dir / "cfg.toml";
  std::ofstream(cfg) << "[project]\nname = \"f1\"\nrepo = \"" << repo.path().string()
                     << "\"\nbranch = \"main\"\nwindow_origin = \"2020-01-01\"\nwindow_end = \"2021-01-01\"\n"
                        "[[variant]]\nname = \"single\"\nwindows.length = 2\nextraction.branch_mode = \"single_branch\"\n"
                        "[[variant]]\nname = \"all\"\nwindows.length = 2\nextraction.branch_mode = \"all_branches\"\n";
  auto t0 = std::chrono::steady_clock::now();
  auto r = cli({"extract", "--config", cfg.string(), "--out", (dir / "out").string()});
  double elapsed = seconds_since(t0);
  o.require(r.exit_code == 0, "extract exited " + std::to_string(r.exit_code) + ": " + r.err);
  if (!o.pass) return o;

  // Oracle: rev-list hashes binned by author time into two-month windows.
  std::vector<std::int64_t> bounds;
  for (int m = 0; m <= 12; m += 2) {
    std::tm tm{};
    tm.tm_year = 2020 - 1900 + (m == 12 ? 1 : 0);
    tm.tm_mon = m % 12;
    tm.tm_mday = 1;
    bounds.push_back(static_cast<std::int64_t>(timegm(&tm)));
  }
  auto oracle = [&](const std::vector<std::string>& rev_args) {
    std::vector<std::int64_t> counts(bounds.size() - 1, 0);
    for (const auto& h : repo.rev_list(rev_args)) {
      auto out = repo.git({"show", "-s", "--format=%at", h});
      auto t = std::stoll(out);
      for (std::size_t w = 0; w + 1 < bounds.size(); ++w)
        if (t >= bounds[w] && t < bounds[w + 1]) ++counts[w];
    }
    return counts;
  };
  auto want_single = oracle({"main"});
  auto want_all = oracle({"--all"});
  auto got_single = column_ints(dir / "out/facts/single/baseline.csv", "commits");
  auto got_all = column_ints(dir / "out/facts/all/baseline.csv", "commits");
  o.require(got_single == want_single, "single-branch counts differ from rev-list oracle");
  o.require(got_all == want_all, "all-branch counts differ from rev-list oracle");
  o.require(got_single != got_all, "variants do not differ in any window");
  o.require(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s");
  std::ostringstream d;
  d << "windows=" << got_all.size() << " single=" << std::accumulate(got_single.begin(), got_single.end(), 0LL)
    << " all=" << std::accumulate(got_all.begin(), got_all.end(), 0LL) << " runtime=" << elapsed << "s";
  if (o.pass) o.detail = d.str();
  fs::remove_all(dir);
  return o;
}

gitio::FileDiff diff_with_runs(const std::vector<std::pair<std::int64_t, std::int64_t>>& runs) {
  gitio::FileDiff d;
  d.path = "f.c";
  for (auto [start, n] : runs) {
    gitio::Hunk h{start, n, start, n, {}, {}};
    for (std::int64_t k = 0; k < n; ++k) {
      h.added.push_back("x");
      h.deleted.push_back("y");
    }
    d.hunks.push_back(h);
  }
  return d;
}

Outcome entity_mode_divergence() {
  using namespace entities;
  Outcome o;
  fixtures::Repo repo("acc-f2");
  auto hash = fixtures::build_multi_hunk_fixture(repo);
  gitio::Repository r(repo.path());
  auto h = r.extract_history(gitio::BranchMode::single_branch, "main");
  const auto& c = h.commits.back();
  gitio::FileFilter keep_all(gitio::FilterConfig{});
  auto distinct = pipeline::commit_entity_changes(r, c, "d", keep_all, {CountingMode::distinct_blocks, 0, true});
  auto summary = pipeline::commit_entity_changes(r, c, "d", keep_all, {CountingMode::summarise_per_entity, 0, true});
  o.require(c.hash == hash, "fixture head mismatch");
  o.require(distinct.size() == 3, "distinct_blocks gave " + std::to_string(distinct.size()) + " records");
  o.require(summary.size() == 1, "summarise_per_entity gave " + std::to_string(summary.size()) + " records");

  std::mt19937_64 gen(7);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EntitySpan> spans;
    std::int64_t line = 1;
    for (int k = 0; k < 4; ++k) {
      std::int64_t start = line + static_cast<std::int64_t>(gen() % 4);
      std::int64_t end = start + 2 + static_cast<std::int64_t>(gen() % 10);
      spans.push_back({"f.c", EntityKind::function, "fn" + std::to_string(k), start, end});
      line = end + 1;
    }
    std::vector<std::pair<std::int64_t, std::int64_t>> runs;
    std::int64_t at = 1;
    while (at < line) {
      at += static_cast<std::int64_t>(gen() % 6) + 1;
      std::int64_t n = static_cast<std::int64_t>(gen() % 3) + 1;
      runs.emplace_back(at, n);
      at += n;
    }
    auto lines = changed_lines(diff_with_runs(runs));
    auto gap = static_cast<std::int64_t>(gen() % 3);
    auto s = map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, gap, true}, "c", "f.c", "d");
    auto d = map_changes_to_entities(lines, spans, spans, {CountingMode::distinct_blocks, gap, true}, "c", "f.c", "d");
    if (d.size() < s.size()) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " random diffs with distinct < summarise");
  if (o.pass) o.detail = "F2 distinct=3 summarise=1; 1000 random diffs hold";
  return o;
}

Outcome kappa_oracle() {
  Outcome o;
  double worst = 0;
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 8; ++n)
    for (unsigned ma = 0; ma < (1u << n); ++ma)
      for (unsigned mb = 0; mb < (1u << n); ++mb) {
        std::vector<int> a(n), b(n);
        double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
        for (std::size_t i = 0; i < n; ++i) {
          a[i] = (ma >> i) & 1;
          b[i] = (mb >> i) & 1;
          if (a[i] && b[i]) ++n11;
          else if (a[i]) ++n10;
          else if (b[i]) ++n01;
          else ++n00;
        }
        double N = static_cast<double>(n);
        double po = (n11 + n00) / N;
        double pe = ((n11 + n10) / N) * ((n11 + n01) / N) + ((n00 + n01) / N) * ((n00 + n10) / N);
        if (pe == 1.0) {
          bool threw = false;
          try {
            stats::cohen_kappa(a, b);
          } catch (const UndefinedStatisticError&) {
            threw = true;
          }
          o.require(threw, "degenerate pair did not raise");
          continue;
        }
        worst = std::max(worst, std::abs(stats::cohen_kappa(a, b) - (po - pe) / (1 - pe)));
        ++checked;
      }
  o.require(worst < 1e-12, "max abs error " + std::to_string(worst));
  o.require(stats::kappa_band(0.27) == stats::KappaBand::fair, "0.27 is not fair");
  o.require(stats::kappa_band(0.82) == stats::KappaBand::almost_perfect, "0.82 is not almost perfect");
  const std::vector<std::pair<double, stats::KappaBand>> edges{
      {-0.01, stats::KappaBand::poor},       {0.0, stats::KappaBand::slight},   {0.2, stats::KappaBand::slight},
      {0.21, stats::KappaBand::fair},        {0.4, stats::KappaBand::fair},     {0.41, stats::KappaBand::moderate},
      {0.6, stats::KappaBand::moderate},     {0.61, stats::KappaBand::substantial},
      {0.8, stats::KappaBand::substantial},  {0.81, stats::KappaBand::almost_perfect},
      {1.0, stats::KappaBand::almost_perfect}};
  for (auto [k, band] : edges) o.require(stats::kappa_band(k) == band, "band edge " + std::to_string(k));
  std::ostringstream d;
  d << checked << " pairs, max abs error " << worst;
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome centrality_oracle() {
  Outcome o;
  auto tri = network::DevNetwork{};
  tri.nodes = {"a", "b", "c"};
  tri.edges = {{"a", "b", 1, 1}, {"b", "c", 1, 1}, {"a", "c", 1, 1}};
  auto m = network::node_metrics(tri);
  o.require(m[0].evcent == m[1].evcent && m[1].evcent == m[2].evcent, "K3 centralities not exactly equal");

  std::mt19937_64 gen(4242);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + gen() % 7;
    network::DevNetwork net;
    net.directed = false;
    for (std::size_t i = 0; i < n; ++i) net.nodes.push_back("v" + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (gen() % 3) net.edges.push_back({net.nodes[i], net.nodes[j], 1.0 + static_cast<double>(gen() % 4), 1});
    auto g = network::symmetrize(net);
    auto ev = network::eigenvector_centrality(g, true);
    auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [j, w] : g.adj[i]) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    double mx = A.maxCoeff();
    Eigen::MatrixXd B = (mx > 0 ? Eigen::MatrixXd(A / mx) : A) + Eigen::MatrixXd::Identity(N, N);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(N).normalized();
    for (int it = 0; it < 512; ++it) x = (B * x).normalized();
    double dot = 0;
    for (std::size_t i = 0; i < n; ++i) dot += ev[i] * x(static_cast<Eigen::Index>(i));
    worst = std::max(worst, 1.0 - dot);
  }
  o.require(worst < 1e-8, "max cosine distance " + std::to_string(worst));
  std::ostringstream d;
  d << "200 graphs, max cosine distance " << worst << ", K3 exact";
  if (o.pass) o.detail = d.str();
  return o;
}

double gaussian(SplitMix64& rng) {
  double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = stats::mean(a), mb = stats::mean(b), sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Outcome regression_recovery() {
  Outcome o;
  // Noiseless generators.
  struct Gen {
    std::vector<std::string> names;
    std::vector<double> beta;
  };
  const std::vector<Gen> gens{{{"(IC)", "TS"}, {4.84, -0.45}},
                              {{"(IC)", "TS", "TS^2"}, {1.5, 0.8, -0.06}},
                              {{"(IC)", "TS", "mean_in_degree", "mean_fmodr"}, {4.84, -0.45, 0.3, -1.2}}};
  double worst = 0;
  SplitMix64 rng(11);
  for (const auto& g : gens) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
      double ts = std::log1p(1.0 + i % 13);
      std::vector<double> row{1.0, ts};
      if (g.names.size() == 3) row.push_back(ts * ts);
      if (g.names.size() == 4) {
        row.push_back(rng.uniform() * 3);
        row.push_back(rng.uniform());
      }
      double v = 0;
      for (std::size_t k = 0; k < row.size(); ++k) v += g.beta[k] * row[k];
      X.push_back(row);
      y.push_back(v);
    }
    auto fit = stats::ols(X, y, g.names);
    for (std::size_t k = 0; k < g.names.size(); ++k)
      worst = std::max(worst, std::abs(fit.term(g.names[k]).coefficient - g.beta[k]));
  }
  o.require(worst < 1e-9, "noiseless max error " + std::to_string(worst));

  // Noisy generators: coefficient of interest within 3 standard errors.
  int covered = 0;
  double r2_worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SplitMix64 r(1000 + static_cast<std::uint64_t>(trial));
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
      double ts = std::log1p(1.0 + static_cast<double>(r.below(20)));
      double ctrl = r.uniform() * 2;
      X.push_back({1.0, ts, ctrl});
      y.push_back(4.84 - 0.45 * ts + 0.7 * ctrl + 0.3 * gaussian(r));
    }
    auto fit = stats::ols(X, y, {"(IC)", "TS", "ctrl"});
    const auto& ts = fit.term("TS");
    if (std::abs(ts.coefficient - -0.45) <= 3 * ts.standard_error) ++covered;
    double rr = corr(fit.fitted, y);
    r2_worst = std::max(r2_worst, std::abs(rr * rr - fit.r2));
  }
  o.require(covered >= 99, "only " + std::to_string(covered) + "/100 trials within 3 SE");
  o.require(r2_worst < 1e-10, "r2 identity error " + std::to_string(r2_worst));
  std::ostringstream d;
  d << "noiseless max error " << worst << ", " << covered << "/100 within 3 SE, r2 identity error " << r2_worst;
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome turnover_oracle() {
  using namespace turnover;
  Outcome o;
  // Bit (d, t) = developer d active in interval t. Each active developer
  // touches a fixed module pattern so that internal roles vary.
  auto modules_of = [](int d, int t) -> std::vector<std::string> {
    if (d == 0) return {"m"};
    if (d == 1) return {t == 0 ? "m" : "n"};
    return t == 0 ? std::vector<std::string>{"m"} : std::vector<std::string>{"m", "n"};
  };
  std::size_t mismatches = 0;
  for (unsigned pattern = 0; pattern < 64; ++pattern) {
    std::vector<Contribution> contrib;
    std::set<std::string> e[2];
    std::map<std::string, std::set<std::string>> in[2];  // module -> devs
    std::map<std::pair<std::string, std::string>, std::int64_t> churn;
    for (int d = 0; d < 3; ++d)
      for (int t = 0; t < 2; ++t) {
        if (!(pattern & (1u << (d * 2 + t)))) continue;
        std::string dev = "dev" + std::to_string(d);
        e[t].insert(dev);
        for (const auto& m : modules_of(d, t)) {
          std::int64_t c = 1 + d * 10 + t * 100;
          contrib.push_back({static_cast<std::size_t>(t), dev, m, c});
          in[t][m].insert(dev);
          churn[{dev, m}] += c;
        }
      }
    auto got = group_activity(contrib, 2);
    std::map<std::string, GroupActivity> want;
    for (const auto& [key, c] : churn) {
      const auto& [dev, m] = key;
      auto& g = want[m];
      bool b = e[0].count(dev), a = e[1].count(dev);
      if (!b && a) g.ena += c;
      else if (b && !a) g.ela += c;
      else {
        bool ib = in[0][m].count(dev), ia = in[1][m].count(dev);
        if (!ib && ia) g.ina += c;
        else if (ib && !ia) g.ila += c;
        else g.sta += c;
      }
    }
    for (const auto& m : {"m", "n"})
      for (const auto& metric : group_metrics())
        if (got[m].get(metric) != want[m].get(metric)) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " pattern/module/group mismatches");

  std::mt19937_64 gen(99);
  std::size_t leaks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + gen() % 10;
    std::vector<Contribution> contrib;
    std::int64_t expected = 0;
    for (std::size_t i = 0, count = gen() % 40; i < count; ++i) {
      Contribution c{gen() % n, "d" + std::to_string(gen() % 6), "m" + std::to_string(gen() % 4),
                     static_cast<std::int64_t>(gen() % 100)};
      expected += c.churn * ((c.interval > 0 ? 1 : 0) + (c.interval + 1 < n ? 1 : 0));
      contrib.push_back(c);
    }
    std::int64_t total = 0;
    for (const auto& [m, g] : group_activity(contrib, n)) total += g.total();
    if (total != expected) ++leaks;
  }
  o.require(leaks == 0, std::to_string(leaks) + " random fixtures do not conserve churn");
  if (o.pass) o.detail = "64 patterns match; churn conserved on 1000 fixtures";
  return o;
}

std::string ci_text(const stats::ConfidenceInterval& ci) {
  return csv::format_double(ci.lo) + "," + csv::format_double(ci.hi) + "," + std::to_string(ci.skipped);
}

struct DocFlipFixture {
  fixtures::Repo repo{"acc-f3"};
  fs::path dir = fixtures::scratch_dir("acc-f3-inputs");
  std::string project;

  DocFlipFixture() {
    std::map<std::string, std::int64_t> loc;
    auto fix = fixtures::build_doc_flip_fixture(repo, loc);
    std::ofstream(dir / "fixes.txt") << fix << "\n";
    std::ofstream locs(dir / "loc.csv");
    locs << "module,loc\n";
    for (const auto& [m, n] : loc) locs << m << "," << n << "\n";
    locs.close();
    project = "[project]\nname = \"f3\"\nrepo = \"" + repo.path().string() + "\"\nbranch = \"main\"\n" +
              "bugfix_list = \"" + (dir / "fixes.txt").string() + "\"\nloc_table = \"" + (dir / "loc.csv").string() +
              "\"\nwindow_origin = \"2021-01-01\"\nwindow_end = \"2021-07-01\"\n";
  }
  ~DocFlipFixture() { fs::remove_all(dir); }

  fs::path config(const std::string& name, const std::string& variants) const {
    auto p = dir / name;
    std::ofstream(p) << project << variants;
    return p;
  }
};

Outcome bootstrap_determinism() {
  Outcome o;
  std::vector<double> x, y;
  SplitMix64 rng(5);
  for (int i = 0; i < 25; ++i) {
    x.push_back(static_cast<double>(rng.below(50)));
    y.push_back(x.back() * 0.3 + static_cast<double>(rng.below(30)));
  }
  auto a = ci_text(stats::bootstrap_ci(x, y, 2000, 77, 0.95, stats::spearman, 1));
  auto b = ci_text(stats::bootstrap_ci(x, y, 2000, 77, 0.95, stats::spearman, 1));
  auto c = ci_text(stats::bootstrap_ci(x, y, 2000, 77, 0.95, stats::spearman, 8));
  o.require(a == b, "two runs differ");
  o.require(a == c, "jobs 1 and jobs 8 differ");

  DocFlipFixture f3;
  auto cfg = f3.config("c7.toml", "[[variant]]\nname = \"v\"\nstudies.enabled = [\"turnover\"]\n");
  auto r1 = cli({"turnover", "--config", cfg.string(), "--out", (f3.dir / "j1").string(), "--jobs", "1"});
  auto r8 = cli({"turnover", "--config", cfg.string(), "--out", (f3.dir / "j8").string(), "--jobs", "8"});
  o.require(r1.exit_code == 0 && r8.exit_code == 0, "turnover run failed: " + r1.err + r8.err);
  if (r1.exit_code == 0 && r8.exit_code == 0)
    o.require(slurp(f3.dir / "j1/studies/v/turnover_ci.csv") == slurp(f3.dir / "j8/studies/v/turnover_ci.csv"),
              "CLI CI tables differ between --jobs 1 and --jobs 8");

  std::vector<double> mx, my;
  for (int i = 0; i < 20; ++i) {
    mx.push_back(i);
    my.push_back(std::exp(0.2 * i));
  }
  auto mono = stats::bootstrap_ci(mx, my, 2000, 3);
  o.require(mono.lo == 1.0 && mono.hi == 1.0, "monotone CI is not [1, 1]");
  o.require(stats::significance({0.2, 0.9}) == stats::Significance::positive, "positive class");
  o.require(stats::significance({-0.9, -0.2}) == stats::Significance::negative, "negative class");
  o.require(stats::significance({-0.2, 0.9}) == stats::Significance::none, "straddling class");
  if (o.pass) o.detail = "CI " + a + " identical across runs and jobs; monotone CI [1, 1]";
  return o;
}

Outcome conclusion_instability() {
  Outcome o;
  DocFlipFixture f3;
  auto flip = f3.config("c8.toml",
                        "[[variant]]\nname = \"with_docs\"\nstudies.enabled = [\"turnover\"]\n"
                        "[[variant]]\nname = \"no_docs\"\nstudies.enabled = [\"turnover\"]\n"
                        "filters.deny_extensions = [\".md\"]\n");
  auto same = f3.config("c8same.toml",
                        "[[variant]]\nname = \"a\"\nstudies.enabled = [\"turnover\"]\n"
                        "[[variant]]\nname = \"b\"\nstudies.enabled = [\"turnover\"]\n");
  auto r = cli({"compare", "--config", flip.string(), "--out", (f3.dir / "flip").string()});
  o.require(r.exit_code == 0, "compare exited " + std::to_string(r.exit_code) + ": " + r.err);
  auto s = cli({"compare", "--config", same.string(), "--out", (f3.dir / "same").string()});
  o.require(s.exit_code == 0, "identical compare exited " + std::to_string(s.exit_code));
  if (!o.pass) return o;

  auto conflicts = [](const fs::path& p) {
    auto t = csv::read_table(p.string());
    std::vector<std::string> out;
    for (const auto& row : t.rows)
      if (row.at(t.column("verdict")) == "conflict") out.push_back(row.at(t.column("detail")));
    return out;
  };
  auto c = conflicts(f3.dir / "flip/compare/verdicts.csv");
  o.require(c.size() == 1, std::to_string(c.size()) + " conflict verdicts");
  if (c.size() == 1) o.require(c[0].find("filters.deny_extensions") != std::string::npos, "flag missing: " + c[0]);
  auto z = conflicts(f3.dir / "same/compare/verdicts.csv");
  o.require(z.empty(), std::to_string(z.size()) + " conflicts between identical configurations");
  if (o.pass) o.detail = c[0];
  return o;
}

Outcome desk_scale() {
  Outcome o;
  std::unique_ptr<fixtures::Repo> synthetic;
  fs::path repo_path;
  std::string branch = "main";
  std::string source;
  std::string bugfix_line;
  auto dir = fixtures::scratch_dir("acc-c9");
  if (const char* real = std::getenv("MSRLAB_REAL_REPO"); real && *real) {
    repo_path = real;
    branch = "HEAD";
    source = "repository " + repo_path.string();
  } else {
    synthetic = std::make_unique<fixtures::Repo>("acc-synthetic");
    auto fixes = fixtures::build_synthetic_history(*synthetic, 200, 2024);
    repo_path = synthetic->path();
    std::ofstream list(dir / "fixes.txt");
    for (const auto& h : fixes) list << h << "\n";
    bugfix_line = "bugfix_list = \"" + (dir / "fixes.txt").string() + "\"\n";
    source = "synthetic 200-commit history";
  }
  auto cfg = dir / "cfg.toml";
  std::ofstream(cfg) << "[project]\nname = \"desk\"\nrepo = \"" << repo_path.string() << "\"\nbranch = \"" << branch
                     << "\"\n" << bugfix_line
                     << "[[variant]]\nname = \"default\"\nbrooks.window_length = 3\nturnover.resamples = 1000\n"
                        "[[variant]]\nname = \"alternative\"\nbrooks.window_length = 3\nturnover.resamples = 1000\n"
                        "extraction.branch_mode = \"all_branches\"\nentities.mode = \"distinct_blocks\"\n"
                        "filters.deny_extensions = [\".md\"]\nidentity.mode = \"edit_distance\"\n";
  auto t0 = std::chrono::steady_clock::now();
  auto r = cli({"compare", "--config", cfg.string(), "--out", (dir / "a").string()});
  double elapsed = seconds_since(t0);
  o.require(r.exit_code == 0, "compare exited " + std::to_string(r.exit_code) + ": " + r.err);
  o.require(elapsed < 60.0, "runtime " + std::to_string(elapsed) + " s");
  if (r.exit_code != 0) return o;

  std::vector<std::string> declared{"report.md", "compare/verdicts.csv", "compare/baseline.csv",
                                    "compare/roles_cross_variant.csv"};
  for (const auto& m : agreement::baseline_metrics()) declared.push_back("compare/baseline_" + m + ".svg");
  for (const std::string v : {"default", "alternative"}) {
    for (const std::string f : {"commits", "file_changes", "identities", "entity_changes", "windows", "baseline"})
      declared.push_back("facts/" + v + "/" + f + ".csv");
    declared.push_back("networks/" + v + "/network_metrics.csv");
    declared.push_back("networks/" + v + "/edges_w0.csv");
    for (const std::string f : {"roles_agreement.csv", "roles_agreement_all.csv", "roles_core.csv", "hierarchy.csv",
                                "hierarchy_slopes.csv", "hierarchy.svg", "brooks_metrics.csv", "brooks_models.csv",
                                "brooks_correlation.csv", "brooks_commits.svg", "brooks_delta_functions.svg",
                                "brooks_halstead_effort.svg", "turnover_activity.csv", "turnover_ci.csv",
                                "turnover_summary.csv"})
      declared.push_back("studies/" + v + "/" + f);
  }
  for (const auto& rel : declared) o.require(fs::exists(dir / "a" / rel), "missing " + rel);

  std::size_t csvs = 0, svgs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    auto p = e.path();
    if (p.extension() == ".csv") {
      ++csvs;
      fs::path meta = p.string() + ".meta.json";
      if (!fs::exists(meta)) {
        o.require(false, "no metadata for " + p.string());
        continue;
      }
      auto j = nlohmann::json::parse(slurp(meta));
      o.require(j.contains("tool") && j.contains("project") && (j.contains("variant") || j.contains("variants")),
                "incomplete metadata for " + p.string());
    } else if (p.extension() == ".svg") {
      ++svgs;
      o.require(slurp(p).find("<metadata>{&quot;tool&quot;") != std::string::npos, "no metadata in " + p.string());
    }
  }
  auto r2 = cli({"compare", "--config", cfg.string(), "--out", (dir / "b").string()});
  o.require(r2.exit_code == 0, "rerun failed");
  o.require(tree_contents(dir / "a") == tree_contents(dir / "b"), "rerun is not byte-identical");
  std::ostringstream d;
  d << source << ", " << csvs << " CSV, " << svgs << " SVG, runtime " << elapsed << "s, rerun identical";
  if (o.pass) o.detail = d.str();
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"branch-mode divergence", branch_mode_divergence},
      {"entity-mode divergence", entity_mode_divergence},
      {"kappa oracle", kappa_oracle},
      {"centrality oracle", centrality_oracle},
      {"regression recovery", regression_recovery},
      {"turnover oracle", turnover_oracle},
      {"bootstrap determinism", bootstrap_determinism},
      {"conclusion instability", conclusion_instability},
      {"desk-scale end to end", desk_scale}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu: %s %s (%.2fs) %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
