#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msrlab/agreement.hpp"
#include "msrlab/config.hpp"
#include "msrlab/csv.hpp"
#include "msrlab/stats.hpp"

namespace msrlab::report {

namespace fs = std::filesystem;

inline std::optional<csv::Table> try_table(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  return csv::read_table(p.string());
}

inline const std::string& cell(const csv::Table& t, const std::vector<std::string>& row, std::string_view col) {
  return row.at(t.column(col));
}

// Study outputs of one variant as written under `out`.
inline agreement::StudyOutputs read_study_outputs(const fs::path& out, const std::string& variant) {
  agreement::StudyOutputs s;
  s.variant = variant;
  if (auto t = try_table(out / "facts" / variant / "baseline.csv"))
    for (const auto& row : t->rows)
      for (const auto& m : agreement::baseline_metrics()) s.baseline[m].push_back(csv::to_int(cell(*t, row, m)).value_or(0));
  auto studies = out / "studies" / variant;
  if (auto t = try_table(studies / "roles_agreement.csv")) {
    s.has_roles = true;
    for (const auto& row : t->rows) {
      const auto& a = cell(*t, row, "metric_a");
      const auto& b = cell(*t, row, "metric_b");
      if (a >= b) continue;
      s.role_kappa[a + "|" + b] = csv::to_double(cell(*t, row, "mean_kappa"));
    }
  }
  if (auto t = try_table(studies / "brooks_models.csv")) {
    s.has_brooks = true;
    for (const auto& row : t->rows) {
      auto key = cell(*t, row, "target") + "|" + cell(*t, row, "form");
      const auto& term = cell(*t, row, "term");
      if (term == "TS") s.brooks_ts[key] = csv::to_double(cell(*t, row, "coef"));
      else if (term.rfind("absent", 0) == 0) s.brooks_ts[key] = std::nullopt;
    }
  }
  if (auto t = try_table(studies / "turnover_ci.csv")) {
    s.has_turnover = true;
    for (const auto& row : t->rows) s.turnover_significance[cell(*t, row, "metric")] = cell(*t, row, "significance");
  }
  return s;
}

inline std::vector<std::int64_t> window_starts(const fs::path& out, const std::string& variant) {
  std::vector<std::int64_t> starts;
  if (auto t = try_table(out / "facts" / variant / "baseline.csv"))
    for (const auto& row : t->rows)
      starts.push_back(config::parse_iso8601(cell(*t, row, "start_iso8601"), "start_iso8601"));
  return starts;
}

inline std::string or_dash(const std::string& s) { return s.empty() ? "-" : s; }

inline std::string band_of(const std::string& kappa) {
  auto v = csv::to_double(kappa);
  return v ? stats::to_string(stats::kappa_band(*v)) : "-";
}

struct Tally {
  std::size_t agree = 0, differ = 0, conflict = 0;
  std::size_t total() const { return agree + differ + conflict; }
};

inline std::map<std::string, Tally> tally(const csv::Table& verdicts) {
  std::map<std::string, Tally> out;
  for (const auto& row : verdicts.rows) {
    auto& t = out[cell(verdicts, row, "subject")];
    const auto& v = cell(verdicts, row, "verdict");
    if (v == "agree") ++t.agree;
    else if (v == "differ") ++t.differ;
    else ++t.conflict;
  }
  return out;
}

inline std::string answer(const std::map<std::string, Tally>& tallies, const std::string& subject,
                          const std::string& what) {
  auto it = tallies.find(subject);
  if (it == tallies.end() || it->second.total() == 0)
    return "> **Answer.** No cross-variant comparison is available for " + what + ".\n";
  const auto& t = it->second;
  std::string s = "> **Answer.** Of " + std::to_string(t.total()) + " comparisons of " + what + ", " +
                  std::to_string(t.agree) + " agree, " + std::to_string(t.differ) + " differ in magnitude and " +
                  std::to_string(t.conflict) + " reverse the conclusion.";
  s += t.conflict ? " The conclusion depends on the pipeline configuration.\n"
                  : " The conclusion holds across the compared configurations.\n";
  return s;
}

// Markdown summary of every artifact present under `out`.
inline std::string render(const fs::path& out, const config::Config& cfg, const std::vector<std::string>& variants) {
  std::string md;
  md += "# Pipeline comparison report: " + cfg.project.name + "\n\n";
  md += "Tool version: " + std::string(config::kToolVersion) + "\n\n";
  md += "## Variants\n\n| variant | settings that differ from `" + (variants.empty() ? "" : variants.front()) +
        "` |\n|---|---|\n";
  const config::VariantConfig* first = nullptr;
  for (const auto& v : cfg.variants) {
    if (std::find(variants.begin(), variants.end(), v.name) == variants.end()) continue;
    if (!first) first = &v;
    auto keys = config::differing_keys(*first, v);
    md += "| " + v.name + " | " + (keys.empty() ? "-" : agreement::join(keys, ", ")) + " |\n";
  }
  md += "\n";

  auto verdicts = try_table(out / "compare" / "verdicts.csv");
  std::map<std::string, Tally> tallies;
  if (verdicts) tallies = tally(*verdicts);

  md += "## Baseline activity\n\n| variant | windows | commits | files | developers | entities |\n|---|---|---|---|---|---|\n";
  for (const auto& v : variants) {
    auto s = read_study_outputs(out, v);
    std::vector<std::string> cols;
    std::size_t windows = 0;
    for (const auto& m : agreement::baseline_metrics()) {
      std::int64_t sum = 0;
      if (auto it = s.baseline.find(m); it != s.baseline.end()) {
        for (auto x : it->second) sum += x;
        windows = it->second.size();
      }
      cols.push_back(std::to_string(sum));
    }
    md += "| " + v + " | " + std::to_string(windows) + " | " + agreement::join(cols, " | ") + " |\n";
  }
  md += "\nWindow series: ";
  for (const auto& m : agreement::baseline_metrics()) md += "[" + m + "](compare/baseline_" + m + ".svg) ";
  md += "\n\n" + answer(tallies, "baseline_counts", "per-window activity series") + "\n";

  md += "## Developer roles\n\n";
  for (const auto& v : variants) {
    auto t = try_table(out / "studies" / v / "roles_agreement.csv");
    if (!t) continue;
    md += "### " + v + "\n\n| metric pair | mean kappa | band | windows used | windows skipped |\n|---|---|---|---|---|\n";
    for (const auto& row : t->rows) {
      if (cell(*t, row, "metric_a") >= cell(*t, row, "metric_b")) continue;
      const auto& k = cell(*t, row, "mean_kappa");
      md += "| " + cell(*t, row, "metric_a") + " / " + cell(*t, row, "metric_b") + " | " + or_dash(k) + " | " +
            band_of(k) + " | " + cell(*t, row, "windows_used") + " | " + cell(*t, row, "windows_skipped") + " |\n";
    }
    md += "\nHierarchy scatter: [hierarchy.svg](studies/" + v + "/hierarchy.svg)\n\n";
  }
  if (auto t = try_table(out / "compare" / "roles_cross_variant.csv")) {
    md += "### Same metric across variants\n\n| variant a | variant b | metric | kappa | band | common developers |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& row : t->rows)
      md += "| " + cell(*t, row, "variant_a") + " | " + cell(*t, row, "variant_b") + " | " + cell(*t, row, "metric") +
            " | " + or_dash(cell(*t, row, "kappa")) + " | " + band_of(cell(*t, row, "kappa")) + " | " +
            cell(*t, row, "common_developers") + " |\n";
    md += "\n";
  }
  md += answer(tallies, "role_classification", "core/peripheral agreement bands") + "\n";

  md += "## Team size and productivity\n\n";
  for (const auto& v : variants) {
    auto t = try_table(out / "studies" / v / "brooks_models.csv");
    if (!t) continue;
    md += "### " + v + "\n\n| target | model | TS coefficient | SE | adj. R2 | n |\n|---|---|---|---|---|---|\n";
    for (const auto& row : t->rows) {
      const auto& term = cell(*t, row, "term");
      if (term == "TS" || term.rfind("absent", 0) == 0)
        md += "| " + cell(*t, row, "target") + " | " + cell(*t, row, "form") + " | " +
              (term == "TS" ? cell(*t, row, "coef") : term) + " | " + or_dash(cell(*t, row, "se")) + " | " +
              or_dash(cell(*t, row, "adj_r2")) + " | " + or_dash(cell(*t, row, "n")) + " |\n";
    }
    md += "\nCurves: [commits](studies/" + v + "/brooks_commits.svg) [delta_functions](studies/" + v +
          "/brooks_delta_functions.svg) [halstead_effort](studies/" + v + "/brooks_halstead_effort.svg)\n\n";
  }
  md += answer(tallies, "brooks_sign", "the sign of the team-size coefficient") + "\n";

  md += "## Turnover and quality\n\n";
  for (const auto& v : variants) {
    auto t = try_table(out / "studies" / v / "turnover_ci.csv");
    if (!t) continue;
    md += "### " + v + "\n\n| metric | CI low | CI high | significance |\n|---|---|---|---|\n";
    for (const auto& row : t->rows)
      md += "| " + cell(*t, row, "metric") + " | " + or_dash(cell(*t, row, "lo")) + " | " + or_dash(cell(*t, row, "hi")) +
            " | " + cell(*t, row, "significance") + " |\n";
    if (auto s = try_table(out / "studies" / v / "turnover_summary.csv"))
      for (const auto& row : s->rows) md += "\n" + cell(*s, row, "key") + ": " + or_dash(cell(*s, row, "value"));
    md += "\n\n";
  }
  md += answer(tallies, "turnover_significance", "turnover/bug-density significance labels") + "\n";

  md += "## Conclusion stability\n\n";
  if (!verdicts) {
    md += "No comparison was run.\n";
  } else {
    Tally all;
    for (const auto& [s, t] : tallies) {
      all.agree += t.agree;
      all.differ += t.differ;
      all.conflict += t.conflict;
    }
    md += "| agree | differ | conflict |\n|---|---|---|\n| " + std::to_string(all.agree) + " | " +
          std::to_string(all.differ) + " | " + std::to_string(all.conflict) + " |\n\n";
    if (all.conflict) {
      md += "Conflicts:\n\n";
      for (const auto& row : verdicts->rows)
        if (cell(*verdicts, row, "verdict") == "conflict")
          md += "- " + cell(*verdicts, row, "subject") + " (" + cell(*verdicts, row, "variant_a") + " vs " +
                cell(*verdicts, row, "variant_b") + "): " + cell(*verdicts, row, "detail") + "\n";
      md += "\n";
    }
    md += std::string("> **Answer.** ") +
          (all.conflict ? "At least one study conclusion reverses between variants; see the flags listed with each conflict.\n"
                        : "No study conclusion reverses between the compared variants.\n");
  }
  return md;
}

}  // namespace msrlab::report
