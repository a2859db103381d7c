#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "msrlab/config.hpp"
#include "msrlab/csv.hpp"
#include "msrlab/entities.hpp"
#include "msrlab/error.hpp"
#include "msrlab/stats.hpp"

namespace msrlab::brooks {

struct Token {
  std::string text;
  bool is_operator = false;
};

inline const std::set<std::string>& keywords(entities::Language lang) {
  static const std::set<std::string> c{
      "auto",   "break",    "case",     "char",     "const",    "continue", "default",  "do",     "double",
      "else",   "enum",     "extern",   "float",    "for",      "goto",     "if",       "inline", "int",
      "long",   "register", "restrict", "return",   "short",    "signed",   "sizeof",   "static", "struct",
      "switch", "typedef",  "union",    "unsigned", "void",     "volatile", "while",    "bool",   "class",
      "delete", "new",      "namespace", "operator", "private", "protected", "public",  "template", "this",
      "throw",  "try",      "catch",    "typename", "using",    "virtual",  "constexpr", "nullptr"};
  static const std::set<std::string> java{
      "abstract", "assert",     "boolean",   "break",  "byte",    "case",   "catch",      "char",
      "class",    "const",      "continue",  "default", "do",     "double", "else",       "enum",
      "extends",  "final",      "finally",   "float",  "for",     "goto",   "if",         "implements",
      "import",   "instanceof", "int",       "interface", "long", "native", "new",        "package",
      "private",  "protected",  "public",    "return", "short",   "static", "strictfp",   "super",
      "switch",   "synchronized", "this",    "throw",  "throws",  "transient", "try",     "void",
      "volatile", "while",      "var",       "record"};
  static const std::set<std::string> python{
      "and",   "as",     "assert", "async", "await",  "break", "class", "continue", "def",    "del",
      "elif",  "else",   "except", "finally", "for",  "from",  "global", "if",      "import", "in",
      "is",    "lambda", "nonlocal", "not", "or",     "pass",  "raise", "return",  "try",    "while",
      "with",  "yield"};
  static const std::set<std::string> none;
  switch (lang) {
    case entities::Language::c: return c;
    case entities::Language::java: return java;
    case entities::Language::python: return python;
    default: return none;
  }
}

// Identifiers and literals are operands; keywords, symbols and opening
// brackets are operators. Closing brackets pair with their opener and are
// not counted. Line comments are dropped.
inline std::vector<Token> tokenize(std::string_view line, entities::Language lang) {
  static const std::vector<std::string_view> multi{
      "<<=", ">>=", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
      "/=",  "%=",  "&=",  "|=", "^=", "<<", ">>", "**", "//"};
  const auto& kw = keywords(lang);
  std::vector<Token> out;
  std::size_t i = 0;
  auto n = line.size();
  while (i < n) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (lang == entities::Language::python && c == '#') break;
    if (lang != entities::Language::python && c == '/' && i + 1 < n && line[i + 1] == '/') break;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_' || line[j] == '$')) ++j;
      std::string word(line.substr(i, j - i));
      bool op = kw.count(word) > 0;
      out.push_back({std::move(word), op});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '.' || line[j] == '_')) ++j;
      out.push_back({std::string(line.substr(i, j - i)), false});
      i = j;
      continue;
    }
    if (c == '"' || c == '\'' || c == '`') {
      std::size_t j = i + 1;
      while (j < n && line[j] != c) {
        if (line[j] == '\\') ++j;
        ++j;
      }
      j = std::min(j + 1, n);
      out.push_back({std::string(line.substr(i, j - i)), false});
      i = j;
      continue;
    }
    if (c == ')' || c == ']' || c == '}') {
      ++i;
      continue;
    }
    bool matched = false;
    for (auto m : multi) {
      if (line.substr(i, m.size()) == m) {
        if (m == "//" && lang != entities::Language::python) break;
        out.push_back({std::string(m), true});
        i += m.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back({std::string(1, c), true});
      ++i;
    }
  }
  return out;
}

struct HalsteadCounts {
  std::size_t distinct_operators = 0;  // eta1
  std::size_t distinct_operands = 0;   // eta2
  std::size_t total_operators = 0;     // N1
  std::size_t total_operands = 0;      // N2
};

inline HalsteadCounts halstead_counts(const std::vector<Token>& tokens) {
  std::set<std::string> ops, opnds;
  HalsteadCounts h;
  for (const auto& t : tokens) {
    if (t.is_operator) {
      ops.insert(t.text);
      ++h.total_operators;
    } else {
      opnds.insert(t.text);
      ++h.total_operands;
    }
  }
  h.distinct_operators = ops.size();
  h.distinct_operands = opnds.size();
  return h;
}

// E = V * D with V = N log2(eta) and D = (eta1 / 2) (N2 / eta2).
inline double halstead_effort(const HalsteadCounts& h) {
  auto eta = static_cast<double>(h.distinct_operators + h.distinct_operands);
  if (eta <= 1 || h.distinct_operands == 0) return 0.0;
  auto N = static_cast<double>(h.total_operators + h.total_operands);
  double volume = N * std::log2(eta);
  double difficulty = (static_cast<double>(h.distinct_operators) / 2.0) *
                      (static_cast<double>(h.total_operands) / static_cast<double>(h.distinct_operands));
  return volume * difficulty;
}

inline double halstead_effort(const std::vector<Token>& tokens) { return halstead_effort(halstead_counts(tokens)); }

// Effort of the changed (added and deleted) lines of one commit.
inline double commit_effort(const std::vector<gitio::FileDiff>& diffs, const gitio::FileFilter* filter = nullptr) {
  std::vector<Token> tokens;
  for (const auto& d : diffs) {
    if (d.is_binary || (filter && !filter->keeps_path(d.path))) continue;
    auto lang = entities::language_for_path(d.path);
    for (const auto& h : d.hunks) {
      for (const auto& l : h.deleted) {
        auto t = tokenize(l, lang);
        tokens.insert(tokens.end(), t.begin(), t.end());
      }
      for (const auto& l : h.added) {
        auto t = tokenize(l, lang);
        tokens.insert(tokens.end(), t.begin(), t.end());
      }
    }
  }
  return halstead_effort(tokens);
}

// ---------------------------------------------------------------------------

struct WindowProductivity {
  std::string project;
  std::int64_t window = 0;
  std::int64_t commits = 0;
  std::int64_t delta_functions = 0;
  double halstead_effort = 0;
  std::int64_t team_size = 0;
  double mean_in_degree = 0;
  std::optional<double> mean_fmodr;
  std::int64_t n_nodes = 0;
};

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"commits",   "delta_functions", "halstead_effort", "team_size",
                                             "mean_in_degree", "mean_fmodr", "n_nodes"};
  return cols;
}

inline std::optional<double> raw_value(const WindowProductivity& w, const std::string& col) {
  if (col == "commits") return static_cast<double>(w.commits);
  if (col == "delta_functions") return static_cast<double>(w.delta_functions);
  if (col == "halstead_effort") return w.halstead_effort;
  if (col == "team_size") return static_cast<double>(w.team_size);
  if (col == "mean_in_degree") return w.mean_in_degree;
  if (col == "mean_fmodr") return w.mean_fmodr;
  if (col == "n_nodes") return static_cast<double>(w.n_nodes);
  throw InvalidArgumentError("unknown productivity column '" + col + "'");
}

inline bool is_target(const std::string& col) {
  return col == "commits" || col == "delta_functions" || col == "halstead_effort";
}

inline double apply(config::Transform t, double v) {
  switch (t) {
    case config::Transform::log1p: return std::log1p(std::max(v, 0.0));
    case config::Transform::signed_log1p: return v < 0 ? -std::log1p(-v) : std::log1p(v);
    case config::Transform::sqrt: return std::sqrt(std::max(v, 0.0));
    default: return v;
  }
}

// Modelling value: productivity targets are divided by team size first,
// then every column gets its configured transform.
inline std::optional<double> model_value(const WindowProductivity& w, const std::string& col,
                                         const std::map<std::string, config::Transform>& transforms) {
  auto v = raw_value(w, col);
  if (!v) return std::nullopt;
  double x = *v;
  if (is_target(col)) {
    if (w.team_size < 1) return std::nullopt;
    x /= static_cast<double>(w.team_size);
  }
  auto it = transforms.find(col);
  return apply(it == transforms.end() ? config::Transform::none : it->second, x);
}

struct CorrelationMatrix {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> r;  // absent when a column is constant
  std::size_t rows = 0;
};

inline CorrelationMatrix correlation_matrix(const std::vector<WindowProductivity>& table,
                                            const std::map<std::string, config::Transform>& transforms) {
  CorrelationMatrix m;
  m.columns = metric_columns();
  std::vector<const WindowProductivity*> rows;
  for (const auto& w : table) {
    bool complete = true;
    for (const auto& c : m.columns)
      if (!model_value(w, c, transforms)) complete = false;
    if (complete) rows.push_back(&w);
  }
  m.rows = rows.size();
  if (rows.size() < 3) throw InvalidArgumentError("correlation matrix needs at least 3 complete rows");
  std::map<std::string, std::vector<double>> cols;
  for (const auto& c : m.columns)
    for (const auto* w : rows) cols[c].push_back(*model_value(*w, c, transforms));
  m.r.assign(m.columns.size(), std::vector<std::optional<double>>(m.columns.size()));
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      try {
        m.r[i][j] = stats::pearson(cols[m.columns[i]], cols[m.columns[j]]);
      } catch (const UndefinedStatisticError&) {
      }
    }
  }
  return m;
}

enum class Form { linear, quadratic };
inline std::string to_string(Form f) { return f == Form::linear ? "linear" : "quadratic"; }

struct ModelResult {
  std::string target;
  Form form = Form::linear;
  std::vector<std::string> controls;
  std::optional<stats::ModelFit> fit;
  std::string absent_reason;
  std::optional<double> vertex_ts;  // TS at the quadratic maximum when beta2 < 0

  std::string form_label() const {
    std::string s = to_string(form);
    if (!controls.empty()) {
      s += "|";
      for (std::size_t i = 0; i < controls.size(); ++i) s += (i ? "+" : "") + controls[i];
    }
    return s;
  }
};

inline ModelResult fit_model(const std::vector<WindowProductivity>& table, const std::string& target, Form form,
                             const std::vector<std::string>& controls,
                             const std::map<std::string, config::Transform>& transforms) {
  ModelResult res{target, form, controls, std::nullopt, "", std::nullopt};
  std::vector<std::string> names{"(IC)", "TS"};
  if (form == Form::quadratic) names.push_back("TS^2");
  for (const auto& c : controls) names.push_back(c);
  std::vector<std::vector<double>> design;
  std::vector<double> y;
  for (const auto& w : table) {
    auto yv = model_value(w, target, transforms);
    auto ts = model_value(w, "team_size", transforms);
    if (!yv || !ts) continue;
    std::vector<double> row{1.0, *ts};
    if (form == Form::quadratic) row.push_back(*ts * *ts);
    bool complete = true;
    for (const auto& c : controls) {
      auto v = model_value(w, c, transforms);
      if (!v) {
        complete = false;
        break;
      }
      row.push_back(*v);
    }
    if (!complete) continue;
    design.push_back(std::move(row));
    y.push_back(*yv);
  }
  try {
    res.fit = stats::ols(design, y, names);
    if (form == Form::quadratic) {
      double b1 = res.fit->term("TS").coefficient;
      double b2 = res.fit->term("TS^2").coefficient;
      if (b2 < 0) res.vertex_ts = -b1 / (2 * b2);
    }
  } catch (const stats::RankDeficientError&) {
    res.absent_reason = "rank deficient";
  } catch (const InvalidArgumentError&) {
    res.absent_reason = "too few windows (n=" + std::to_string(y.size()) + ")";
  }
  return res;
}

inline std::vector<ModelResult> fit_models(const std::vector<WindowProductivity>& table,
                                           const std::vector<std::vector<std::string>>& control_sets,
                                           const std::map<std::string, config::Transform>& transforms) {
  std::vector<ModelResult> out;
  for (const std::string target : {"commits", "delta_functions", "halstead_effort"})
    for (auto form : {Form::linear, Form::quadratic})
      for (const auto& controls : control_sets) out.push_back(fit_model(table, target, form, controls, transforms));
  return out;
}

inline std::string metrics_csv(const std::vector<WindowProductivity>& table) {
  csv::Writer w({"project", "window", "commits", "delta_functions", "halstead_effort", "team_size", "mean_in_degree",
                 "mean_fmodr", "n_nodes"});
  for (const auto& r : table)
    w.row({r.project, std::to_string(r.window), std::to_string(r.commits), std::to_string(r.delta_functions),
           csv::format_double(r.halstead_effort), std::to_string(r.team_size), csv::format_double(r.mean_in_degree),
           r.mean_fmodr ? csv::format_double(*r.mean_fmodr) : "", std::to_string(r.n_nodes)});
  return w.str();
}

inline std::string models_csv(const std::vector<ModelResult>& models) {
  csv::Writer w({"target", "form", "term", "coef", "se", "r2", "adj_r2", "n"});
  for (const auto& m : models) {
    if (!m.fit) {
      w.row({m.target, m.form_label(), "absent:" + m.absent_reason, "", "", "", "", ""});
      continue;
    }
    for (const auto& t : m.fit->terms)
      w.row({m.target, m.form_label(), t.name, csv::format_double(t.coefficient), csv::format_double(t.standard_error),
             csv::format_double(m.fit->r2), csv::format_double(m.fit->adj_r2), std::to_string(m.fit->n)});
    if (m.vertex_ts)
      w.row({m.target, m.form_label(), "TS_vertex", csv::format_double(*m.vertex_ts), "", csv::format_double(m.fit->r2),
             csv::format_double(m.fit->adj_r2), std::to_string(m.fit->n)});
  }
  return w.str();
}

inline std::string correlation_csv(const CorrelationMatrix& m) {
  std::vector<std::string> header{"metric"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  csv::Writer w(header);
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    std::vector<std::string> row{m.columns[i]};
    for (const auto& v : m.r[i]) row.push_back(v ? csv::format_double(*v) : "");
    w.row(row);
  }
  return w.str();
}

}  // namespace msrlab::brooks
