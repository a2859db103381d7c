#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/gitio.hpp"

namespace msrlab::entities {

enum class Language { c, java, python, unsupported };
enum class EntityKind { function, class_like, file_fallback };
enum class CountingMode { summarise_per_entity, distinct_blocks };

inline constexpr std::string_view kFileEntity = "<file>";

inline std::string to_string(Language l) {
  switch (l) {
    case Language::c: return "C";
    case Language::java: return "Java";
    case Language::python: return "Python";
    default: return "unsupported";
  }
}

inline std::string to_string(EntityKind k) {
  switch (k) {
    case EntityKind::function: return "function";
    case EntityKind::class_like: return "class_like";
    default: return "file_fallback";
  }
}

inline std::string to_string(CountingMode m) {
  return m == CountingMode::summarise_per_entity ? "summarise_per_entity" : "distinct_blocks";
}

// Extension-based language tag. C++ sources share the C recognizer.
inline Language language_for_path(std::string_view path) {
  auto dot = path.rfind('.');
  auto slash = path.rfind('/');
  if (dot == std::string_view::npos || (slash != std::string_view::npos && dot < slash))
    return Language::unsupported;
  std::string ext(path.substr(dot + 1));
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  static const std::map<std::string, Language> table{
      {"c", Language::c},      {"h", Language::c},     {"cc", Language::c},    {"cpp", Language::c},
      {"cxx", Language::c},    {"hh", Language::c},    {"hpp", Language::c},   {"hxx", Language::c},
      {"java", Language::java}, {"py", Language::python}};
  auto it = table.find(ext);
  return it == table.end() ? Language::unsupported : it->second;
}

struct LineBlock {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool operator==(const LineBlock&) const = default;
};

// Maximal runs of sorted, distinct lines where consecutive lines differ by at
// most gap + 1.
inline std::vector<LineBlock> detect_blocks_proximity(const std::vector<std::int64_t>& lines, std::int64_t gap) {
  if (gap < 0) throw InvalidArgumentError("gap must be non-negative");
  std::vector<LineBlock> blocks;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0 && lines[i] <= lines[i - 1])
      throw InvalidArgumentError("changed lines must be sorted ascending and distinct");
    if (!blocks.empty() && lines[i] - blocks.back().end <= gap + 1) {
      blocks.back().end = lines[i];
    } else {
      blocks.push_back({lines[i], lines[i]});
    }
  }
  return blocks;
}

struct EntitySpan {
  std::string path;
  EntityKind kind = EntityKind::function;
  std::string name;
  std::int64_t start_line = 0;
  std::int64_t end_line = 0;

  bool contains(std::int64_t line) const noexcept { return line >= start_line && line <= end_line; }
};

struct DetectionResult {
  std::vector<EntitySpan> spans;  // sorted by start_line, non-overlapping
  bool lossy_decode = false;      // text was not valid UTF-8
};

inline bool is_valid_utf8(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (int k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    i += len;
  }
  return true;
}

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

inline std::int64_t count_lines(std::string_view text) { return static_cast<std::int64_t>(split_lines(text).size()); }

inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

// Blanks out comments, string and char literals and preprocessor lines while
// keeping newlines, so brace structure can be read line by line.
inline std::string mask_c_like(std::string_view text) {
  std::string out(text);
  enum { code, line_comment, block_comment, str, chr } state = code;
  bool line_start = true;
  bool in_preproc = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    char c = out[i];
    if (c == '\n') {
      if (state == line_comment) state = code;
      if (in_preproc && !(i > 0 && text[i - 1] == '\\')) in_preproc = false;
      line_start = true;
      continue;
    }
    if (in_preproc) {
      out[i] = ' ';
      continue;
    }
    switch (state) {
      case code:
        if (line_start && c == '#') {
          in_preproc = true;
          out[i] = ' ';
          break;
        }
        if (!std::isspace(static_cast<unsigned char>(c))) line_start = false;
        if (c == '/' && i + 1 < out.size() && out[i + 1] == '/') {
          state = line_comment;
          out[i] = ' ';
        } else if (c == '/' && i + 1 < out.size() && out[i + 1] == '*') {
          state = block_comment;
          out[i] = ' ';
          out[++i] = ' ';
        } else if (c == '"') {
          state = str;
        } else if (c == '\'') {
          state = chr;
        }
        break;
      case line_comment:
        out[i] = ' ';
        break;
      case block_comment:
        if (c == '*' && i + 1 < out.size() && out[i + 1] == '/') {
          out[i] = ' ';
          out[++i] = ' ';
          state = code;
        } else {
          out[i] = ' ';
        }
        break;
      case str:
      case chr:
        if (c == '\\' && i + 1 < out.size() && out[i + 1] != '\n') {
          out[i] = ' ';
          out[++i] = ' ';
        } else if ((state == str && c == '"') || (state == chr && c == '\'')) {
          state = code;
        } else {
          out[i] = ' ';
        }
        break;
    }
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

enum class ScopeKind { function, container, transparent, other };

struct HeaderInfo {
  ScopeKind kind = ScopeKind::other;
  std::string name;
};

// Classifies the text preceding an opening brace.
inline HeaderInfo classify_header(const std::string& raw_header, Language lang) {
  std::string h = collapse_ws(raw_header);
  // Drop Java/C++ annotations and attributes at the front.
  static const std::regex annotation(R"(^(@[A-Za-z_][\w.]*(\([^)]*\))?\s*)+)");
  static const std::regex cxx_attr(R"(\[\[[^\]]*\]\]\s*)");
  h = std::regex_replace(h, annotation, "");
  h = std::regex_replace(h, cxx_attr, "");
  if (h.empty()) return {};

  static const std::regex ns(R"((^|\s)(namespace)(\s+[\w:]+)?\s*$)");
  static const std::regex extern_c(R"(^extern\s*$)");
  if (std::regex_search(h, ns) || std::regex_search(h, extern_c)) return {ScopeKind::transparent, {}};

  // Java static initializer.
  if (h == "static" || h == "static ") return {};
  static const std::regex control(R"(^(if|else|for|while|do|switch|try|catch|finally|synchronized|return|case|default)\b)");

  static const std::regex container(R"((^|[\s>])(class|struct|interface|enum|union|record)\s+([A-Za-z_]\w*))");
  std::smatch m;
  auto paren = h.find('(');
  if (std::regex_search(h, m, container) &&
      (paren == std::string::npos || static_cast<std::size_t>(m.position(0)) < paren) &&
      h.find('=') == std::string::npos) {
    if (lang == Language::java || h.find('(') == std::string::npos ||
        static_cast<std::size_t>(m.position(0)) < paren)
      return {ScopeKind::container, m[3].str()};
  }
  if (h.find('=') != std::string::npos && (paren == std::string::npos || h.find('=') < paren)) return {};
  if (paren == std::string::npos) return {};
  if (std::regex_search(h, control)) return {};
  if (h.find(" new ") != std::string::npos || h.rfind("new ", 0) == 0) return {};

  // The name is the identifier (optionally qualified) just before the first '('.
  std::size_t e = paren;
  while (e > 0 && h[e - 1] == ' ') --e;
  std::size_t b = e;
  while (b > 0 && (ident_char(h[b - 1]) || h[b - 1] == ':' || h[b - 1] == '~')) --b;
  std::string name = h.substr(b, e - b);
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) return {};
  static const std::set<std::string> not_functions{"if", "for", "while", "switch", "catch", "return", "sizeof", "do"};
  if (not_functions.count(name)) return {};
  // Parentheses must balance and close before the brace (qualifiers may follow).
  int depth = 0;
  std::size_t close = std::string::npos;
  for (std::size_t i = paren; i < h.size(); ++i) {
    if (h[i] == '(') ++depth;
    if (h[i] == ')' && --depth == 0) {
      close = i;
      break;
    }
  }
  if (close == std::string::npos) return {};
  std::string tail = trim(h.substr(close + 1));
  static const std::regex qualifiers(
      R"(^((const|noexcept|override|final|volatile|throws\s+[\w.,\s]+|->\s*[\w:<>,\s*&]+|&|&&|:\s*.*)\s*)*$)");
  if (!tail.empty() && !std::regex_match(tail, qualifiers)) return {};
  return {ScopeKind::function, name};
}

struct Frame {
  ScopeKind kind;
  std::string name;
  std::int64_t start_line;
  int functions_inside = 0;
};

inline std::vector<EntitySpan> detect_brace_language(std::string_view text, Language lang, const std::string& path) {
  std::string masked = mask_c_like(text);
  std::vector<EntitySpan> spans;
  std::vector<Frame> stack;
  std::string header;
  std::int64_t header_line = 0;
  std::int64_t line = 1;
  int opaque_depth = 0;  // depth inside a function or other non-descended scope

  for (std::size_t i = 0; i < masked.size(); ++i) {
    char c = masked[i];
    if (c == '\n') {
      ++line;
      if (opaque_depth == 0 && !header.empty()) header += ' ';
      continue;
    }
    if (opaque_depth > 0) {
      if (c == '{') {
        ++opaque_depth;
      } else if (c == '}') {
        if (--opaque_depth == 0) {
          auto f = stack.back();
          stack.pop_back();
          if (f.kind == ScopeKind::function) {
            spans.push_back({path, EntityKind::function, f.name, f.start_line, line});
            for (auto& outer : stack) ++outer.functions_inside;
          }
          header.clear();
        }
      }
      continue;
    }
    if (c == '{') {
      auto info = classify_header(header, lang);
      std::int64_t start = header_line > 0 ? header_line : line;
      stack.push_back({info.kind, info.name, start, 0});
      if (info.kind == ScopeKind::function || info.kind == ScopeKind::other) opaque_depth = 1;
      header.clear();
      header_line = 0;
    } else if (c == '}') {
      if (!stack.empty()) {
        auto f = stack.back();
        stack.pop_back();
        if (f.kind == ScopeKind::container && f.functions_inside == 0)
          spans.push_back({path, EntityKind::class_like, f.name, f.start_line, line});
      }
      header.clear();
      header_line = 0;
    } else if (c == ';') {
      header.clear();
      header_line = 0;
    } else {
      if (header_line == 0 && !std::isspace(static_cast<unsigned char>(c))) header_line = line;
      header += c;
    }
  }
  return spans;
}

inline int indent_of(std::string_view l) {
  int n = 0;
  for (char c : l) {
    if (c == ' ') ++n;
    else if (c == '\t') n += 8 - (n % 8);
    else break;
  }
  return n;
}

struct PyLine {
  bool statement_start = false;  // logical line start, not blank/comment/continuation
  int indent = 0;
  std::string_view text;
};

inline std::vector<PyLine> python_lines(std::string_view text) {
  auto raw = split_lines(text);
  std::vector<PyLine> out(raw.size());
  int bracket = 0;
  std::string_view triple;  // active triple-quote delimiter
  bool continued = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto l = raw[i];
    out[i].text = l;
    out[i].indent = indent_of(l);
    auto t = trim(l);
    bool starts_inside = !triple.empty() || bracket > 0 || continued;
    out[i].statement_start = !starts_inside && !t.empty() && t[0] != '#';
    continued = false;
    for (std::size_t k = 0; k < l.size(); ++k) {
      if (!triple.empty()) {
        if (l.substr(k, 3) == triple) {
          triple = {};
          k += 2;
        }
        continue;
      }
      char c = l[k];
      if (c == '#') break;
      if (l.substr(k, 3) == "\"\"\"" || l.substr(k, 3) == "'''") {
        triple = l.substr(k, 3);
        k += 2;
        continue;
      }
      if (c == '"' || c == '\'') {
        char q = c;
        for (++k; k < l.size() && l[k] != q; ++k)
          if (l[k] == '\\') ++k;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') ++bracket;
      if ((c == ')' || c == ']' || c == '}') && bracket > 0) --bracket;
    }
    if (!l.empty() && l.back() == '\\' && triple.empty()) continued = true;
  }
  return out;
}

inline std::vector<EntitySpan> detect_python(std::string_view text, const std::string& path) {
  auto lines = python_lines(text);
  static const std::regex def_re(R"(^\s*(async\s+def|def)\s+([A-Za-z_]\w*))");
  static const std::regex class_re(R"(^\s*class\s+([A-Za-z_]\w*))");
  std::vector<EntitySpan> spans;

  auto block_end = [&](std::size_t head) {
    std::size_t last = head;
    for (std::size_t j = head + 1; j < lines.size(); ++j) {
      if (lines[j].statement_start && lines[j].indent <= lines[head].indent) break;
      if (!trim(lines[j].text).empty()) last = j;
    }
    return last;
  };
  auto decorated_start = [&](std::size_t head) {
    std::size_t s = head;
    while (s > 0) {
      auto t = trim(lines[s - 1].text);
      if (!t.empty() && t[0] == '@' && lines[s - 1].indent == lines[head].indent) --s;
      else break;
    }
    return s;
  };

  // Containers are descended; functions are leaves; childless classes become spans.
  std::function<int(std::size_t, std::size_t)> scan = [&](std::size_t from, std::size_t to) {
    int functions = 0;
    for (std::size_t i = from; i < to; ++i) {
      if (!lines[i].statement_start) continue;
      std::string line(lines[i].text);
      std::smatch m;
      if (std::regex_search(line, m, def_re)) {
        auto end = block_end(i);
        spans.push_back({path, EntityKind::function, m[2].str(),
                         static_cast<std::int64_t>(decorated_start(i) + 1), static_cast<std::int64_t>(end + 1)});
        ++functions;
        i = end;
      } else if (std::regex_search(line, m, class_re)) {
        auto end = block_end(i);
        int inner = scan(i + 1, end + 1);
        if (inner == 0)
          spans.push_back({path, EntityKind::class_like, m[1].str(),
                           static_cast<std::int64_t>(decorated_start(i) + 1), static_cast<std::int64_t>(end + 1)});
        functions += inner;
        i = end;
      }
    }
    return functions;
  };
  scan(0, lines.size());
  return spans;
}

}  // namespace detail

// Lightweight line-oriented recognizers. C-like languages use brace balance
// over comment/string-masked text: functions are leaves, class-like scopes
// are descended and only reported when they hold no functions, namespaces are
// transparent. Python uses indentation scopes with the same rules.
// Unsupported languages yield one file_fallback span covering the file.
inline DetectionResult detect_entities_declared(std::string_view text, Language lang, const std::string& path = {}) {
  DetectionResult r;
  r.lossy_decode = !is_valid_utf8(text);
  switch (lang) {
    case Language::c:
    case Language::java:
      r.spans = detail::detect_brace_language(text, lang, path);
      break;
    case Language::python:
      r.spans = detail::detect_python(text, path);
      break;
    case Language::unsupported:
      r.spans.push_back({path, EntityKind::file_fallback, std::string(kFileEntity), 1,
                         std::max<std::int64_t>(1, detail::count_lines(text))});
      break;
  }
  std::sort(r.spans.begin(), r.spans.end(),
            [](const auto& a, const auto& b) { return a.start_line < b.start_line; });
  return r;
}

inline std::size_t count_functions(const DetectionResult& r) {
  return static_cast<std::size_t>(std::count_if(r.spans.begin(), r.spans.end(),
                                                [](const auto& s) { return s.kind == EntityKind::function; }));
}

// ---------------------------------------------------------------------------

enum class Image { post, pre };

// A changed line located in the image its entity is resolved against.
struct ChangedLine {
  Image image = Image::post;
  std::int64_t line = 0;
};

// Added lines sit in the post-image. Deleted lines of hunks that also add
// lines are anchored onto the hunk's post-image lines; deleted-only hunks
// stay in the pre-image. Every +/- line yields exactly one ChangedLine.
inline std::vector<ChangedLine> changed_lines(const gitio::FileDiff& diff) {
  std::vector<ChangedLine> out;
  for (const auto& h : diff.hunks) {
    auto added = static_cast<std::int64_t>(h.added.size());
    auto deleted = static_cast<std::int64_t>(h.deleted.size());
    for (std::int64_t k = 0; k < added; ++k) out.push_back({Image::post, h.new_start + k});
    if (added > 0) {
      for (std::int64_t k = 0; k < deleted; ++k) out.push_back({Image::post, h.new_start + std::min(k, added - 1)});
    } else {
      for (std::int64_t k = 0; k < deleted; ++k) out.push_back({Image::pre, h.old_start + k});
    }
  }
  return out;
}

struct EntityChange {
  std::string commit;
  std::string path;
  std::string entity_name;
  std::string dev;
  std::int64_t lines_changed = 0;
  std::optional<std::int64_t> block_index;
  CountingMode counting_mode = CountingMode::summarise_per_entity;
  std::int64_t start_line = 0;  // first changed line, for ordering
};

struct MappingOptions {
  CountingMode mode = CountingMode::summarise_per_entity;
  std::int64_t gap = 0;
  bool fallback = true;
};

namespace detail {

inline const EntitySpan* find_span(const std::vector<EntitySpan>& spans, std::int64_t line) {
  for (const auto& s : spans)
    if (s.contains(line)) return &s;
  return nullptr;
}

}  // namespace detail

// Maps the changed lines of one file in one commit onto entities.
// summarise_per_entity emits one record per entity; distinct_blocks one
// record per proximity block inside each entity.
inline std::vector<EntityChange> map_changes_to_entities(const std::vector<ChangedLine>& lines,
                                                         const std::vector<EntitySpan>& post_spans,
                                                         const std::vector<EntitySpan>& pre_spans,
                                                         const MappingOptions& opts, const std::string& commit,
                                                         const std::string& path, const std::string& dev) {
  // (image, entity name) -> line -> multiplicity
  std::map<std::pair<int, std::string>, std::map<std::int64_t, std::int64_t>> groups;
  for (const auto& cl : lines) {
    const auto& spans = cl.image == Image::post ? post_spans : pre_spans;
    const EntitySpan* s = detail::find_span(spans, cl.line);
    std::string name;
    if (s && s->kind != EntityKind::file_fallback) {
      name = s->name;
    } else if (opts.fallback) {
      name = std::string(kFileEntity);
    } else {
      continue;
    }
    groups[{static_cast<int>(cl.image), name}][cl.line] += 1;
  }

  std::vector<EntityChange> out;
  if (opts.mode == CountingMode::summarise_per_entity) {
    std::map<std::string, EntityChange> by_entity;
    for (const auto& [key, counts] : groups) {
      auto& rec = by_entity[key.second];
      if (rec.lines_changed == 0) {
        rec = {commit, path, key.second, dev, 0, std::nullopt, opts.mode, counts.begin()->first};
      }
      rec.start_line = std::min(rec.start_line, counts.begin()->first);
      for (const auto& [line, n] : counts) rec.lines_changed += n;
    }
    for (auto& [name, rec] : by_entity) out.push_back(std::move(rec));
  } else {
    for (const auto& [key, counts] : groups) {
      std::vector<std::int64_t> sorted;
      for (const auto& [line, n] : counts) sorted.push_back(line);
      for (const auto& b : detect_blocks_proximity(sorted, opts.gap)) {
        std::int64_t n = 0;
        for (auto it = counts.lower_bound(b.start); it != counts.end() && it->first <= b.end; ++it) n += it->second;
        out.push_back({commit, path, key.second, dev, n, std::int64_t{0}, opts.mode, b.start});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start_line, a.entity_name) < std::tie(b.start_line, b.entity_name);
  });
  if (opts.mode == CountingMode::distinct_blocks)
    for (std::size_t i = 0; i < out.size(); ++i) out[i].block_index = static_cast<std::int64_t>(i);
  return out;
}

inline std::string entity_changes_csv(const std::vector<EntityChange>& changes) {
  csv::Writer w({"hash", "path", "entity", "dev_id", "lines", "block_index", "mode"});
  for (const auto& c : changes)
    w.row({c.commit, c.path, c.entity_name, c.dev, std::to_string(c.lines_changed),
           c.block_index ? std::to_string(*c.block_index) : "", to_string(c.counting_mode)});
  return w.str();
}

}  // namespace msrlab::entities
