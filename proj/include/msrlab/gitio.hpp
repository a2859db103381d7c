#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/error.hpp"
#include "msrlab/process.hpp"

namespace msrlab::gitio {

enum class BranchMode { single_branch, all_branches };

inline std::string to_string(BranchMode m) {
  return m == BranchMode::single_branch ? "single_branch" : "all_branches";
}

struct CommitRecord {
  std::string hash;
  std::string author_name;
  std::string author_email;
  std::string committer_name;
  std::string committer_email;
  std::int64_t author_time = 0;
  std::int64_t commit_time = 0;
  std::vector<std::string> parents;
  BranchMode branch_scope = BranchMode::single_branch;

  bool is_merge() const noexcept { return parents.size() > 1; }
  bool is_root() const noexcept { return parents.empty(); }
};

struct FileChange {
  std::string commit;
  std::string path;
  std::optional<std::string> old_path;
  // Both absent iff is_binary.
  std::optional<std::int64_t> lines_added;
  std::optional<std::int64_t> lines_deleted;
  bool is_binary = false;

  // Unknown counts propagate as zero churn.
  std::int64_t churn() const noexcept { return lines_added.value_or(0) + lines_deleted.value_or(0); }
};

struct LineAttribution {
  std::string commit;
  std::string path;
  std::int64_t line_no = 0;
  std::string owner_commit;
  std::string owner_name;
  std::string owner_email;
  std::string content;
};

// One zero-context hunk. Deleted lines are numbered in the pre-image, added
// lines in the post-image.
struct Hunk {
  std::int64_t old_start = 0;
  std::int64_t old_count = 0;
  std::int64_t new_start = 0;
  std::int64_t new_count = 0;
  std::vector<std::string> deleted;
  std::vector<std::string> added;
};

struct FileDiff {
  std::string path;
  std::optional<std::string> old_path;
  bool is_binary = false;
  bool is_new = false;
  bool is_deleted = false;
  std::vector<Hunk> hunks;

  std::int64_t added_count() const {
    std::int64_t n = 0;
    for (const auto& h : hunks) n += static_cast<std::int64_t>(h.added.size());
    return n;
  }
  std::int64_t deleted_count() const {
    std::int64_t n = 0;
    for (const auto& h : hunks) n += static_cast<std::int64_t>(h.deleted.size());
    return n;
  }
  const std::string& pre_path() const { return old_path ? *old_path : path; }
};

struct TreeEntry {
  std::string path;
  std::string blob;
};

// ---------------------------------------------------------------------------
// File filters

enum class FilterOrder { filter_before_store, filter_at_analysis };

inline std::string to_string(FilterOrder o) {
  return o == FilterOrder::filter_before_store ? "filter_before_store" : "filter_at_analysis";
}

struct FilterConfig {
  std::vector<std::string> allow_extensions;
  std::vector<std::string> allow_patterns;
  std::vector<std::string> deny_extensions;
  std::vector<std::string> deny_patterns;
  bool drop_binary = false;
  FilterOrder order = FilterOrder::filter_at_analysis;

  bool empty() const {
    return allow_extensions.empty() && allow_patterns.empty() && deny_extensions.empty() &&
           deny_patterns.empty() && !drop_binary;
  }
  bool operator==(const FilterConfig&) const = default;
};

namespace detail {

inline bool iends_with(std::string_view s, std::string_view suffix) {
  if (suffix.size() > s.size()) return false;
  auto tail = s.substr(s.size() - suffix.size());
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(tail[i])) !=
        std::tolower(static_cast<unsigned char>(suffix[i])))
      return false;
  }
  return true;
}

inline std::vector<std::regex> compile_all(const std::vector<std::string>& patterns) {
  std::vector<std::regex> out;
  for (const auto& p : patterns) {
    try {
      out.emplace_back(p, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw InvalidArgumentError("invalid file pattern '" + p + "': " + e.what());
    }
  }
  return out;
}

}  // namespace detail

// Compiled form of a FilterConfig. A path is kept iff it passes the allow
// rules (vacuously when none are set) and matches no deny rule. Extension
// literals are case-insensitive suffixes; patterns use regex_search, so they
// carry their own anchors.
class FileFilter {
 public:
  FileFilter() = default;
  explicit FileFilter(const FilterConfig& cfg)
      : cfg_(cfg),
        allow_re_(detail::compile_all(cfg.allow_patterns)),
        deny_re_(detail::compile_all(cfg.deny_patterns)) {}

  bool passes_allow(std::string_view path) const {
    if (cfg_.allow_extensions.empty() && allow_re_.empty()) return true;
    for (const auto& ext : cfg_.allow_extensions)
      if (detail::iends_with(path, ext)) return true;
    for (const auto& re : allow_re_)
      if (std::regex_search(path.begin(), path.end(), re)) return true;
    return false;
  }

  bool hits_deny(std::string_view path) const {
    for (const auto& ext : cfg_.deny_extensions)
      if (detail::iends_with(path, ext)) return true;
    for (const auto& re : deny_re_)
      if (std::regex_search(path.begin(), path.end(), re)) return true;
    return false;
  }

  bool keeps_path(std::string_view path) const { return passes_allow(path) && !hits_deny(path); }

  bool keeps(const FileChange& c) const {
    if (cfg_.drop_binary && c.is_binary) return false;
    return keeps_path(c.path);
  }

  const FilterConfig& config() const noexcept { return cfg_; }

 private:
  FilterConfig cfg_;
  std::vector<std::regex> allow_re_;
  std::vector<std::regex> deny_re_;
};

inline std::vector<FileChange> apply_file_filters(const std::vector<FileChange>& changes,
                                                  const FilterConfig& filters) {
  if (filters.empty()) return changes;
  FileFilter f(filters);
  std::vector<FileChange> kept;
  for (const auto& c : changes)
    if (f.keeps(c)) kept.push_back(c);
  return kept;
}

// ---------------------------------------------------------------------------
// Parsing helpers (exposed for testing)

namespace parse {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string_view> lines(std::string_view s) {
  auto out = split(s, '\n');
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

// Undoes git's C-style path quoting ("a\tb" with octal escapes).
inline std::string unquote_path(std::string_view p) {
  if (p.size() < 2 || p.front() != '"' || p.back() != '"') return std::string(p);
  std::string out;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    char c = p[i];
    if (c != '\\') {
      out += c;
      continue;
    }
    if (++i + 1 > p.size() - 1) break;
    char e = p[i];
    switch (e) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'v': out += '\v'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default:
        if (e >= '0' && e <= '7') {
          int v = 0;
          int k = 0;
          while (k < 3 && i < p.size() - 1 && p[i] >= '0' && p[i] <= '7') {
            v = v * 8 + (p[i] - '0');
            ++i;
            ++k;
          }
          --i;
          out += static_cast<char>(v);
        } else {
          out += e;
        }
    }
  }
  return out;
}

inline std::string collapse_slashes(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '/' && !out.empty() && out.back() == '/') continue;
    out += c;
  }
  if (!out.empty() && out.front() == '/') out.erase(out.begin());
  return out;
}

// Splits a numstat path field into (new_path, old_path). Handles the brace
// form "src/{old.c => new.c}" and the plain form "a.c => b.c".
inline std::pair<std::string, std::optional<std::string>> rename_paths(std::string_view field) {
  std::string f = unquote_path(field);
  auto arrow = f.find(" => ");
  if (arrow == std::string::npos) return {f, std::nullopt};
  auto lbrace = f.rfind('{', arrow);
  auto rbrace = f.find('}', arrow);
  if (lbrace != std::string::npos && rbrace != std::string::npos) {
    std::string prefix = f.substr(0, lbrace);
    std::string suffix = f.substr(rbrace + 1);
    std::string old_mid = f.substr(lbrace + 1, arrow - lbrace - 1);
    std::string new_mid = f.substr(arrow + 4, rbrace - arrow - 4);
    return {collapse_slashes(prefix + new_mid + suffix),
            collapse_slashes(prefix + old_mid + suffix)};
  }
  return {f.substr(arrow + 4), f.substr(0, arrow)};
}

inline FileChange numstat_line(std::string_view line, const std::string& commit) {
  auto parts = split(line, '\t');
  if (parts.size() < 3) throw ParseError("unparseable numstat line: '" + std::string(line) + "'");
  std::string_view path_field = line.substr(parts[0].size() + parts[1].size() + 2);
  FileChange fc;
  fc.commit = commit;
  auto [path, old] = rename_paths(path_field);
  fc.path = std::move(path);
  fc.old_path = std::move(old);
  if (parts[0] == "-" && parts[1] == "-") {
    fc.is_binary = true;
  } else {
    auto a = csv::to_int(parts[0]);
    auto d = csv::to_int(parts[1]);
    if (!a || !d) throw ParseError("unparseable numstat line: '" + std::string(line) + "'");
    fc.lines_added = *a;
    fc.lines_deleted = *d;
  }
  if (fc.path.empty()) throw ParseError("unparseable numstat line: '" + std::string(line) + "'");
  return fc;
}

inline std::vector<FileChange> numstat(std::string_view out, const std::string& commit) {
  std::vector<FileChange> changes;
  for (auto l : lines(out)) {
    if (l.empty()) continue;
    changes.push_back(numstat_line(l, commit));
  }
  return changes;
}

// Pretty format used with `git log`: record separator, then unit-separated
// header fields, then the numstat block.
inline constexpr std::string_view kLogFormat =
    "%x1e%H%x1f%an%x1f%ae%x1f%cn%x1f%ce%x1f%ad%x1f%cd%x1f%P%x1f";

inline std::int64_t raw_date_seconds(std::string_view raw) {
  auto sp = raw.find(' ');
  auto v = csv::to_int(raw.substr(0, sp));
  if (!v) throw ParseError("unparseable raw date: '" + std::string(raw) + "'");
  return *v;
}

struct LogEntry {
  CommitRecord commit;
  std::vector<FileChange> changes;
};

inline std::vector<LogEntry> log_output(std::string_view out, BranchMode mode) {
  std::vector<LogEntry> entries;
  for (auto rec : split(out, '\x1e')) {
    if (rec.find_first_not_of("\n") == std::string_view::npos) continue;
    auto fields = split(rec, '\x1f');
    if (fields.size() < 9) throw ParseError("unparseable log record: '" + std::string(rec) + "'");
    LogEntry e;
    auto& c = e.commit;
    c.hash = std::string(fields[0]);
    c.author_name = std::string(fields[1]);
    c.author_email = std::string(fields[2]);
    c.committer_name = std::string(fields[3]);
    c.committer_email = std::string(fields[4]);
    c.author_time = raw_date_seconds(fields[5]);
    c.commit_time = raw_date_seconds(fields[6]);
    for (auto p : split(fields[7], ' '))
      if (!p.empty()) c.parents.emplace_back(p);
    c.branch_scope = mode;
    e.changes = numstat(fields[8], c.hash);
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::int64_t hunk_number(std::string_view s, std::string_view whole) {
  auto v = csv::to_int(s);
  if (!v) throw ParseError("unparseable hunk header: '" + std::string(whole) + "'");
  return *v;
}

inline void hunk_header(std::string_view line, Hunk& h) {
  // @@ -a[,b] +c[,d] @@ ...
  auto minus = line.find('-');
  auto plus = line.find(" +", minus);
  auto end = line.find(" @@", plus);
  if (minus == std::string_view::npos || plus == std::string_view::npos ||
      end == std::string_view::npos)
    throw ParseError("unparseable hunk header: '" + std::string(line) + "'");
  auto old_part = line.substr(minus + 1, plus - minus - 1);
  auto new_part = line.substr(plus + 2, end - plus - 2);
  auto parse_range = [&](std::string_view r, std::int64_t& start, std::int64_t& count) {
    auto comma = r.find(',');
    start = hunk_number(r.substr(0, comma), line);
    count = comma == std::string_view::npos ? 1 : hunk_number(r.substr(comma + 1), line);
  };
  parse_range(old_part, h.old_start, h.old_count);
  parse_range(new_part, h.new_start, h.new_count);
}

inline std::string strip_prefix(std::string_view p, std::string_view prefix) {
  std::string s = unquote_path(p);
  if (s.rfind(prefix, 0) == 0) s = s.substr(prefix.size());
  return s;
}

// Parses `git diff -U0 --src-prefix=a/ --dst-prefix=b/` output.
inline std::vector<FileDiff> unified_diff(std::string_view out) {
  std::vector<FileDiff> files;
  FileDiff* cur = nullptr;
  Hunk* hunk = nullptr;
  std::optional<std::string> minus_path;
  for (auto line : lines(out)) {
    if (line.rfind("diff --git ", 0) == 0) {
      files.emplace_back();
      cur = &files.back();
      hunk = nullptr;
      minus_path.reset();
      // Symmetric "a/X b/X" form as a fallback for binary-only entries.
      auto rest = line.substr(11);
      if (rest.size() % 2 == 1) {
        auto half = rest.size() / 2;
        auto a = rest.substr(0, half);
        auto b = rest.substr(half + 1);
        if (a.rfind("a/", 0) == 0 && b.rfind("b/", 0) == 0 && a.substr(2) == b.substr(2))
          cur->path = std::string(b.substr(2));
      }
      if (cur->path.empty() && rest.size() > 2 && rest.back() == '"') {
        auto q = rest.rfind(" \"b/");
        if (q != std::string_view::npos) cur->path = strip_prefix(rest.substr(q + 1), "b/");
      }
      continue;
    }
    if (!cur) continue;
    if (hunk) {
      if (!line.empty() && line[0] == '-') {
        hunk->deleted.emplace_back(line.substr(1));
        continue;
      }
      if (!line.empty() && line[0] == '+') {
        hunk->added.emplace_back(line.substr(1));
        continue;
      }
      if (!line.empty() && line[0] == '\\') continue;
    }
    if (line.rfind("@@ ", 0) == 0) {
      cur->hunks.emplace_back();
      hunk = &cur->hunks.back();
      hunk_header(line, *hunk);
    } else if (line.rfind("--- ", 0) == 0) {
      auto p = line.substr(4);
      if (p != "/dev/null") minus_path = strip_prefix(p, "a/");
    } else if (line.rfind("+++ ", 0) == 0) {
      auto p = line.substr(4);
      if (p != "/dev/null") cur->path = strip_prefix(p, "b/");
      else if (minus_path) cur->path = *minus_path;
    } else if (line.rfind("rename from ", 0) == 0) {
      cur->old_path = unquote_path(line.substr(12));
    } else if (line.rfind("rename to ", 0) == 0) {
      cur->path = unquote_path(line.substr(10));
    } else if (line.rfind("new file mode", 0) == 0) {
      cur->is_new = true;
    } else if (line.rfind("deleted file mode", 0) == 0) {
      cur->is_deleted = true;
    } else if (line.rfind("Binary files ", 0) == 0) {
      cur->is_binary = true;
    }
  }
  for (auto& f : files) {
    if (f.path.empty() && f.old_path) f.path = *f.old_path;
    if (f.old_path && *f.old_path == f.path) f.old_path.reset();
  }
  return files;
}

inline std::vector<LineAttribution> blame_porcelain(std::string_view out, const std::string& commit,
                                                    const std::string& path) {
  std::vector<LineAttribution> lines_out;
  LineAttribution cur;
  bool in_header = false;
  for (auto line : lines(out)) {
    if (!in_header) {
      auto parts = split(line, ' ');
      if (parts.size() < 3 || parts[0].size() < 40)
        throw ParseError("unparseable blame line: '" + std::string(line) + "'");
      cur = LineAttribution{};
      cur.commit = commit;
      cur.path = path;
      cur.owner_commit = std::string(parts[0]);
      auto final_line = csv::to_int(parts[2]);
      if (!final_line) throw ParseError("unparseable blame line: '" + std::string(line) + "'");
      cur.line_no = *final_line;
      in_header = true;
      continue;
    }
    if (!line.empty() && line[0] == '\t') {
      cur.content = std::string(line.substr(1));
      lines_out.push_back(std::move(cur));
      in_header = false;
    } else if (line.rfind("author ", 0) == 0) {
      cur.owner_name = std::string(line.substr(7));
    } else if (line.rfind("author-mail ", 0) == 0) {
      auto m = line.substr(12);
      if (m.size() >= 2 && m.front() == '<' && m.back() == '>') m = m.substr(1, m.size() - 2);
      cur.owner_email = std::string(m);
    }
  }
  std::sort(lines_out.begin(), lines_out.end(),
            [](const auto& a, const auto& b) { return a.line_no < b.line_no; });
  return lines_out;
}

}  // namespace parse

// ---------------------------------------------------------------------------

struct ExtractedHistory {
  std::vector<CommitRecord> commits;       // ordered by (commit_time, hash)
  std::vector<FileChange> file_changes;    // ordered by commit order, then path
  BranchMode mode = BranchMode::single_branch;
  std::string branch;
};

inline void sort_commits(std::vector<CommitRecord>& commits) {
  std::sort(commits.begin(), commits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.commit_time, a.hash) < std::tie(b.commit_time, b.hash);
  });
}

// Binary used for every git invocation; MSRLAB_GIT overrides the PATH lookup.
inline std::string git_binary() {
  if (const char* env = std::getenv("MSRLAB_GIT"); env && *env) return env;
  return "git";
}

// Handle on a local repository. All queries shell out to git with pinned
// flags; results of the expensive per-commit queries are memoised, so one
// instance can be shared across pipeline variants and threads.
class Repository {
 public:
  explicit Repository(std::filesystem::path path) : path_(std::move(path)) {
    std::error_code ec;
    if (!std::filesystem::exists(path_, ec))
      throw NotARepositoryError("repository path does not exist: " + path_.string());
    auto r = git_raw({"rev-parse", "--git-dir"});
    if (r.exit_code != 0) throw NotARepositoryError("not a git repository: " + path_.string());
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  // Hashes reachable under the traversal, via `git rev-list`.
  std::vector<std::string> rev_list(BranchMode mode, const std::string& branch = "HEAD") const {
    if (!has_any_ref()) return {};
    std::vector<std::string> args{"rev-list"};
    if (mode == BranchMode::all_branches) {
      args.push_back("--all");
    } else {
      require_branch(branch);
      args.push_back(branch);
    }
    args.push_back("--");
    auto out = git(args);
    std::vector<std::string> hashes;
    for (auto l : parse::lines(out))
      if (!l.empty()) hashes.emplace_back(l);
    return hashes;
  }

  // Commits and numstat rows. Merge commits get rows from a first-parent diff.
  ExtractedHistory extract_history(BranchMode mode, const std::string& branch = "HEAD") const {
    ExtractedHistory h;
    h.mode = mode;
    h.branch = branch;
    auto hashes = rev_list(mode, branch);
    if (hashes.empty()) return h;
    std::vector<std::string> args{"-c", "diff.renames=true", "-c", "core.quotepath=off", "log"};
    if (mode == BranchMode::all_branches) args.push_back("--all");
    else args.push_back(branch);
    args.insert(args.end(), {"--numstat", "--date=raw",
                             "--pretty=format:" + std::string(parse::kLogFormat), "--"});
    auto entries = parse::log_output(git(args), mode);

    std::set<std::string> expected(hashes.begin(), hashes.end());
    if (entries.size() != expected.size())
      throw ParseError("git log returned " + std::to_string(entries.size()) +
                       " commits, rev-list " + std::to_string(expected.size()));
    for (auto& e : entries) {
      if (!expected.count(e.commit.hash))
        throw ParseError("git log returned unexpected commit " + e.commit.hash);
      if (e.commit.is_merge()) e.changes = extract_file_changes(e.commit);
      std::sort(e.changes.begin(), e.changes.end(),
                [](const auto& a, const auto& b) { return a.path < b.path; });
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return std::tie(a.commit.commit_time, a.commit.hash) <
             std::tie(b.commit.commit_time, b.commit.hash);
    });
    for (auto& e : entries) {
      h.commits.push_back(std::move(e.commit));
      for (auto& c : e.changes) h.file_changes.push_back(std::move(c));
    }
    return h;
  }

  std::vector<CommitRecord> extract_commits(BranchMode mode, const std::string& branch = "HEAD") const {
    return extract_history(mode, branch).commits;
  }

  // `git diff --numstat <first-parent> <commit>`; roots diff against the empty tree.
  std::vector<FileChange> extract_file_changes(const CommitRecord& c) const {
    std::string base = c.parents.empty() ? empty_tree() : c.parents.front();
    auto out = git({"-c", "diff.renames=true", "-c", "core.quotepath=off", "diff",
                                "--numstat", base, c.hash});
    auto rows = parse::numstat(out, c.hash);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return rows;
  }

  std::vector<FileChange> extract_file_changes(const std::string& hash) const {
    return extract_file_changes(commit_stub(hash));
  }

  // Zero-context diff against the first parent, memoised per commit.
  std::shared_ptr<const std::vector<FileDiff>> diff_hunks(const CommitRecord& c) const {
    {
      std::lock_guard lock(mutex_);
      if (auto it = diff_cache_.find(c.hash); it != diff_cache_.end()) return it->second;
    }
    std::string base = c.parents.empty() ? empty_tree() : c.parents.front();
    auto out = git({"-c", "diff.renames=true", "-c", "core.quotepath=off", "diff",
                                "-U0", "--no-color", "--no-ext-diff", "--src-prefix=a/",
                                "--dst-prefix=b/", base, c.hash});
    auto parsed = std::make_shared<const std::vector<FileDiff>>(parse::unified_diff(out));
    std::lock_guard lock(mutex_);
    diff_cache_.emplace(c.hash, parsed);
    return parsed;
  }

  // `git blame -w --line-porcelain <commit> -- <path>`, memoised.
  std::shared_ptr<const std::vector<LineAttribution>> blame_at(const std::string& commit,
                                                               const std::string& path) const {
    auto key = commit + '\0' + path;
    {
      std::lock_guard lock(mutex_);
      if (auto it = blame_cache_.find(key); it != blame_cache_.end()) return it->second;
    }
    auto r = git_raw({"blame", "-w", "--line-porcelain", commit, "--", path});
    if (r.exit_code != 0) {
      if (r.err.find("no such path") != std::string::npos || r.err.find("no such ref") != std::string::npos)
        throw PathAbsentError("path '" + path + "' absent at " + commit);
      throw RepositoryError("git blame failed: " + r.err);
    }
    auto parsed = std::make_shared<const std::vector<LineAttribution>>(
        parse::blame_porcelain(r.out, commit, path));
    std::lock_guard lock(mutex_);
    blame_cache_.emplace(key, parsed);
    return parsed;
  }

  std::vector<TreeEntry> tree(const std::string& commit) const {
    auto out = git({"-c", "core.quotepath=off", "ls-tree", "-r", commit});
    std::vector<TreeEntry> entries;
    for (auto l : parse::lines(out)) {
      // <mode> SP <type> SP <object> TAB <path>
      auto tab = l.find('\t');
      if (tab == std::string_view::npos) throw ParseError("unparseable ls-tree line: '" + std::string(l) + "'");
      auto meta = parse::split(l.substr(0, tab), ' ');
      if (meta.size() < 3 || meta[1] != "blob") continue;
      entries.push_back({parse::unquote_path(l.substr(tab + 1)), std::string(meta[2])});
    }
    return entries;
  }

  std::shared_ptr<const std::string> blob(const std::string& object) const {
    {
      std::lock_guard lock(mutex_);
      if (auto it = blob_cache_.find(object); it != blob_cache_.end()) return it->second;
    }
    auto content = std::make_shared<const std::string>(git({"cat-file", "blob", object}));
    std::lock_guard lock(mutex_);
    blob_cache_.emplace(object, content);
    return content;
  }

  std::optional<std::string> file_at(const std::string& commit, const std::string& path) const {
    auto r = git_raw({"cat-file", "blob", commit + ":" + path});
    if (r.exit_code != 0) return std::nullopt;
    return std::move(r.out);
  }

  std::string git(const std::vector<std::string>& args) const {
    auto r = git_raw(args);
    if (r.exit_code != 0) {
      std::string cmd;
      for (const auto& a : args) cmd += " " + a;
      throw RepositoryError("git" + cmd + " failed: " + r.err);
    }
    return std::move(r.out);
  }

  ProcessResult git_raw(const std::vector<std::string>& args) const {
    std::vector<std::string> argv{git_binary(), "-C", path_.string()};
    argv.insert(argv.end(), args.begin(), args.end());
    try {
      return run_process(argv, {}, {{"LC_ALL", "C"}, {"GIT_PAGER", "cat"}});
    } catch (const SpawnError& e) {
      throw GitMissingError("git executable unavailable: " + std::string(e.what()));
    }
  }

 private:
  bool has_any_ref() const {
    auto out = git({"for-each-ref", "--count=1", "--format=%(refname)"});
    if (!out.empty()) return true;
    return git_raw({"rev-parse", "--verify", "--quiet", "HEAD"}).exit_code == 0;
  }

  void require_branch(const std::string& branch) const {
    auto r = git_raw({"rev-parse", "--verify", "--quiet", branch + "^{commit}"});
    if (r.exit_code != 0) throw UnknownBranchError("unknown branch '" + branch + "'");
  }

  CommitRecord commit_stub(const std::string& hash) const {
    auto out = git({"rev-list", "--parents", "-n", "1", hash});
    auto parts = parse::split(parse::lines(out).at(0), ' ');
    CommitRecord c;
    c.hash = std::string(parts.at(0));
    for (std::size_t i = 1; i < parts.size(); ++i) c.parents.emplace_back(parts[i]);
    return c;
  }

  const std::string& empty_tree() const {
    std::lock_guard lock(mutex_);
    if (empty_tree_.empty()) {
      auto r = run_process({git_binary(), "-C", path_.string(), "hash-object", "-t", "tree", "--stdin"}, {});
      empty_tree_ = std::string(parse::lines(r.out).at(0));
    }
    return empty_tree_;
  }

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  mutable std::string empty_tree_;
  mutable std::map<std::string, std::shared_ptr<const std::vector<FileDiff>>> diff_cache_;
  mutable std::map<std::string, std::shared_ptr<const std::vector<LineAttribution>>> blame_cache_;
  mutable std::map<std::string, std::shared_ptr<const std::string>> blob_cache_;
};

// Applies the filter-ordering variant to a freshly extracted history.
// filter_before_store drops filtered rows at extraction time, together with
// commits whose every change was dropped; filter_at_analysis keeps the raw
// tables and leaves filtering to the analysis stage.
inline ExtractedHistory store(ExtractedHistory raw, const FilterConfig& filters) {
  if (filters.order == FilterOrder::filter_at_analysis || filters.empty()) return raw;
  FileFilter f(filters);
  std::map<std::string, std::pair<int, int>> per_commit;  // (total, kept)
  std::vector<FileChange> kept;
  for (auto& c : raw.file_changes) {
    auto& slot = per_commit[c.commit];
    ++slot.first;
    if (f.keeps(c)) {
      ++slot.second;
      kept.push_back(std::move(c));
    }
  }
  raw.file_changes = std::move(kept);
  std::vector<CommitRecord> commits;
  for (auto& c : raw.commits) {
    auto it = per_commit.find(c.hash);
    if (it != per_commit.end() && it->second.second == 0) continue;
    commits.push_back(std::move(c));
  }
  raw.commits = std::move(commits);
  return raw;
}

inline std::string commits_csv(const std::vector<CommitRecord>& commits) {
  csv::Writer w({"hash", "author_name", "author_email", "committer_name", "committer_email",
                 "author_time", "commit_time", "parents"});
  for (const auto& c : commits) {
    std::string parents;
    for (const auto& p : c.parents) parents += (parents.empty() ? "" : " ") + p;
    w.row({c.hash, c.author_name, c.author_email, c.committer_name, c.committer_email,
           std::to_string(c.author_time), std::to_string(c.commit_time), parents});
  }
  return w.str();
}

inline std::string file_changes_csv(const std::vector<FileChange>& changes) {
  csv::Writer w({"hash", "path", "old_path", "added", "deleted", "binary"});
  for (const auto& c : changes) {
    w.row({c.commit, c.path, c.old_path.value_or(""),
           c.lines_added ? std::to_string(*c.lines_added) : "",
           c.lines_deleted ? std::to_string(*c.lines_deleted) : "", c.is_binary ? "1" : "0"});
  }
  return w.str();
}

}  // namespace msrlab::gitio
