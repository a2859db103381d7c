#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/gitio.hpp"

namespace msrlab::identity {

struct RawIdentity {
  std::string name;
  std::string email;
  auto operator<=>(const RawIdentity&) const = default;
};

struct CanonicalDeveloper {
  std::string id;
  std::string display_name;
  std::vector<RawIdentity> members;  // sorted
};

enum class Scope { author_only, author_and_committer };
enum class Mode { exact, edit_distance };

inline std::string to_string(Scope s) {
  return s == Scope::author_only ? "author_only" : "author_and_committer";
}
inline std::string to_string(Mode m) { return m == Mode::exact ? "exact" : "edit_distance"; }

// Case-fold (ASCII), trim, collapse internal whitespace.
inline std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char ch : name) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

// Strips "(comments)" and angle brackets, trims, lowercases.
inline std::string normalize_email(std::string_view email) {
  std::string no_comments;
  int depth = 0;
  for (char c : email) {
    if (c == '(') {
      ++depth;
      continue;
    }
    if (c == ')' && depth > 0) {
      --depth;
      continue;
    }
    if (depth == 0 && c != '<' && c != '>') no_comments += c;
  }
  std::string out;
  for (char ch : no_comments) {
    auto c = static_cast<unsigned char>(ch);
    if (!std::isspace(c)) out += static_cast<char>(std::tolower(c));
  }
  return out;
}

inline std::string email_local_part(std::string_view normalized_email) {
  auto at = normalized_email.find('@');
  return std::string(normalized_email.substr(0, at));
}

// Decodes UTF-8 into code points; invalid bytes map to themselves.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len <= 1 || i + len > s.size()) {
      out += static_cast<char32_t>(c);
      ++i;
      continue;
    }
    char32_t cp = c & (0x7F >> len);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out += static_cast<char32_t>(c);
      ++i;
      continue;
    }
    out += cp;
    i += len;
  }
  return out;
}

// Levenshtein distance over code points.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  auto x = decode_utf8(a);
  auto y = decode_utf8(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::vector<RawIdentity> dedupe(std::vector<RawIdentity> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline std::vector<CanonicalDeveloper> blocks(const std::vector<RawIdentity>& ids, UnionFind& uf) {
  std::map<std::size_t, std::vector<RawIdentity>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[uf.find(i)].push_back(ids[i]);
  std::vector<CanonicalDeveloper> devs;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    CanonicalDeveloper d;
    std::uint64_t h = 1469598103934665603ULL;
    std::string smallest;
    bool first = true;
    for (const auto& m : members) {
      h = fnv1a(m.name, h);
      h = fnv1a(std::string_view("\x1f", 1), h);
      h = fnv1a(m.email, h);
      h = fnv1a(std::string_view("\x1e", 1), h);
      auto n = normalize_name(m.name);
      if (first || n < smallest) smallest = n;
      first = false;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    d.id = std::string("dev-") + std::string(buf, 12);
    d.display_name = smallest;
    d.members = std::move(members);
    devs.push_back(std::move(d));
  }
  std::sort(devs.begin(), devs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return devs;
}

}  // namespace detail

// Merge iff normalized full names are equal, or emails are equal, or email
// local parts are equal; closed transitively. Empty keys never match.
inline std::vector<CanonicalDeveloper> canonicalize_exact(std::vector<RawIdentity> identities) {
  auto ids = detail::dedupe(std::move(identities));
  UnionFind uf(ids.size());
  std::map<std::string, std::size_t> by_name, by_email, by_local;
  auto link = [&](std::map<std::string, std::size_t>& index, const std::string& key, std::size_t i) {
    if (key.empty()) return;
    auto [it, inserted] = index.emplace(key, i);
    if (!inserted) uf.unite(it->second, i);
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto email = normalize_email(ids[i].email);
    link(by_name, normalize_name(ids[i].name), i);
    link(by_email, email, i);
    link(by_local, email_local_part(email), i);
  }
  return detail::blocks(ids, uf);
}

// Merge iff min(edit distance of normalized names, edit distance of email
// local parts) <= threshold; closed transitively. Pairs with an empty field
// on either side do not compare on that field.
inline std::vector<CanonicalDeveloper> canonicalize_edit_distance(std::vector<RawIdentity> identities,
                                                                  std::size_t threshold) {
  auto ids = detail::dedupe(std::move(identities));
  std::vector<std::string> names, locals;
  for (const auto& id : ids) {
    names.push_back(normalize_name(id.name));
    locals.push_back(email_local_part(normalize_email(id.email)));
  }
  UnionFind uf(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (uf.find(i) == uf.find(j)) continue;
      bool merge = false;
      if (!names[i].empty() && !names[j].empty() && edit_distance(names[i], names[j]) <= threshold)
        merge = true;
      if (!merge && !locals[i].empty() && !locals[j].empty() &&
          edit_distance(locals[i], locals[j]) <= threshold)
        merge = true;
      if (merge) uf.unite(i, j);
    }
  }
  return detail::blocks(ids, uf);
}

inline std::vector<RawIdentity> collect_identities(const std::vector<gitio::CommitRecord>& commits, Scope scope) {
  std::vector<RawIdentity> ids;
  for (const auto& c : commits) {
    ids.push_back({c.author_name, c.author_email});
    if (scope == Scope::author_and_committer) ids.push_back({c.committer_name, c.committer_email});
  }
  return detail::dedupe(std::move(ids));
}

// Lookup from raw identity to canonical developer.
class Resolver {
 public:
  Resolver() = default;
  explicit Resolver(std::vector<CanonicalDeveloper> devs) : devs_(std::move(devs)) {
    for (std::size_t i = 0; i < devs_.size(); ++i) {
      by_id_[devs_[i].id] = i;
      for (const auto& m : devs_[i].members) by_raw_[m] = i;
    }
  }

  std::optional<std::string> find(const RawIdentity& raw) const {
    auto it = by_raw_.find(raw);
    if (it == by_raw_.end()) return std::nullopt;
    return devs_[it->second].id;
  }

  const std::string& id_of(const RawIdentity& raw) const {
    auto it = by_raw_.find(raw);
    if (it == by_raw_.end())
      throw InvalidArgumentError("unresolved identity '" + raw.name + " <" + raw.email + ">'");
    return devs_[it->second].id;
  }

  const std::string& author_of(const gitio::CommitRecord& c) const { return id_of({c.author_name, c.author_email}); }

  const CanonicalDeveloper& developer(const std::string& id) const { return devs_.at(by_id_.at(id)); }
  const std::string& display_name(const std::string& id) const { return developer(id).display_name; }
  const std::vector<CanonicalDeveloper>& developers() const noexcept { return devs_; }

 private:
  std::vector<CanonicalDeveloper> devs_;
  std::map<std::string, std::size_t> by_id_;
  std::map<RawIdentity, std::size_t> by_raw_;
};

struct IdentityConfig {
  Mode mode = Mode::exact;
  std::size_t threshold = 1;
  Scope scope = Scope::author_only;
  bool operator==(const IdentityConfig&) const = default;
};

inline Resolver resolve(const std::vector<gitio::CommitRecord>& commits, const IdentityConfig& cfg) {
  auto ids = collect_identities(commits, cfg.scope);
  auto devs = cfg.mode == Mode::exact ? canonicalize_exact(std::move(ids))
                                      : canonicalize_edit_distance(std::move(ids), cfg.threshold);
  return Resolver(std::move(devs));
}

inline std::string identities_csv(const std::vector<CanonicalDeveloper>& devs) {
  csv::Writer w({"dev_id", "display_name", "raw_name", "raw_email"});
  for (const auto& d : devs)
    for (const auto& m : d.members) w.row({d.id, d.display_name, m.name, m.email});
  return w.str();
}

}  // namespace msrlab::identity
