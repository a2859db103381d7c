#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "msrlab/gitio.hpp"
#include "msrlab/process.hpp"
#include "msrlab/rng.hpp"
#include "msrlab/windows.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() /
             ("msrlab-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Person {
  std::string name;
  std::string email;
};

// Scripted repository with pinned identities and dates; removed on scope exit
// unless keep() was called.
class Repo {
 public:
  explicit Repo(const std::string& name) : dir_(scratch_dir(name)) {
    git({"init", "-q", "-b", "main"});
  }
  ~Repo() {
    if (!keep_) {
      std::error_code ec;
      fs::remove_all(dir_, ec);
    }
  }
  Repo(const Repo&) = delete;
  Repo& operator=(const Repo&) = delete;

  const fs::path& path() const { return dir_; }
  void keep() { keep_ = true; }

  std::string git(const std::vector<std::string>& args, const std::map<std::string, std::string>& env = {}) const {
    std::vector<std::string> argv{"git", "-C", dir_.string(), "-c", "commit.gpgsign=false", "-c",
                                  "core.autocrlf=false"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::map<std::string, std::string> e{{"GIT_CONFIG_NOSYSTEM", "1"}, {"HOME", dir_.string()},
                                         {"LC_ALL", "C"}, {"TZ", "UTC"}};
    for (const auto& [k, v] : env) e[k] = v;
    auto r = msrlab::run_process(argv, {}, e);
    if (r.exit_code != 0) throw std::runtime_error("fixture git failed: " + r.err);
    return r.out;
  }

  void write(const std::string& rel, const std::string& content) const {
    auto p = dir_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
  }

  void remove(const std::string& rel) const { fs::remove(dir_ / rel); }

  // Stages everything and commits at `t` (UTC seconds); returns the hash.
  std::string commit(const std::string& message, const Person& who, std::int64_t t) const {
    git({"add", "-A"});
    git({"commit", "-q", "--allow-empty", "-m", message}, env_for(who, t));
    return head();
  }

  std::string merge(const std::string& branch, const std::string& message, const Person& who, std::int64_t t) const {
    git({"merge", "-q", "--no-ff", "--no-edit", "-m", message, branch}, env_for(who, t));
    return head();
  }

  void checkout(const std::string& branch, bool create = false) const {
    if (create) git({"checkout", "-q", "-b", branch});
    else git({"checkout", "-q", branch});
  }

  std::string head() const {
    auto out = git({"rev-parse", "HEAD"});
    return out.substr(0, out.find('\n'));
  }

  std::vector<std::string> rev_list(const std::vector<std::string>& args) const {
    std::vector<std::string> a{"rev-list"};
    a.insert(a.end(), args.begin(), args.end());
    const auto text = git(a);
    std::vector<std::string> out;
    for (auto l : msrlab::gitio::parse::lines(text)) out.emplace_back(l);
    return out;
  }

  static std::map<std::string, std::string> env_for(const Person& who, std::int64_t t) {
    auto date = std::to_string(t) + " +0000";
    return {{"GIT_AUTHOR_NAME", who.name},     {"GIT_AUTHOR_EMAIL", who.email}, {"GIT_AUTHOR_DATE", date},
            {"GIT_COMMITTER_NAME", who.name},  {"GIT_COMMITTER_EMAIL", who.email},
            {"GIT_COMMITTER_DATE", date}};
  }

 private:
  fs::path dir_;
  bool keep_ = false;
};

inline std::int64_t day(int y, unsigned m, unsigned d, int h = 12) { return msrlab::windows::utc(y, m, d, h); }

inline const Person alice{"Alice Smith", "alice@example.org"};
inline const Person bob{"Bob Jones", "bob@example.org"};
inline const Person carol{"Carol White", "carol@example.org"};
inline const Person dave{"Dave Brown", "dave@example.org"};
inline const Person erin{"Erin Green", "erin@example.org"};

// F1: 12 commits over two branches. Main gets early activity, the feature
// branch gets late activity that is merged at the end.
inline void build_branch_fixture(Repo& r) {
  r.write("src/core.c", "int core(void) {\n  return 1;\n}\n");
  r.commit("init", alice, day(2020, 1, 10));
  r.write("src/core.c", "int core(void) {\n  return 2;\n}\n");
  r.commit("c2", alice, day(2020, 2, 10));
  r.write("src/util.c", "int util(void) {\n  return 0;\n}\n");
  r.commit("c3", bob, day(2020, 3, 10));
  r.write("src/util.c", "int util(void) {\n  return 3;\n}\n");
  r.commit("c4", bob, day(2020, 4, 10));
  r.checkout("feature", true);
  r.write("src/feature.c", "int feature(void) {\n  return 5;\n}\n");
  r.commit("f1", carol, day(2020, 7, 5));
  r.write("src/feature.c", "int feature(void) {\n  return 6;\n}\n");
  r.commit("f2", carol, day(2020, 8, 5));
  r.write("src/feature.c", "int feature(void) {\n  return 7;\n}\n");
  r.commit("f3", dave, day(2020, 10, 5));
  r.write("src/feature.c", "int feature(void) {\n  return 8;\n}\n");
  r.commit("f4", dave, day(2020, 11, 5));
  r.write("src/feature.c", "int feature(void) {\n  return 9;\n}\n");
  r.commit("f5", carol, day(2020, 12, 5));
  r.checkout("main");
  r.write("src/core.c", "int core(void) {\n  return 4;\n}\n");
  r.commit("c5", alice, day(2020, 5, 10));
  r.write("src/util.c", "int util(void) {\n  return 4;\n}\n");
  r.commit("c6", bob, day(2020, 6, 10));
  r.write("README.md", "docs\n");
  r.commit("c7", alice, day(2020, 8, 20));
}

// F2: one C function edited in three separated hunks by one commit.
inline std::string build_multi_hunk_fixture(Repo& r) {
  std::string before = "int f(int x) {\n";
  for (int i = 0; i < 20; ++i) before += "  x = x + " + std::to_string(i) + ";\n";
  before += "  return x;\n}\n";
  r.write("f.c", before);
  r.commit("init", alice, day(2021, 1, 5));
  std::string after = "int f(int x) {\n";
  for (int i = 0; i < 20; ++i) {
    bool edit = i == 2 || i == 9 || i == 16;
    after += "  x = x " + std::string(edit ? "* " : "+ ") + std::to_string(i) + ";\n";
  }
  after += "  return x;\n}\n";
  r.write("f.c", after);
  return r.commit("edit three places", bob, day(2021, 1, 6));
}


// F3: six modules a..f over one six-month period starting 2021-01-01. Code
// newcomers put more churn into modules with higher bug density; newcomers
// writing documentation put more churn into modules with lower density.
// Module line counts for a loc table are returned in `loc`; the hash of the
// one bug-fix commit (touching every module) is returned.
inline std::string build_doc_flip_fixture(Repo& r, std::map<std::string, std::int64_t>& loc) {
  const std::vector<std::string> modules{"a", "b", "c", "d", "e", "f"};
  for (const auto& m : modules) r.write(m + "/x.c", "int " + m + "_x = 0;\n");
  r.commit("init", alice, day(2021, 1, 3));
  for (const auto& m : modules) r.write(m + "/x.c", "int " + m + "_x = 1;\n");
  auto fix = r.commit("fix initial values", alice, day(2021, 1, 10));
  for (std::size_t i = 0; i < modules.size(); ++i) {
    const auto& m = modules[i];
    std::string body = "int " + m + "_x = 1;\n";
    for (std::size_t k = 0; k <= i; ++k) body += "int " + m + "_y" + std::to_string(k) + " = 2;\n";
    r.write(m + "/x.c", body);
    r.commit("extend " + m, {"Coder " + m, "coder-" + m + "@example.org"}, day(2021, 1, 20, 10 + static_cast<int>(i)));
  }
  for (std::size_t i = 0; i < modules.size(); ++i) {
    const auto& m = modules[i];
    std::string doc;
    for (std::size_t k = 0; k < (modules.size() - i) * 100; ++k) doc += "Line " + std::to_string(k) + " of notes.\n";
    r.write(m + "/README.md", doc);
    r.commit("document " + m, {"Writer " + m, "writer-" + m + "@example.org"}, day(2021, 6, 25, 10 + static_cast<int>(i)));
  }
  loc.clear();
  for (std::size_t i = 0; i < modules.size(); ++i) loc[modules[i]] = static_cast<std::int64_t>(600 / (i + 1));
  return fix;
}

// Seeded synthetic history of `n` commits by eight developers over C,
// Python and Markdown files, with one topic branch merged back. Returns the
// hashes of commits whose message marks a fix.
inline std::vector<std::string> build_synthetic_history(Repo& r, int n, std::uint64_t seed) {
  msrlab::SplitMix64 rng(seed);
  struct Fn {
    std::string name;
    std::vector<std::string> body;
  };
  std::map<std::string, std::vector<Fn>> files;
  std::vector<Person> devs;
  for (int d = 0; d < 8; ++d)
    devs.push_back({"Dev " + std::string(1, static_cast<char>('A' + d)), "dev" + std::to_string(d) + "@example.org"});
  const std::vector<std::string> dirs{"core", "net", "util", "tools"};
  int fn_counter = 0;
  auto render_fns = [&](const std::string& path, const std::vector<Fn>& fns) {
    std::string text;
    bool py = path.size() > 3 && path.substr(path.size() - 3) == ".py";
    for (const auto& f : fns) {
      if (py) {
        text += "def " + f.name + "(x):\n";
        for (const auto& l : f.body) text += "    " + l + "\n";
        text += "    return x\n\n";
      } else {
        text += "int " + f.name + "(int x) {\n";
        for (const auto& l : f.body) text += "  " + l + ";\n";
        text += "  return x;\n}\n\n";
      }
    }
    r.write(path, text);
  };
  auto render = [&](const std::string& path) { render_fns(path, files[path]); };
  auto new_fn = [&]() {
    Fn f{"fn" + std::to_string(fn_counter++), {}};
    auto lines = 2 + rng.below(6);
    for (std::uint64_t k = 0; k < lines; ++k) f.body.push_back("x = x + " + std::to_string(rng.below(100)));
    return f;
  };
  auto new_file = [&]() {
    auto dir = dirs[rng.below(dirs.size())];
    std::string path = dir + "/m" + std::to_string(files.size()) + (rng.below(3) == 0 ? ".py" : ".c");
    files[path] = {new_fn(), new_fn()};
    render(path);
    return path;
  };
  auto pick_file = [&]() {
    auto it = files.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng.below(files.size())));
    return it->first;
  };
  // Developers join and leave over time: developer d is active in commit
  // positions [d * n / 12, d * n / 12 + n / 2].
  auto pick_dev = [&](int i) {
    for (int tries = 0; tries < 64; ++tries) {
      auto d = static_cast<int>(rng.below(rng.below(4) == 0 ? devs.size() : 3));
      int from = d * n / 12, to = d * n / 12 + n / 2;
      if (d < 3 || (i >= from && i <= to)) return devs[static_cast<std::size_t>(d)];
    }
    return devs[0];
  };

  std::vector<std::string> fixes;
  std::int64_t t = day(2018, 1, 8);
  for (int k = 0; k < 3; ++k) new_file();
  r.write("README.md", "Synthetic project.\n");
  r.commit("initial import", devs[0], t);
  int branch_at = n / 2, merge_at = n / 2 + 30;
  bool on_topic = false;
  const std::string topic_file = "tools/topic.c";
  std::vector<Fn> topic_fns;
  for (int i = 1; i < n; ++i) {
    t += static_cast<std::int64_t>(86400 * (1 + rng.below(8)) + rng.below(3600));
    if (i == branch_at) {
      r.checkout("topic", true);
      on_topic = true;
    }
    if (on_topic && i < branch_at + 10) {
      topic_fns.push_back(new_fn());
      render_fns(topic_file, topic_fns);
      r.commit("topic work " + std::to_string(i), devs[3], t);
      if (i == branch_at + 9) {
        r.checkout("main");
        on_topic = false;
      }
      continue;
    }
    if (i == merge_at) {
      r.merge("topic", "merge topic", devs[0], t);
      files[topic_file] = topic_fns;
      continue;
    }
    auto action = rng.below(100);
    bool fix = false;
    if (action < 55 && !files.empty()) {
      auto path = pick_file();
      auto& fns = files[path];
      auto& f = fns[rng.below(fns.size())];
      auto edits = 1 + rng.below(3);
      for (std::uint64_t e = 0; e < edits; ++e) {
        auto at = rng.below(f.body.size());
        f.body[at] = "x = x * " + std::to_string(rng.below(100));
      }
      if (rng.below(3) == 0) f.body.push_back("x = x - " + std::to_string(rng.below(100)));
      render(path);
      fix = rng.below(4) == 0;
    } else if (action < 75) {
      auto path = pick_file();
      files[path].push_back(new_fn());
      render(path);
    } else if (action < 83) {
      new_file();
    } else if (action < 93) {
      auto dir = dirs[rng.below(dirs.size())];
      r.write(dir + "/NOTES.md", "Notes revision " + std::to_string(i) + ".\n" + std::string(rng.below(5), '-') + "\n");
    } else {
      auto path = pick_file();
      auto& fns = files[path];
      if (fns.size() > 1) fns.erase(fns.begin() + static_cast<std::ptrdiff_t>(rng.below(fns.size())));
      render(path);
    }
    auto h = r.commit(std::string(fix ? "fix" : "change") + " " + std::to_string(i), pick_dev(i), t);
    if (fix) fixes.push_back(h);
  }
  return fixes;
}

}  // namespace fixtures
