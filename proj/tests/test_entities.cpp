#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "msrlab/entities.hpp"
#include "msrlab/gitio.hpp"

using namespace msrlab;
using namespace msrlab::entities;

TEST(EntityLanguage, ByExtension) {
  EXPECT_EQ(language_for_path("a/b.c"), Language::c);
  EXPECT_EQ(language_for_path("x.H"), Language::c);
  EXPECT_EQ(language_for_path("Main.java"), Language::java);
  EXPECT_EQ(language_for_path("s.py"), Language::python);
  EXPECT_EQ(language_for_path("README.md"), Language::unsupported);
}

TEST(EntityBlocks, ProximityRuns) {
  EXPECT_EQ(detect_blocks_proximity({1, 2, 3, 7, 8, 20}, 0),
            (std::vector<LineBlock>{{1, 3}, {7, 8}, {20, 20}}));
  EXPECT_EQ(detect_blocks_proximity({1, 3, 5}, 1), (std::vector<LineBlock>{{1, 5}}));
  EXPECT_TRUE(detect_blocks_proximity({}, 0).empty());
  EXPECT_THROW(detect_blocks_proximity({3, 1}, 0), InvalidArgumentError);
  EXPECT_THROW(detect_blocks_proximity({1}, -1), InvalidArgumentError);
}

TEST(EntityBlocks, GapMonotonicity) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::int64_t> s;
    int n = static_cast<int>(gen() % 30);
    for (int i = 0; i < n; ++i) s.insert(static_cast<std::int64_t>(gen() % 100) + 1);
    std::vector<std::int64_t> lines(s.begin(), s.end());
    std::size_t prev = SIZE_MAX;
    for (std::int64_t gap = 0; gap < 6; ++gap) {
      auto b = detect_blocks_proximity(lines, gap);
      EXPECT_LE(b.size(), prev);
      prev = b.size();
    }
  }
}

TEST(EntityDetect, CFunctions) {
  std::string src =
      "#include <stdio.h>\n"
      "/* int fake(void) { } */\n"
      "static int add(int a, int b)\n"
      "{\n"
      "  if (a) { return a + b; }\n"
      "  return b;\n"
      "}\n"
      "struct point { int x; int y; };\n"
      "int main(void) {\n"
      "  const char* s = \"}{\";\n"
      "  return add(1, 2);\n"
      "}\n";
  auto r = detect_entities_declared(src, Language::c, "a.c");
  ASSERT_EQ(count_functions(r), 2u);
  std::vector<std::string> names;
  for (const auto& s : r.spans)
    if (s.kind == EntityKind::function) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"add", "main"}));
  EXPECT_EQ(r.spans.front().start_line, 3);
}

TEST(EntityDetect, JavaMethodsInsideClass) {
  std::string src =
      "public class Foo {\n"
      "  private int x;\n"
      "  public Foo(int x) { this.x = x; }\n"
      "  int get() {\n"
      "    return x;\n"
      "  }\n"
      "  void loop() { for (int i = 0; i < 3; i++) { x++; } }\n"
      "}\n";
  auto r = detect_entities_declared(src, Language::java, "Foo.java");
  EXPECT_EQ(count_functions(r), 3u);
}

TEST(EntityDetect, PythonDefs) {
  std::string src =
      "import os\n"
      "\n"
      "def top(a):\n"
      "    return a\n"
      "\n"
      "class K:\n"
      "    def m(self):\n"
      "        s = '''\n"
      "def fake():\n"
      "'''\n"
      "        return s\n"
      "\n"
      "async def later():\n"
      "    pass\n";
  auto r = detect_entities_declared(src, Language::python, "k.py");
  EXPECT_EQ(count_functions(r), 3u);
}

TEST(EntityDetect, UnsupportedFallsBackToFile) {
  auto r = detect_entities_declared("a\nb\nc\n", Language::unsupported, "x.md");
  ASSERT_EQ(r.spans.size(), 1u);
  EXPECT_EQ(r.spans[0].name, kFileEntity);
  EXPECT_EQ(r.spans[0].end_line, 3);
}

TEST(EntityDetect, InvalidUtf8Flagged) {
  auto r = detect_entities_declared(std::string("int f() {\n\xff\xfe\n}\n"), Language::c, "x.c");
  EXPECT_TRUE(r.lossy_decode);
  EXPECT_EQ(count_functions(r), 1u);
}

namespace {

gitio::FileDiff diff_with_hunks(const std::vector<std::pair<std::int64_t, std::int64_t>>& added_runs) {
  gitio::FileDiff d;
  d.path = "f.c";
  for (auto [start, n] : added_runs) {
    gitio::Hunk h;
    h.old_start = start;
    h.old_count = n;
    h.new_start = start;
    h.new_count = n;
    for (std::int64_t k = 0; k < n; ++k) {
      h.added.push_back("x");
      h.deleted.push_back("y");
    }
    d.hunks.push_back(h);
  }
  return d;
}

}  // namespace

TEST(EntityMapping, MultiHunkFunction) {
  std::vector<EntitySpan> spans{{"f.c", EntityKind::function, "f", 1, 30}};
  auto d = diff_with_hunks({{3, 1}, {10, 1}, {17, 1}});
  auto lines = changed_lines(d);
  auto summary = map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, 0, true}, "c", "f.c", "d");
  auto distinct = map_changes_to_entities(lines, spans, spans, {CountingMode::distinct_blocks, 0, true}, "c", "f.c", "d");
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0].lines_changed, 6);
  ASSERT_EQ(distinct.size(), 3u);
  for (std::size_t i = 0; i < distinct.size(); ++i) EXPECT_EQ(distinct[i].block_index.value(), static_cast<std::int64_t>(i));
}

TEST(EntityMapping, FallbackToggle) {
  std::vector<EntitySpan> spans{{"f.c", EntityKind::function, "f", 10, 20}};
  auto lines = changed_lines(diff_with_hunks({{2, 1}, {12, 1}}));
  auto with = map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, 0, true}, "c", "f.c", "d");
  auto without = map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, 0, false}, "c", "f.c", "d");
  ASSERT_EQ(with.size(), 2u);
  EXPECT_EQ(with[0].entity_name, kFileEntity);
  ASSERT_EQ(without.size(), 1u);
  EXPECT_EQ(without[0].entity_name, "f");
}

TEST(EntityMapping, DeletedOnlyHunkResolvesOnPreImage) {
  gitio::FileDiff d;
  d.path = "f.c";
  gitio::Hunk h;
  h.old_start = 5;
  h.old_count = 2;
  h.new_start = 4;
  h.new_count = 0;
  h.deleted = {"a", "b"};
  d.hunks.push_back(h);
  auto lines = changed_lines(d);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].image, Image::pre);
  std::vector<EntitySpan> pre{{"f.c", EntityKind::function, "old", 4, 8}};
  auto recs = map_changes_to_entities(lines, {}, pre, {}, "c", "f.c", "d");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].entity_name, "old");
}

// distinct_blocks yields at least as many records as summarise_per_entity,
// and both count every changed line when fallback is on.
TEST(EntityMapping, DistinctDominatesSummaryOnRandomDiffs) {
  std::mt19937_64 gen(2024);
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
    auto lines = changed_lines(diff_with_hunks(runs));
    auto gap = static_cast<std::int64_t>(gen() % 3);
    auto s = map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, gap, true}, "c", "f.c", "d");
    auto d = map_changes_to_entities(lines, spans, spans, {CountingMode::distinct_blocks, gap, true}, "c", "f.c", "d");
    ASSERT_GE(d.size(), s.size());
    std::int64_t ls = 0, ld = 0;
    for (const auto& r : s) ls += r.lines_changed;
    for (const auto& r : d) ld += r.lines_changed;
    ASSERT_EQ(ls, static_cast<std::int64_t>(lines.size()));
    ASSERT_EQ(ld, ls);
  }
}

TEST(EntityFixture, ThreeHunksOnRealRepository) {
  fixtures::Repo repo("f2");
  auto hash = fixtures::build_multi_hunk_fixture(repo);
  gitio::Repository r(repo.path());
  auto h = r.extract_history(gitio::BranchMode::single_branch, "main");
  const auto& c = h.commits.back();
  ASSERT_EQ(c.hash, hash);
  auto diffs = r.diff_hunks(c);
  ASSERT_EQ(diffs->size(), 1u);
  EXPECT_EQ((*diffs)[0].hunks.size(), 3u);
  auto spans = detect_entities_declared(*r.file_at(c.hash, "f.c"), Language::c, "f.c").spans;
  auto lines = changed_lines((*diffs)[0]);
  EXPECT_EQ(map_changes_to_entities(lines, spans, spans, {CountingMode::distinct_blocks, 0, true}, c.hash, "f.c", "d").size(), 3u);
  EXPECT_EQ(map_changes_to_entities(lines, spans, spans, {CountingMode::summarise_per_entity, 0, true}, c.hash, "f.c", "d").size(), 1u);
}

TEST(EntityCsv, Header) {
  EXPECT_EQ(entity_changes_csv({}), "hash,path,entity,dev_id,lines,block_index,mode\n");
}
