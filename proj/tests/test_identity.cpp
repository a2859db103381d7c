#include <gtest/gtest.h>

#include <set>

#include "msrlab/identity.hpp"

using namespace msrlab;
using namespace msrlab::identity;

TEST(IdentityNormalize, NamesAndEmails) {
  EXPECT_EQ(normalize_name("  Alice   SMITH "), "alice smith");
  EXPECT_EQ(normalize_email("<Alice@Example.ORG>"), "alice@example.org");
  EXPECT_EQ(email_local_part("alice@example.org"), "alice");
}

TEST(IdentityNormalize, EditDistance) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("same", "same"), 0u);
}

TEST(IdentityExact, MergesOnNameEmailOrLocalPart) {
  auto devs = canonicalize_exact({{"Alice Smith", "alice@example.org"},
                                  {"alice smith", "a.smith@corp.com"},
                                  {"A. S.", "alice@other.net"},
                                  {"Bob", "bob@example.org"}});
  ASSERT_EQ(devs.size(), 2u);
  std::size_t sizes = devs[0].members.size() + devs[1].members.size();
  EXPECT_EQ(sizes, 4u);
}

TEST(IdentityExact, EmptyKeysNeverMatch) {
  auto devs = canonicalize_exact({{"", "x@a.org"}, {"", "y@b.org"}});
  EXPECT_EQ(devs.size(), 2u);
}

TEST(IdentityEditDistance, ThresholdControlsMerging) {
  std::vector<RawIdentity> ids{{"Jon Smith", "jon@a.org"}, {"John Smith", "johns@b.org"}};
  EXPECT_EQ(canonicalize_edit_distance(ids, 0).size(), 2u);
  EXPECT_EQ(canonicalize_edit_distance(ids, 1).size(), 1u);
}

TEST(IdentityIds, StableAndOrderIndependent) {
  std::vector<RawIdentity> a{{"Alice", "alice@x.org"}, {"Bob", "bob@x.org"}};
  std::vector<RawIdentity> b{a[1], a[0]};
  auto da = canonicalize_exact(a), db = canonicalize_exact(b);
  ASSERT_EQ(da.size(), db.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    EXPECT_EQ(da[i].id, db[i].id);
    EXPECT_EQ(da[i].id.size(), 16u);
    EXPECT_EQ(da[i].id.rfind("dev-", 0), 0u);
  }
}

TEST(IdentityResolve, EveryAuthorResolves) {
  gitio::CommitRecord c1, c2;
  c1.author_name = "Alice";
  c1.author_email = "alice@x.org";
  c1.committer_name = "CI";
  c1.committer_email = "ci@x.org";
  c2.author_name = "alice";
  c2.author_email = "ALICE@x.org";
  auto r = resolve({c1, c2}, {});
  EXPECT_EQ(r.author_of(c1), r.author_of(c2));
  EXPECT_FALSE(r.find({"CI", "ci@x.org"}).has_value());
  auto both = resolve({c1, c2}, {Mode::exact, 1, Scope::author_and_committer});
  EXPECT_TRUE(both.find({"CI", "ci@x.org"}).has_value());
}

TEST(IdentityResolve, TransitiveClosureProperty) {
  // Chain a~b (email), b~c (name): all three in one developer.
  auto devs = canonicalize_exact({{"A", "shared@x.org"}, {"B", "shared@x.org"}, {"B", "other@y.org"}});
  EXPECT_EQ(devs.size(), 1u);
}

TEST(IdentityCsv, Header) {
  EXPECT_EQ(identities_csv({}), "dev_id,display_name,raw_name,raw_email\n");
}
