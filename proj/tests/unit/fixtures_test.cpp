// The committed cassettes and 400-case corpus must be what make_fixtures
// produces from the scripts; regenerate with `make_fixtures data/fixtures`.
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vgbench/run_store.hpp"

using namespace vgbench;

TEST(Fixtures, CassettesAreUpToDate) {
  const auto dir = fixtures::fixture_dir();
  const auto corpus = load_corpus(dir / "review_vignettes.jsonl");
  const auto fresh = fixtures::record_fixture_cassettes(corpus, fixtures::load_scripts(dir / "scripts.json"));
  EXPECT_EQ(fresh.actor, read_file(dir / "actor.cassette"));
  EXPECT_EQ(fresh.sut, read_file(dir / "sut.cassette"));
  EXPECT_EQ(fresh.sut_partial, read_file(dir / "sut_partial.cassette"));
}

TEST(Fixtures, TableCorpusIsUpToDate) {
  EXPECT_EQ(serialize_corpus(fixtures::make_table_fixture().corpus),
            read_file(fixtures::fixture_dir() / "corpus400.jsonl"));
}

// the three-case corpus is a subset of the review corpus
TEST(Fixtures, TrioIsSubsetOfReviewCorpus) {
  const auto trio = load_corpus(fixtures::fixture_dir() / "vignettes.jsonl");
  const auto review = load_corpus(fixtures::fixture_dir() / "review_vignettes.jsonl");
  for (const auto& v : trio.vignettes()) {
    const auto* r = review.find(v.id);
    ASSERT_NE(r, nullptr) << v.id;
    EXPECT_EQ(*r, v);
  }
}
