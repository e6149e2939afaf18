#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "mgtad/augment.hpp"
#include "mgtad/data.hpp"

using namespace mgtad;

namespace {

VideoAnnotation video(const std::string& id, std::vector<int> labels) {
  VideoAnnotation v;
  v.video_id = id;
  v.duration_s = 2.0 * static_cast<double>(labels.size()) + 1.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    v.instances.push_back({2.0 * i, 2.0 * i + 1.0, labels[i]});
  }
  return v;
}

std::vector<VideoAnnotation> zipf_annotations(std::uint64_t seed, std::size_t videos = 60) {
  SynthSpec spec;
  spec.zipf_exponent = 2.0;
  spec.num_videos = videos;
  std::vector<VideoAnnotation> out;
  for (auto& v : synth_generate(spec, seed).videos) out.push_back(v.annotation);
  return out;
}

}  // namespace

TEST(CountInstances, EmptyInputIsAllZeros) {
  EXPECT_EQ(count_instances({}, 3), (std::vector<std::uint64_t>{0, 0, 0}));
}

TEST(CountInstances, SmallTally) {
  EXPECT_EQ(count_instances({video("v", {0, 0, 1})}, 2), (std::vector<std::uint64_t>{2, 1}));
}

TEST(CountInstances, MatchesOnePassTallyOnZipfData) {
  const auto anns = zipf_annotations(11);
  std::map<int, std::uint64_t> tally;
  std::uint64_t total = 0;
  for (const auto& v : anns) {
    for (const auto& a : v.instances) ++tally[a.label], ++total;
  }
  const auto counts = count_instances(anns, 5);
  std::uint64_t sum = 0;
  for (int c = 0; c < 5; ++c) {
    EXPECT_EQ(counts[static_cast<std::size_t>(c)], tally[c]);
    sum += counts[static_cast<std::size_t>(c)];
  }
  EXPECT_EQ(sum, total);
}

TEST(CountInstances, UnknownLabelNamed) {
  try {
    count_instances({video("v", {0, 7})}, 3);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("label 7"), std::string::npos);
  }
}

TEST(ReplicationFactor, Examples) {
  EXPECT_EQ(replication_factor(100, 100), 1u);
  EXPECT_EQ(replication_factor(128, 16), 4u);
  EXPECT_EQ(replication_factor(100, 30), 2u);
  EXPECT_EQ(replication_factor(100, 1), 7u);
  EXPECT_EQ(replication_factor(8, 2), 3u);
  EXPECT_EQ(replication_factor(100, 250), 1u);
  EXPECT_THROW(replication_factor(100, 0), std::invalid_argument);
}

TEST(ReplicationFactor, ExactPowerOfTwoBoundaries) {
  for (std::uint64_t m = 0; m < 20; ++m) {
    for (std::uint64_t z : {1u, 3u, 5u, 7u}) {
      const std::uint64_t alpha = z << m;
      if (m == 0) {
        EXPECT_EQ(replication_factor(alpha, z), 1u);
        continue;
      }
      EXPECT_EQ(replication_factor(alpha, z), m + 1) << alpha << "/" << z;
      EXPECT_EQ(replication_factor(alpha - 1, z), m) << alpha - 1 << "/" << z;
    }
  }
  EXPECT_EQ(replication_factor(std::uint64_t{1} << 63, 1), 64u);
  EXPECT_EQ(replication_factor(~std::uint64_t{0}, 1), 64u);
}

TEST(ReplicationFactor, SweepAgainstLogOracle) {
  for (std::uint64_t alpha = 10; alpha <= 1000; ++alpha) {
    std::uint64_t prev = ~std::uint64_t{0};
    for (std::uint64_t z = 1; z <= alpha; ++z) {
      const auto r = replication_factor(alpha, z);
      EXPECT_EQ(r == 1, 2 * z > alpha) << alpha << "/" << z;
      EXPECT_LE(r, prev);
      prev = r;
      if (z < alpha) {
        // floating oracle, nudged off exact powers of two where floor is fragile
        const double q = static_cast<double>(alpha) / static_cast<double>(z);
        const double m = std::floor(std::log2(q) + 1e-9);
        EXPECT_EQ(r, static_cast<std::uint64_t>(m) + 1) << alpha << "/" << z;
      }
    }
  }
}

TEST(Augment, NoRareCategoriesIsIdentity) {
  const std::vector<VideoAnnotation> in{video("a", {0, 1, 0}), video("b", {1})};
  AugmentConfig cfg;
  cfg.alpha = 2;
  const auto out = augment_annotations(in, 2, cfg);
  EXPECT_EQ(out.annotations, in);
}

TEST(Augment, TwoInstancesWithAlphaEightTriple) {
  const std::vector<VideoAnnotation> in{video("a", {0}), video("b", {0, 1})};
  AugmentConfig cfg;
  cfg.alpha = 8;
  auto out = augment_annotations(in, 3, cfg);
  const auto counts = count_instances(out.annotations, 3);
  EXPECT_EQ(counts[0], 6u);
  EXPECT_EQ(out.plan.categories[0].replication, 3u);
  EXPECT_TRUE(out.plan.categories[0].rare);
  EXPECT_TRUE(out.plan.categories[2].skipped);
  EXPECT_FALSE(out.plan.categories[2].rare);
  // copies follow their original and are flagged
  const auto& inst = out.annotations[0].instances;
  ASSERT_EQ(inst.size(), 3u);
  EXPECT_FALSE(inst[0].duplicate);
  EXPECT_TRUE(inst[1].duplicate);
  EXPECT_TRUE(inst[2].duplicate);
  EXPECT_EQ(inst[1].start_s, inst[0].start_s);
  EXPECT_EQ(inst[2].label, 0);
}

TEST(Augment, LongTailCountsGrowExceptInNoOpBand) {
  const auto anns = zipf_annotations(12);
  const auto before = count_instances(anns, 5);
  std::vector<std::uint64_t> sorted = before;
  std::sort(sorted.begin(), sorted.end());
  AugmentConfig cfg;
  cfg.alpha = sorted[2];
  const auto out = augment_annotations(anns, 5, cfg);
  const auto after = count_instances(out.annotations, 5);
  for (std::size_t c = 0; c < 5; ++c) {
    if (before[c] == 0) continue;
    EXPECT_GE(after[c], before[c]);
    EXPECT_EQ(after[c] == before[c], 2 * before[c] > cfg.alpha) << c;
    EXPECT_EQ(after[c], before[c] * out.plan.categories[c].replication);
  }
}

TEST(Augment, RerunUsesMultipliedCounts) {
  const auto anns = zipf_annotations(13);
  AugmentConfig cfg;
  cfg.alpha = 40;
  const auto once = augment_annotations(anns, 5, cfg);
  const auto twice = augment_annotations(once.annotations, 5, cfg);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto& p1 = once.plan.categories[c];
    EXPECT_EQ(twice.plan.categories[c].count, p1.count * p1.replication);
  }
}

TEST(Augment, DeterministicAndPlanJsonRoundTrips) {
  const auto anns = zipf_annotations(14, 20);
  AugmentConfig cfg;
  cfg.alpha = 30;
  cfg.seed = 5;
  const auto a = augment_annotations(anns, 5, cfg);
  const auto b = augment_annotations(anns, 5, cfg);
  EXPECT_EQ(format_annotations(a.annotations), format_annotations(b.annotations));
  EXPECT_EQ(nlohmann::json(a.plan).get<AugmentPlan>(), a.plan);
  AugmentConfig bad;
  bad.alpha = 0;
  EXPECT_THROW(augment_annotations(anns, 5, bad), std::invalid_argument);
}

TEST(Augment, DuplicatesSurviveFileRoundTrip) {
  AugmentConfig cfg;
  cfg.alpha = 4;
  const auto out = augment_annotations({video("a", {0, 1, 1, 1})}, 2, cfg);
  EXPECT_EQ(parse_annotations(format_annotations(out.annotations)), out.annotations);
}
