#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

struct AugmentConfig {
  std::uint64_t alpha = 100;  // minimum instance threshold
  std::uint64_t seed = 0;     // recorded in the plan; output order follows input order

  void validate() const;
};

struct CategoryPlan {
  int label = 0;
  std::uint64_t count = 0;        // Z_c
  std::uint64_t replication = 1;  // R_c, total multiplicity
  bool rare = false;              // 0 < Z_c < alpha
  bool skipped = false;           // Z_c == 0

  friend bool operator==(const CategoryPlan&, const CategoryPlan&) = default;
};

struct AugmentPlan {
  std::uint64_t alpha = 0;
  std::uint64_t seed = 0;
  std::vector<CategoryPlan> categories;

  friend bool operator==(const AugmentPlan&, const AugmentPlan&) = default;
};

void to_json(nlohmann::json& j, const AugmentPlan& p);
void from_json(const nlohmann::json& j, AugmentPlan& p);

/// Z_c for every category in [0, num_classes). Duplicates count like any
/// other instance. Unknown labels throw std::invalid_argument naming the label.
std::vector<std::uint64_t> count_instances(const std::vector<VideoAnnotation>& videos,
                                           std::size_t num_classes);

/// floor(log2(alpha / z)) + 1 for 0 < z < alpha, else 1. Exact integer
/// arithmetic. z == 0 throws.
std::uint64_t replication_factor(std::uint64_t alpha, std::uint64_t z);

AugmentPlan make_plan(const std::vector<std::uint64_t>& counts, const AugmentConfig& cfg);

struct AugmentResult {
  std::vector<VideoAnnotation> annotations;
  AugmentPlan plan;
};

/// Every instance of category c is followed by R_c - 1 copies flagged as
/// duplicates. Features are never touched. Already augmented input counts its
/// copies, so a second pass compounds.
AugmentResult augment_annotations(const std::vector<VideoAnnotation>& videos,
                                  std::size_t num_classes, const AugmentConfig& cfg);

}  // namespace mgtad
