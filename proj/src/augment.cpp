#include "mgtad/augment.hpp"

#include <stdexcept>
#include <string>

namespace mgtad {

void AugmentConfig::validate() const {
  if (alpha < 1) throw std::invalid_argument("augment: alpha must be >= 1");
}

void to_json(nlohmann::json& j, const AugmentPlan& p) {
  auto cats = nlohmann::json::array();
  for (const auto& c : p.categories) {
    cats.push_back({{"label", c.label},
                    {"count", c.count},
                    {"replication", c.replication},
                    {"rare", c.rare},
                    {"skipped", c.skipped}});
  }
  j = nlohmann::json{{"alpha", p.alpha}, {"seed", p.seed}, {"categories", cats}};
}

void from_json(const nlohmann::json& j, AugmentPlan& p) {
  j.at("alpha").get_to(p.alpha);
  p.seed = j.value("seed", std::uint64_t{0});
  p.categories.clear();
  for (const auto& c : j.at("categories")) {
    CategoryPlan cp;
    c.at("label").get_to(cp.label);
    c.at("count").get_to(cp.count);
    c.at("replication").get_to(cp.replication);
    c.at("rare").get_to(cp.rare);
    c.at("skipped").get_to(cp.skipped);
    p.categories.push_back(cp);
  }
}

std::vector<std::uint64_t> count_instances(const std::vector<VideoAnnotation>& videos,
                                           std::size_t num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (const auto& v : videos) {
    for (const auto& a : v.instances) {
      if (a.label < 0 || static_cast<std::size_t>(a.label) >= num_classes) {
        throw std::invalid_argument("unknown label " + std::to_string(a.label) + " in video " +
                                    v.video_id + " (expected 0.." +
                                    std::to_string(num_classes - 1) + ")");
      }
      ++counts[static_cast<std::size_t>(a.label)];
    }
  }
  return counts;
}

std::uint64_t replication_factor(std::uint64_t alpha, std::uint64_t z) {
  if (z == 0) throw std::invalid_argument("replication_factor: category has no instances");
  if (z >= alpha) return 1;
  // largest m with z * 2^m <= alpha
  std::uint64_t m = 0;
  while (m < 63 && z <= (alpha >> (m + 1))) ++m;
  return m + 1;
}

AugmentPlan make_plan(const std::vector<std::uint64_t>& counts, const AugmentConfig& cfg) {
  cfg.validate();
  AugmentPlan plan{cfg.alpha, cfg.seed, {}};
  for (std::size_t c = 0; c < counts.size(); ++c) {
    CategoryPlan cp;
    cp.label = static_cast<int>(c);
    cp.count = counts[c];
    cp.skipped = counts[c] == 0;
    cp.rare = !cp.skipped && counts[c] < cfg.alpha;
    cp.replication = cp.skipped ? 1 : replication_factor(cfg.alpha, counts[c]);
    plan.categories.push_back(cp);
  }
  return plan;
}

AugmentResult augment_annotations(const std::vector<VideoAnnotation>& videos,
                                  std::size_t num_classes, const AugmentConfig& cfg) {
  for (const auto& v : videos) v.validate();
  AugmentResult out;
  out.plan = make_plan(count_instances(videos, num_classes), cfg);
  out.annotations.reserve(videos.size());
  for (const auto& v : videos) {
    VideoAnnotation aug = v;
    aug.instances.clear();
    for (const auto& a : v.instances) {
      aug.instances.push_back(a);
      const auto r = out.plan.categories[static_cast<std::size_t>(a.label)].replication;
      for (std::uint64_t k = 1; k < r; ++k) {
        ActionInstance copy = a;
        copy.duplicate = true;
        aug.instances.push_back(copy);
      }
    }
    out.annotations.push_back(std::move(aug));
  }
  return out;
}

}  // namespace mgtad
