#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "catkit/types.hpp"

namespace catkit {

// Ground truth behind a synthetic dataset; lets benchmarks score recovered
// parameters against the generating values.
struct SyntheticTruth {
  std::map<int, ItemParams> items;   // item_id -> (a, b)
  std::map<int, double> thetas;      // user_id -> theta
  double a_min = 0.5, a_max = 2.5;
  double b_mean = 0.0, b_sd = 1.0;
  double theta_mean = 0.0, theta_sd = 1.0;
  std::uint64_t seed = 0;
};

enum class Provenance { Loaded, Synthetic, CatSimulated };

// Interaction table plus user roles and the item catalog. Construct through
// make_dataset so the invariants (role coverage, catalog coverage, duplicate
// freedom) are always checked.
struct ResponseDataset {
  std::vector<Interaction> interactions;
  std::unordered_map<int, Role> user_roles;
  std::vector<int> item_catalog;  // sorted unique
  Provenance provenance = Provenance::Loaded;

  std::vector<Interaction> slice(Role r) const;
  std::vector<int> users_with_role(Role r) const;  // sorted
  // Dense row view: item_id -> correct for one user.
  std::unordered_map<int, int> user_row(int user_id) const;
};

ResponseDataset make_dataset(std::vector<Interaction> interactions,
                             std::unordered_map<int, Role> roles,
                             Provenance provenance);

struct SynthConfig {
  double a_min = 0.5, a_max = 2.5;
  double b_mean = 0.0, b_sd = 1.0;
  double theta_mean = 0.0, theta_sd = 1.0;
  double fill_fraction = 1.0;  // 1.0 = dense
};

// Synthetic 2PL data: a ~ U[a_min,a_max], b ~ N(b_mean,b_sd^2),
// theta ~ N(theta_mean,theta_sd^2), responses Bernoulli(predict_prob).
// All users start as UnbiasedTrain; use split_roles to assign roles.
std::pair<ResponseDataset, SyntheticTruth> generate_synthetic(
    int n_users, int n_items, const SynthConfig& cfg, std::uint64_t seed);

struct RoleCounts {
  int unbiased_train = 0;
  int unbiased_val = 0;
  int biased = 0;
  int test = 0;
};

// Seeded disjoint role assignment; users beyond the requested counts are
// dropped together with their interactions.
ResponseDataset split_roles(const ResponseDataset& data, const RoleCounts& counts,
                            std::uint64_t seed);

// CSV interchange: header `user_id,item_id,correct[,role]`; `#` comment lines
// are skipped. Without a role column every user is UnbiasedTrain.
ResponseDataset load_csv(const std::string& path);
void save_csv(const ResponseDataset& data, const std::string& path,
              const std::string& header_comment = "");

// Truth serialization ({item_id, a, b} array plus {user_id, theta} array).
void save_truth_json(const SyntheticTruth& truth, const std::string& path);
SyntheticTruth load_truth_json(const std::string& path);

}  // namespace catkit
