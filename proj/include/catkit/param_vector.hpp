#pragma once

#include <Eigen/Dense>
#include <unordered_map>
#include <vector>

#include "catkit/types.hpp"

namespace catkit {

// Index map for the flat parameter vector
//   beta = [a_1, b_1, ..., a_Q, b_Q, theta_1, ..., theta_U].
// Items and users are ordered by ascending id; the map is a bijection onto
// [0, size()).
class ParamIndex {
 public:
  ParamIndex() = default;
  ParamIndex(std::vector<int> item_ids, std::vector<int> user_ids);

  int n_items() const { return static_cast<int>(item_ids_.size()); }
  int n_users() const { return static_cast<int>(user_ids_.size()); }
  int size() const { return 2 * n_items() + n_users(); }

  const std::vector<int>& item_ids() const { return item_ids_; }
  const std::vector<int>& user_ids() const { return user_ids_; }

  bool has_item(int item_id) const { return item_pos_.count(item_id) > 0; }
  bool has_user(int user_id) const { return user_pos_.count(user_id) > 0; }

  // Offsets by dense position (0-based item/user slot).
  int a_offset(int item_slot) const { return 2 * item_slot; }
  int b_offset(int item_slot) const { return 2 * item_slot + 1; }
  int theta_offset(int user_slot) const { return 2 * n_items() + user_slot; }

  // Dense slot lookups by external id; throw on unknown ids.
  int item_slot(int item_id) const;
  int user_slot(int user_id) const;

 private:
  std::vector<int> item_ids_;
  std::vector<int> user_ids_;
  std::unordered_map<int, int> item_pos_;
  std::unordered_map<int, int> user_pos_;
};

// Typed views over a flat vector laid out per ParamIndex.
ItemParams item_at(const ParamIndex& ix, const Eigen::VectorXd& beta, int item_id);
double theta_at(const ParamIndex& ix, const Eigen::VectorXd& beta, int user_id);

Eigen::VectorXd pack(const ParamIndex& ix, const std::vector<ItemParams>& items,
                     const std::vector<double>& thetas);

}  // namespace catkit
