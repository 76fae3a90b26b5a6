#include "catkit/param_vector.hpp"

#include <algorithm>

namespace catkit {

ParamIndex::ParamIndex(std::vector<int> item_ids, std::vector<int> user_ids)
    : item_ids_(std::move(item_ids)), user_ids_(std::move(user_ids)) {
  std::sort(item_ids_.begin(), item_ids_.end());
  std::sort(user_ids_.begin(), user_ids_.end());
  item_ids_.erase(std::unique(item_ids_.begin(), item_ids_.end()), item_ids_.end());
  user_ids_.erase(std::unique(user_ids_.begin(), user_ids_.end()), user_ids_.end());
  item_pos_.reserve(item_ids_.size());
  user_pos_.reserve(user_ids_.size());
  for (int j = 0; j < static_cast<int>(item_ids_.size()); ++j) item_pos_[item_ids_[j]] = j;
  for (int u = 0; u < static_cast<int>(user_ids_.size()); ++u) user_pos_[user_ids_[u]] = u;
}

int ParamIndex::item_slot(int item_id) const {
  auto it = item_pos_.find(item_id);
  if (it == item_pos_.end())
    throw std::out_of_range("unknown item id " + std::to_string(item_id));
  return it->second;
}

int ParamIndex::user_slot(int user_id) const {
  auto it = user_pos_.find(user_id);
  if (it == user_pos_.end())
    throw std::out_of_range("unknown user id " + std::to_string(user_id));
  return it->second;
}

ItemParams item_at(const ParamIndex& ix, const Eigen::VectorXd& beta, int item_id) {
  const int j = ix.item_slot(item_id);
  return ItemParams{beta[ix.a_offset(j)], beta[ix.b_offset(j)]};
}

double theta_at(const ParamIndex& ix, const Eigen::VectorXd& beta, int user_id) {
  return beta[ix.theta_offset(ix.user_slot(user_id))];
}

Eigen::VectorXd pack(const ParamIndex& ix, const std::vector<ItemParams>& items,
                     const std::vector<double>& thetas) {
  if (static_cast<int>(items.size()) != ix.n_items() ||
      static_cast<int>(thetas.size()) != ix.n_users())
    throw std::invalid_argument("pack: size mismatch with index");
  Eigen::VectorXd beta(ix.size());
  for (int j = 0; j < ix.n_items(); ++j) {
    beta[ix.a_offset(j)] = items[j].a;
    beta[ix.b_offset(j)] = items[j].b;
  }
  for (int u = 0; u < ix.n_users(); ++u) beta[ix.theta_offset(u)] = thetas[u];
  return beta;
}

}  // namespace catkit
