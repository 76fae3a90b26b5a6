#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "catkit/param_vector.hpp"
#include "catkit/types.hpp"

namespace catkit {

struct FitConfig {
  double learning_rate = 1.0;       // initial backtracking step
  int max_epochs = 5000;
  double grad_tolerance = 1e-8;     // on the optimization-coordinate gradient
  double prior_strength = 1e-3;     // L2 penalty on all raw coordinates
  int patience = 20;                // epochs without val improvement
  double val_holdout_fraction = 0.2;
  std::uint64_t rng_seed = 1;
};

struct FittedModel {
  ParamIndex index;
  Eigen::VectorXd beta;  // [a_1, b_1, ..., a_Q, b_Q, theta_1, ...]
  FitConfig config;
  double final_train_loss = 0;
  double final_val_loss = 0;
  int epochs_run = 0;
  int val_users_skipped = 0;
  std::vector<int> unobserved_items;  // kept at init, excluded from rank reports

  ItemParams item(int item_id) const { return item_at(index, beta, item_id); }
  double theta(int user_id) const { return theta_at(index, beta, user_id); }
  std::vector<std::pair<int, ItemParams>> all_items() const;
};

// Joint item/user fit of the mean cross-entropy with L2 prior, full-batch
// gradient descent on (log a, b, theta) with backtracking line search, and
// per-epoch validation-based early stopping (best checkpoint returned).
// Items appearing in neither train nor `catalog` are unknown to the model;
// items in the index with no train interaction stay frozen at initialization.
FittedModel fit_irt(const std::vector<Interaction>& train,
                    const std::vector<Interaction>& val, const FitConfig& cfg,
                    const std::vector<int>* catalog = nullptr);

// Weighted variant: interaction i's loss term is multiplied by weights[i]
// inside the mean (normalizer stays the interaction count).
FittedModel fit_irt_weighted(const std::vector<Interaction>& train,
                             const std::vector<double>& weights,
                             const std::vector<Interaction>& val,
                             const FitConfig& cfg,
                             const std::vector<int>* catalog = nullptr);

// CAT-style validation: per validation user, fit theta alone on a seeded
// holdout-complement of that user's interactions (items frozen), then pool the
// mean loss over the held-out remainder. Users with < 5 interactions are
// skipped and counted in *skipped.
double validation_loss(const ParamIndex& ix, const Eigen::VectorXd& beta,
                       const std::vector<Interaction>& val, double holdout_fraction,
                       double prior_strength, std::uint64_t rng_seed,
                       int* skipped = nullptr);

// JSON interchange between CLI stages.
std::string model_to_json(const FittedModel& m);
FittedModel model_from_json(const std::string& text);
void save_model_json(const FittedModel& m, const std::string& path);
FittedModel load_model_json(const std::string& path);

}  // namespace catkit
