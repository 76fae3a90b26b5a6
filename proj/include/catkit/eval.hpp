#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "catkit/cat.hpp"
#include "catkit/dataset.hpp"
#include "catkit/fitting.hpp"

namespace catkit {

// Probability that a random positive outranks a random negative, ties 0.5
// (rank-sum form). Both classes must be present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction of correct 0.5-threshold predictions.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels);

// Pearson correlation of mid-ranked values. Lengths must match and be >= 3;
// constant inputs are undefined.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct EvalResult {
  std::string metric;
  int step = -1;  // -1 = not a stepped metric
  double value = 0;
  double stddev = 0;
  int n_repeats = 1;
  std::uint64_t seed_base = 0;
};

// Adaptive-testing evaluation: items are split (seeded) into a pool share and
// an eval share; each test user takes a CAT on pool items answered from their
// dense row; at every requested step the running ability scores the user's
// unseen items. Emits pooled AUC across users, both against the remaining
// pool items ("cat_auc_pool") and against the eval items ("cat_auc_eval").
struct CatAucConfig {
  double pool_fraction = 0.7;
  std::vector<int> steps = {10, 20};
  Selector selector = Selector::KLI;
  double prior_strength = 1.0;  // ability MAP during the session
};
std::vector<EvalResult> cat_auc_protocol(
    const FittedModel& model,
    const std::map<int, std::unordered_map<int, int>>& test_rows,
    const CatAucConfig& cfg, std::uint64_t seed, int threads = 1,
    int* users_skipped = nullptr);

// Non-adaptive evaluation: per user, fit theta on a seeded random share of
// the dense row with frozen items, score the held-out remainder; pooled AUC.
struct RandomAucConfig {
  double fit_fraction = 0.8;
  double prior_strength = 1.0;
};
double random_auc_once(const FittedModel& model,
                       const std::map<int, std::unordered_map<int, int>>& test_rows,
                       const RandomAucConfig& cfg, std::uint64_t seed,
                       int threads = 1, int* users_skipped = nullptr);
EvalResult random_auc_protocol(const FittedModel& model,
                               const std::map<int, std::unordered_map<int, int>>& test_rows,
                               const RandomAucConfig& cfg,
                               const std::vector<std::uint64_t>& seeds, int threads = 1);

// Bias diagnostics against a dense reference and ground truth.
struct ItemRatio {
  int item_id = 0;
  double reference_ratio = 0;
  double biased_ratio = 0;  // NaN when the item never appears in biased data
};
struct BiasDiagnostics {
  std::vector<ItemRatio> item_ratios;
  double rank_corr_difficulty = 0;  // retrained difficulty vs ground truth
  double bias_signature = 0;        // final theta_hat vs mean administered true b
  int items_missing_from_biased = 0;
};
BiasDiagnostics bias_diagnostics(const ResponseDataset& reference,
                                 const std::vector<SessionRow>& biased_rows,
                                 const FittedModel& retrained,
                                 const std::map<int, ItemParams>& truth_items);

// Sample mean and (n-1)-denominator standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

void save_eval_csv(const std::vector<EvalResult>& results, const std::string& path,
                   const std::string& header_comment = "");
void save_ratio_csv(const BiasDiagnostics& diag, const std::string& path,
                    const std::string& header_comment = "");

}  // namespace catkit
