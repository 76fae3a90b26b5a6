#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "catkit/dataset.hpp"
#include "catkit/fitting.hpp"
#include "catkit/types.hpp"

namespace catkit {

enum class Selector { FI, KLI };
std::string selector_name(Selector s);
Selector selector_from_name(const std::string& s);

// MAP ability estimate: maximizes sum of response log-likelihoods minus
// (prior_strength/2) theta^2, by 1-D Newton with backtracking (<= 50 iters).
// Empty responses: prior mode 0 if prior_strength > 0, error otherwise.
double estimate_ability(const std::vector<std::pair<ItemParams, int>>& responses,
                        double prior_strength);

// 2PL Fisher information a^2 p (1-p) at theta.
double fisher_information(double theta, const ItemParams& item);

// Integrated KL divergence KL(p(theta_hat) || p(theta)) over
// [theta_hat - delta, theta_hat + delta], composite Simpson quadrature on
// n_quad nodes (an even n_quad is bumped to the next odd count).
double kli_index(double theta_hat, const ItemParams& item, double delta, int n_quad = 41);

// Argmax of the selector's index over the pool; ties broken by smallest
// item_id. `step` is the 1-based selection round and sets the KLI window
// delta = 3/sqrt(step).
int select_next_item(double theta_hat, const std::vector<std::pair<int, ItemParams>>& pool,
                     Selector sel, int step);

struct CatSession {
  int user_id = 0;
  std::vector<int> administered;
  std::vector<int> responses;
  std::vector<double> theta_trajectory;
  Selector selector = Selector::FI;
  bool truncated = false;

  double final_theta() const {
    return theta_trajectory.empty() ? 0.0 : theta_trajectory.back();
  }
};

// Answers item queries either by Bernoulli draws from a ground-truth model
// (deterministic per (seed, item)) or by looking up a dense response row.
class ResponseOracle {
 public:
  static ResponseOracle bernoulli_from_truth(double true_theta,
                                             const std::map<int, ItemParams>& items,
                                             std::uint64_t seed);
  static ResponseOracle dense_lookup(std::unordered_map<int, int> row);

  bool can_answer(int item_id) const;
  int respond(int item_id) const;

 private:
  enum class Kind { Bernoulli, Dense };
  Kind kind_ = Kind::Dense;
  double theta_ = 0;
  std::map<int, ItemParams> truth_;
  std::uint64_t seed_ = 0;
  std::unordered_map<int, int> row_;
};

// One adaptive session: theta_hat starts at 0; each round selects an item from
// the remaining pool, asks the oracle, and re-estimates theta (MAP with
// prior_strength). Items the oracle cannot answer are excluded up front. If
// the pool runs out before `steps`, the session is marked truncated.
CatSession simulate_cat(const ResponseOracle& oracle, int user_id,
                        const std::vector<std::pair<int, ItemParams>>& pool,
                        Selector sel, int steps, double prior_strength = 1.0);

// Flat CSV row form (columns session_id,user_id,step,item_id,correct,
// theta_hat,selector).
struct SessionRow {
  int session_id = 0;
  int user_id = 0;
  int step = 0;
  int item_id = 0;
  int correct = 0;
  double theta_hat = 0;
  Selector selector = Selector::FI;
};

std::vector<SessionRow> session_rows(const std::vector<CatSession>& sessions);
void save_sessions_csv(const std::vector<SessionRow>& rows, const std::string& path,
                       const std::string& header_comment = "");
std::vector<SessionRow> load_sessions_csv(const std::string& path);

// CAT-simulated data for every Biased-role user of `data`, answered by dense
// row lookup. One session of `steps` items per user; sessions are independent
// and may run on `threads` workers with identical output.
struct BiasOutput {
  std::vector<CatSession> sessions;  // ordered by ascending user id
  std::vector<SessionRow> rows;
  ResponseDataset dataset;                       // Biased-role interactions
  std::unordered_map<int, double> final_theta;   // user -> final CAT estimate
};
BiasOutput build_biased_set(const ResponseDataset& data, const FittedModel& model,
                            Selector sel, int steps, int threads = 1);

}  // namespace catkit
