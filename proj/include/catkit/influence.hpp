#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "catkit/cat.hpp"
#include "catkit/fitting.hpp"
#include "catkit/types.hpp"

namespace catkit {

// Cholesky factorization of the damped Hessian H + lambda I. If the requested
// damping does not yield a positive-definite matrix (or fails the residual
// probe), lambda is escalated geometrically (x10 on the 1e-6 ladder) until it
// succeeds; the final lambda is recorded. Above 1e+2 -> numerical failure.
struct HessianFactorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double lambda_damp = 0;
  int n = 0;

  Eigen::VectorXd solve(const Eigen::VectorXd& g) const {
    if (g.size() != n) throw std::invalid_argument("solve: dimension mismatch");
    return llt.solve(g);
  }
};
HessianFactorization factorize_hessian(const Eigen::MatrixXd& H, double lambda_damp);

// Per-interaction and per-user influence summaries for one biased set.
struct InteractionInfluence {
  int user_id = 0;
  int item_id = 0;
  double if_param_sum = 0;  // component sum of the parameter-space IF
  double if_loss = 0;       // predicted validation-loss change direction
};
struct UserInfluence {
  int user_id = 0;
  double aif = 0;
  bool selected = false;
};

enum class DebiasMethod {
  UnbiasedOnly,  // select nothing
  BiasedOnly,    // retrain on the biased rows alone
  Union,         // select everything
  UserAIF,
  IFParam,
  IFLoss,
  GreedyAIF,
  IF4URec,
  IPSNB,
  IPSNBIW,
};
std::string method_name(DebiasMethod m);
DebiasMethod method_from_name(const std::string& s);

struct DebiasConfig {
  DebiasMethod method = DebiasMethod::UserAIF;
  double quantile = 0.25;      // UserAIF / IFParam threshold mass
  double alpha = 1.0;          // IF4URec temperature
  int budget = -1;             // GreedyAIF; -1 -> ceil(quantile * N)
  bool greedy_signed = false;  // minimize signed cumulative sum instead of |.|
  double lambda_damp = -1;     // -1 -> the fit's prior_strength
};

struct InfluenceReport {
  std::string method;
  double lambda_damp = 0;
  double eta = 0;    // threshold, when a quantile rule was applied
  double alpha = 0;  // IF4URec only
  int budget = 0;    // GreedyAIF only
  bool degenerate_weight_range = false;
  std::vector<InteractionInfluence> interactions;  // biased-row order
  std::vector<char> interaction_selected;          // aligned with interactions
  std::vector<double> weights;                     // aligned; empty unless weighting
  std::vector<UserInfluence> users;                // ascending user id
};

// Precomputes the factorization and the two solve vectors that make
// per-interaction influence O(1): component sums via (H+lI)^-1 1 and loss
// influence via (H+lI)^-1 sum of validation gradients (validation users'
// abilities are fitted with frozen items before gradients are taken).
class InfluenceEngine {
 public:
  InfluenceEngine(const FittedModel& model, const std::vector<Interaction>& train,
                  const std::vector<Interaction>& val, double lambda_damp);

  const HessianFactorization& factorization() const { return fact_; }
  const FittedModel& model() const { return model_; }

  // Full parameter-space IF vector: -(H+lI)^-1 grad l(z) with the biased
  // user's ability held fixed at its CAT estimate.
  Eigen::VectorXd if_param(const Interaction& z, double theta_biased_fixed) const;
  double if_param_sum(const Interaction& z, double theta_biased_fixed) const;
  double if_loss(const Interaction& z, double theta_biased_fixed) const;
  // Sum of component sums over one user's interactions (all must carry the
  // user's id).
  double aif_user(int user_id, const std::vector<Interaction>& zs,
                  double theta_biased_fixed) const;

 private:
  const FittedModel& model_;
  HessianFactorization fact_;
  Eigen::VectorXd w_sol_;  // (H+lI)^-1 1
  Eigen::VectorXd u_val_;  // (H+lI)^-1 sum grad l(y)
  bool has_val_ = false;
};

// Nearest-rank quantile threshold: the ceil(q*N)-th smallest value.
double nearest_rank_threshold(std::vector<double> values, double q);

// Selection rules (indices into the report's interaction order, or user ids).
std::vector<int> select_users_aif(const std::vector<UserInfluence>& users, double q,
                                  double* eta_out = nullptr);
std::vector<std::size_t> select_interactions_if_param(
    const std::vector<InteractionInfluence>& xs, double q, double* eta_out = nullptr);
std::vector<std::size_t> select_interactions_if_loss(
    const std::vector<InteractionInfluence>& xs);
std::vector<std::size_t> greedy_aif(const std::vector<InteractionInfluence>& xs,
                                    int budget, bool absolute = true);
std::vector<double> if4urec_weights(const std::vector<InteractionInfluence>& xs,
                                    double alpha, bool* degenerate = nullptr);
std::vector<double> ips_nb_weights(const std::vector<SessionRow>& biased_rows,
                                   bool item_user_variant);

// Full report for one method over a biased set (rows carry the CAT ability
// trajectory; the final estimate per user is the fixed ability).
InfluenceReport compute_influence_report(const FittedModel& model,
                                         const std::vector<Interaction>& train,
                                         const std::vector<SessionRow>& biased_rows,
                                         const std::vector<Interaction>& val,
                                         const DebiasConfig& cfg);

// Turns a report's decision into retraining inputs: included biased rows and
// their weights (selection methods -> weight 1 on selected rows; weighting
// methods -> all rows with their weights).
struct Selection {
  std::vector<Interaction> rows;
  std::vector<double> weights;
};
Selection selection_from_report(const InfluenceReport& report,
                                const std::vector<SessionRow>& biased_rows);

// fit_irt on unbiased train plus the selected/weighted biased rows; biased
// users receive fresh jointly-estimated abilities.
FittedModel retrain_with_selection(const std::vector<Interaction>& train,
                                   const Selection& sel,
                                   const std::vector<Interaction>& val,
                                   const FitConfig& cfg,
                                   const std::vector<int>* catalog = nullptr);

void save_influence_csv(const InfluenceReport& report,
                        const std::string& interactions_path,
                        const std::string& users_path,
                        const std::string& header_comment = "");

}  // namespace catkit
