#pragma once

#include <Eigen/Dense>
#include <vector>

#include "catkit/param_vector.hpp"
#include "catkit/types.hpp"

namespace catkit {

// p = sigma(a (theta - b)). No clamping here; clamping lives in the loss.
double predict_prob(double theta, const ItemParams& item);

// Cross-entropy of one response: -x log p - (1-x) log(1-p), with the log
// arguments clamped to [1e-12, 1 - 1e-12].
double interaction_loss(int correct, const ItemParams& item, double theta);

// Analytic first derivatives of interaction_loss wrt (a, b, theta).
struct LossGrad {
  double da = 0, db = 0, dtheta = 0;
};
LossGrad loss_gradient(int correct, const ItemParams& item, double theta);

// Analytic second derivatives (the symmetric 3x3 block).
struct LossHess {
  double daa = 0, dbb = 0, dtt = 0, dab = 0, dat = 0, dbt = 0;
};
LossHess loss_hessian(int correct, const ItemParams& item, double theta);

// One interaction's gradient scattered into ParamVector coordinates.
// When theta_fixed is true the ability coordinate is absent (theta_idx = -1)
// and `theta_fixed_value` supplies the ability; otherwise the ability is read
// from beta through the index.
struct SparseGrad {
  int a_idx = -1, b_idx = -1, theta_idx = -1;
  double da = 0, db = 0, dtheta = 0;
};
SparseGrad loss_gradient_sparse(const Interaction& z, const ParamIndex& ix,
                                const Eigen::VectorXd& beta, bool theta_fixed,
                                double theta_fixed_value = 0.0);

// Mean interaction loss over a slice (empty slice is an error).
double dataset_loss(const std::vector<Interaction>& data, const ParamIndex& ix,
                    const Eigen::VectorXd& beta);

// Exact analytic Hessian of the mean loss at beta, dense |beta| x |beta|,
// symmetric by construction.
Eigen::MatrixXd dataset_hessian(const std::vector<Interaction>& data,
                                const ParamIndex& ix, const Eigen::VectorXd& beta);

}  // namespace catkit
