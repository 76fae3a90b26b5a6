#include "catkit/model.hpp"

#include <cmath>

namespace catkit {

namespace {
constexpr double kProbClamp = 1e-12;

double sigmoid(double t) {
  if (t >= 0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_finite(double theta, const ItemParams& item) {
  if (!std::isfinite(theta) || !std::isfinite(item.a) || !std::isfinite(item.b))
    throw std::invalid_argument("non-finite model inputs");
  if (item.a <= 0) throw std::invalid_argument("discrimination must be > 0");
}
}  // namespace

double predict_prob(double theta, const ItemParams& item) {
  check_finite(theta, item);
  return sigmoid(item.a * (theta - item.b));
}

double interaction_loss(int correct, const ItemParams& item, double theta) {
  if (correct != 0 && correct != 1)
    throw std::invalid_argument("correct must be 0 or 1");
  double p = predict_prob(theta, item);
  if (p < kProbClamp) p = kProbClamp;
  if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
  return correct ? -std::log(p) : -std::log(1.0 - p);
}

// With t = a(theta-b), u = theta-b, p = sigma(t), d = p-x:
//   dl/da = d*u,  dl/db = -a*d,  dl/dtheta = a*d.
LossGrad loss_gradient(int correct, const ItemParams& item, double theta) {
  check_finite(theta, item);
  const double u = theta - item.b;
  const double p = sigmoid(item.a * u);
  const double d = p - correct;
  return LossGrad{d * u, -item.a * d, item.a * d};
}

// Second derivatives, with w = p(1-p):
//   l_aa = w u^2          l_bb = l_tt = w a^2
//   l_ab = -w a u - d     l_at = w a u + d     l_bt = -w a^2
LossHess loss_hessian(int correct, const ItemParams& item, double theta) {
  check_finite(theta, item);
  const double u = theta - item.b;
  const double p = sigmoid(item.a * u);
  const double w = p * (1.0 - p);
  const double d = p - correct;
  LossHess h;
  h.daa = w * u * u;
  h.dbb = w * item.a * item.a;
  h.dtt = h.dbb;
  h.dab = -w * item.a * u - d;
  h.dat = w * item.a * u + d;
  h.dbt = -w * item.a * item.a;
  return h;
}

SparseGrad loss_gradient_sparse(const Interaction& z, const ParamIndex& ix,
                                const Eigen::VectorXd& beta, bool theta_fixed,
                                double theta_fixed_value) {
  const int j = ix.item_slot(z.item_id);
  const ItemParams item{beta[ix.a_offset(j)], beta[ix.b_offset(j)]};
  const double theta =
      theta_fixed ? theta_fixed_value
                  : beta[ix.theta_offset(ix.user_slot(z.user_id))];
  const LossGrad g = loss_gradient(z.correct, item, theta);
  SparseGrad out;
  out.a_idx = ix.a_offset(j);
  out.b_idx = ix.b_offset(j);
  out.da = g.da;
  out.db = g.db;
  if (!theta_fixed) {
    out.theta_idx = ix.theta_offset(ix.user_slot(z.user_id));
    out.dtheta = g.dtheta;
  }
  return out;
}

double dataset_loss(const std::vector<Interaction>& data, const ParamIndex& ix,
                    const Eigen::VectorXd& beta) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty slice");
  double total = 0;
  for (const Interaction& z : data) {
    const int j = ix.item_slot(z.item_id);
    const ItemParams item{beta[ix.a_offset(j)], beta[ix.b_offset(j)]};
    const double theta = beta[ix.theta_offset(ix.user_slot(z.user_id))];
    total += interaction_loss(z.correct, item, theta);
  }
  return total / static_cast<double>(data.size());
}

Eigen::MatrixXd dataset_hessian(const std::vector<Interaction>& data,
                                const ParamIndex& ix, const Eigen::VectorXd& beta) {
  if (data.empty()) throw std::invalid_argument("dataset_hessian: empty slice");
  if (beta.size() != ix.size())
    throw std::out_of_range("dataset_hessian: beta/index dimension mismatch");
  const int n = ix.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const Interaction& z : data) {
    const int j = ix.item_slot(z.item_id);
    const int ia = ix.a_offset(j), ib = ix.b_offset(j);
    const int it = ix.theta_offset(ix.user_slot(z.user_id));
    const ItemParams item{beta[ia], beta[ib]};
    const LossHess h = loss_hessian(z.correct, item, beta[it]);
    H(ia, ia) += h.daa * inv_n;
    H(ib, ib) += h.dbb * inv_n;
    H(it, it) += h.dtt * inv_n;
    H(ia, ib) += h.dab * inv_n;
    H(ib, ia) += h.dab * inv_n;
    H(ia, it) += h.dat * inv_n;
    H(it, ia) += h.dat * inv_n;
    H(ib, it) += h.dbt * inv_n;
    H(it, ib) += h.dbt * inv_n;
  }
  return H;
}

}  // namespace catkit
