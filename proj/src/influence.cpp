#include "catkit/influence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "catkit/model.hpp"
#include "catkit/rng.hpp"

namespace catkit {

namespace {
bool factorization_ok(const Eigen::MatrixXd& damped, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(damped);
  if (llt.info() != Eigen::Success) return false;
  // Residual probe on two seeded random right-hand sides.
  Rng rng(0x5eedULL);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int probe = 0; probe < 2; ++probe) {
    Eigen::VectorXd g(damped.rows());
    for (int i = 0; i < g.size(); ++i) g[i] = nd(rng);
    const Eigen::VectorXd x = llt.solve(g);
    const double rel = (damped * x - g).norm() / g.norm();
    if (!(rel <= 1e-8)) return false;
  }
  return true;
}
}  // namespace

HessianFactorization factorize_hessian(const Eigen::MatrixXd& H, double lambda_damp) {
  if (H.rows() != H.cols()) throw std::invalid_argument("factorize_hessian: not square");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("factorize_hessian: not symmetric");
  const int n = static_cast<int>(H.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  HessianFactorization fact;
  fact.n = n;
  if (factorization_ok(H + lambda_damp * I, fact.llt)) {
    fact.lambda_damp = lambda_damp;
    return fact;
  }
  for (double lam = 1e-6; lam <= 1e+2 * (1 + 1e-12); lam *= 10) {
    if (lam <= lambda_damp) continue;
    if (factorization_ok(H + lam * I, fact.llt)) {
      fact.lambda_damp = lam;
      return fact;
    }
  }
  throw NumericalError("factorize_hessian: no positive-definite damping up to 1e+2");
}

InfluenceEngine::InfluenceEngine(const FittedModel& model,
                                 const std::vector<Interaction>& train,
                                 const std::vector<Interaction>& val, double lambda_damp)
    : model_(model) {
  const Eigen::MatrixXd H = dataset_hessian(train, model.index, model.beta);
  fact_ = factorize_hessian(H, lambda_damp);
  w_sol_ = fact_.solve(Eigen::VectorXd::Ones(fact_.n));

  has_val_ = !val.empty();
  if (has_val_) {
    // Fit each validation user's ability with frozen items, then accumulate
    // the validation gradient on the item coordinates (their abilities are
    // not model parameters).
    std::map<int, std::vector<Interaction>> by_user;
    for (const Interaction& y : val) by_user[y.user_id].push_back(y);
    Eigen::VectorXd g_val = Eigen::VectorXd::Zero(fact_.n);
    for (auto& [uid, rows] : by_user) {
      std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
        return a.item_id < b.item_id;
      });
      std::vector<std::pair<ItemParams, int>> resp;
      resp.reserve(rows.size());
      for (const Interaction& y : rows) resp.emplace_back(model.item(y.item_id), y.correct);
      const double th = estimate_ability(resp, model.config.prior_strength);
      for (const Interaction& y : rows) {
        const SparseGrad g =
            loss_gradient_sparse(y, model.index, model.beta, /*theta_fixed=*/true, th);
        g_val[g.a_idx] += g.da;
        g_val[g.b_idx] += g.db;
      }
    }
    u_val_ = fact_.solve(g_val);
  }
}

Eigen::VectorXd InfluenceEngine::if_param(const Interaction& z,
                                          double theta_biased_fixed) const {
  const SparseGrad g =
      loss_gradient_sparse(z, model_.index, model_.beta, /*theta_fixed=*/true,
                           theta_biased_fixed);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(fact_.n);
  rhs[g.a_idx] = g.da;
  rhs[g.b_idx] = g.db;
  return -fact_.solve(rhs);
}

double InfluenceEngine::if_param_sum(const Interaction& z,
                                     double theta_biased_fixed) const {
  // 1^T (H+lI)^-1 g == ((H+lI)^-1 1)^T g by symmetry.
  const SparseGrad g =
      loss_gradient_sparse(z, model_.index, model_.beta, /*theta_fixed=*/true,
                           theta_biased_fixed);
  return -(w_sol_[g.a_idx] * g.da + w_sol_[g.b_idx] * g.db);
}

double InfluenceEngine::if_loss(const Interaction& z, double theta_biased_fixed) const {
  if (!has_val_) throw std::invalid_argument("if_loss: empty validation slice");
  const SparseGrad g =
      loss_gradient_sparse(z, model_.index, model_.beta, /*theta_fixed=*/true,
                           theta_biased_fixed);
  return -(u_val_[g.a_idx] * g.da + u_val_[g.b_idx] * g.db);
}

double InfluenceEngine::aif_user(int user_id, const std::vector<Interaction>& zs,
                                 double theta_biased_fixed) const {
  double total = 0;
  for (const Interaction& z : zs) {
    if (z.user_id != user_id)
      throw std::invalid_argument("aif_user: interaction from another user");
    total += if_param_sum(z, theta_biased_fixed);
  }
  return total;
}

double nearest_rank_threshold(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_threshold: empty input");
  if (q <= 0 || q > 1) throw std::invalid_argument("quantile must be in (0,1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<int> select_users_aif(const std::vector<UserInfluence>& users, double q,
                                  double* eta_out) {
  if (users.empty()) throw std::invalid_argument("select_users_aif: empty input");
  std::vector<double> mags;
  mags.reserve(users.size());
  for (const UserInfluence& u : users) mags.push_back(std::abs(u.aif));
  const double eta = nearest_rank_threshold(mags, q);
  if (eta_out) *eta_out = eta;
  std::vector<int> out;
  for (const UserInfluence& u : users)
    if (std::abs(u.aif) <= eta) out.push_back(u.user_id);
  return out;
}

std::vector<std::size_t> select_interactions_if_param(
    const std::vector<InteractionInfluence>& xs, double q, double* eta_out) {
  if (xs.empty()) throw std::invalid_argument("select_interactions_if_param: empty input");
  std::vector<double> mags;
  mags.reserve(xs.size());
  for (const InteractionInfluence& x : xs) mags.push_back(std::abs(x.if_param_sum));
  const double eta = nearest_rank_threshold(mags, q);
  if (eta_out) *eta_out = eta;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::abs(xs[i].if_param_sum) <= eta) out.push_back(i);
  return out;
}

std::vector<std::size_t> select_interactions_if_loss(
    const std::vector<InteractionInfluence>& xs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i].if_loss < 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> greedy_aif(const std::vector<InteractionInfluence>& xs,
                                    int budget, bool absolute) {
  if (budget < 0 || budget > static_cast<int>(xs.size()))
    throw std::invalid_argument("greedy_aif: budget out of range");
  std::vector<char> taken(xs.size(), 0);
  std::vector<std::size_t> picks;
  picks.reserve(budget);
  double cum = 0;
  for (int t = 0; t < budget; ++t) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = xs.size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (taken[i]) continue;
      const double v = cum + xs[i].if_param_sum;
      const double score = absolute ? std::abs(v) : v;
      if (score < best) {
        best = score;
        best_i = i;
      }
    }
    taken[best_i] = 1;
    picks.push_back(best_i);
    cum += xs[best_i].if_param_sum;
  }
  return picks;
}

std::vector<double> if4urec_weights(const std::vector<InteractionInfluence>& xs,
                                    double alpha, bool* degenerate) {
  if (xs.empty()) throw std::invalid_argument("if4urec_weights: empty input");
  if (alpha <= 0) throw std::invalid_argument("if4urec_weights: alpha must be > 0");
  double lo = xs[0].if_loss, hi = xs[0].if_loss;
  for (const InteractionInfluence& x : xs) {
    lo = std::min(lo, x.if_loss);
    hi = std::max(hi, x.if_loss);
  }
  std::vector<double> w(xs.size());
  if (hi <= lo) {
    if (degenerate) *degenerate = true;
    std::fill(w.begin(), w.end(), 0.5);
    return w;
  }
  if (degenerate) *degenerate = false;
  for (std::size_t i = 0; i < xs.size(); ++i)
    w[i] = 1.0 / (1.0 + std::exp(alpha * xs[i].if_loss / (hi - lo)));
  return w;
}

std::vector<double> ips_nb_weights(const std::vector<SessionRow>& biased_rows,
                                   bool item_user_variant) {
  if (biased_rows.empty()) throw std::invalid_argument("ips_nb_weights: empty input");
  std::map<int, double> item_cnt, user_cnt;
  for (const SessionRow& r : biased_rows) {
    item_cnt[r.item_id] += 1;
    user_cnt[r.user_id] += 1;
  }
  const double total = static_cast<double>(biased_rows.size());
  std::vector<double> w(biased_rows.size());
  double sum = 0;
  for (std::size_t i = 0; i < biased_rows.size(); ++i) {
    double propensity = item_cnt[biased_rows[i].item_id] / total;
    if (item_user_variant) propensity *= user_cnt[biased_rows[i].user_id] / total;
    w[i] = 1.0 / propensity;
    sum += w[i];
  }
  const double scale = static_cast<double>(w.size()) / sum;  // mean-1 normalization
  for (double& v : w) v *= scale;
  return w;
}

std::string method_name(DebiasMethod m) {
  switch (m) {
    case DebiasMethod::UnbiasedOnly: return "unbiased";
    case DebiasMethod::BiasedOnly: return "biased";
    case DebiasMethod::Union: return "union";
    case DebiasMethod::UserAIF: return "UserAIF";
    case DebiasMethod::IFParam: return "IFParam";
    case DebiasMethod::IFLoss: return "IFLoss";
    case DebiasMethod::GreedyAIF: return "GreedyAIF";
    case DebiasMethod::IF4URec: return "IF4URec";
    case DebiasMethod::IPSNB: return "IPS-NB";
    case DebiasMethod::IPSNBIW: return "IPS-NB-IW";
  }
  throw std::logic_error("bad method");
}

DebiasMethod method_from_name(const std::string& s) {
  for (DebiasMethod m :
       {DebiasMethod::UnbiasedOnly, DebiasMethod::BiasedOnly, DebiasMethod::Union,
        DebiasMethod::UserAIF, DebiasMethod::IFParam, DebiasMethod::IFLoss,
        DebiasMethod::GreedyAIF, DebiasMethod::IF4URec, DebiasMethod::IPSNB,
        DebiasMethod::IPSNBIW})
    if (method_name(m) == s) return m;
  throw UsageError("unknown method '" + s +
                   "' (expected unbiased|biased|union|UserAIF|IFParam|IFLoss|"
                   "GreedyAIF|IF4URec|IPS-NB|IPS-NB-IW)");
}

InfluenceReport compute_influence_report(const FittedModel& model,
                                         const std::vector<Interaction>& train,
                                         const std::vector<SessionRow>& biased_rows,
                                         const std::vector<Interaction>& val,
                                         const DebiasConfig& cfg) {
  if (biased_rows.empty())
    throw std::invalid_argument("compute_influence_report: no biased rows");
  const double lambda =
      cfg.lambda_damp >= 0 ? cfg.lambda_damp : model.config.prior_strength;
  InfluenceEngine engine(model, train, val, lambda);

  // Fixed ability per biased user: the final (largest-step) CAT estimate.
  std::map<int, std::pair<int, double>> final_theta;  // user -> (step, theta)
  for (const SessionRow& r : biased_rows) {
    auto& slot = final_theta[r.user_id];
    if (r.step >= slot.first) slot = {r.step, r.theta_hat};
  }

  InfluenceReport rep;
  rep.method = method_name(cfg.method);
  rep.lambda_damp = engine.factorization().lambda_damp;
  rep.interactions.reserve(biased_rows.size());
  for (const SessionRow& r : biased_rows) {
    const Interaction z{r.user_id, r.item_id, r.correct};
    const double th = final_theta.at(r.user_id).second;
    InteractionInfluence x;
    x.user_id = r.user_id;
    x.item_id = r.item_id;
    x.if_param_sum = engine.if_param_sum(z, th);
    x.if_loss = val.empty() ? 0.0 : engine.if_loss(z, th);
    rep.interactions.push_back(x);
  }

  std::map<int, double> aif;
  for (const InteractionInfluence& x : rep.interactions) aif[x.user_id] += x.if_param_sum;
  rep.users.reserve(aif.size());
  for (const auto& [uid, v] : aif) rep.users.push_back(UserInfluence{uid, v, false});

  rep.interaction_selected.assign(rep.interactions.size(), 0);
  switch (cfg.method) {
    case DebiasMethod::UnbiasedOnly:
      break;
    case DebiasMethod::BiasedOnly:
    case DebiasMethod::Union: {
      std::fill(rep.interaction_selected.begin(), rep.interaction_selected.end(), 1);
      for (UserInfluence& u : rep.users) u.selected = true;
      break;
    }
    case DebiasMethod::UserAIF: {
      const std::vector<int> keep = select_users_aif(rep.users, cfg.quantile, &rep.eta);
      const std::set<int> keep_set(keep.begin(), keep.end());
      for (UserInfluence& u : rep.users) u.selected = keep_set.count(u.user_id) > 0;
      for (std::size_t i = 0; i < rep.interactions.size(); ++i)
        rep.interaction_selected[i] = keep_set.count(rep.interactions[i].user_id) ? 1 : 0;
      break;
    }
    case DebiasMethod::IFParam: {
      for (std::size_t i : select_interactions_if_param(rep.interactions, cfg.quantile,
                                                        &rep.eta))
        rep.interaction_selected[i] = 1;
      break;
    }
    case DebiasMethod::IFLoss: {
      if (val.empty()) throw std::invalid_argument("IFLoss needs a validation slice");
      for (std::size_t i : select_interactions_if_loss(rep.interactions))
        rep.interaction_selected[i] = 1;
      break;
    }
    case DebiasMethod::GreedyAIF: {
      rep.budget = cfg.budget >= 0
                       ? cfg.budget
                       : static_cast<int>(std::ceil(
                             cfg.quantile * static_cast<double>(rep.interactions.size())));
      for (std::size_t i : greedy_aif(rep.interactions, rep.budget, !cfg.greedy_signed))
        rep.interaction_selected[i] = 1;
      break;
    }
    case DebiasMethod::IF4URec: {
      if (val.empty()) throw std::invalid_argument("IF4URec needs a validation slice");
      rep.alpha = cfg.alpha;
      rep.weights =
          if4urec_weights(rep.interactions, cfg.alpha, &rep.degenerate_weight_range);
      std::fill(rep.interaction_selected.begin(), rep.interaction_selected.end(), 1);
      break;
    }
    case DebiasMethod::IPSNB:
    case DebiasMethod::IPSNBIW: {
      rep.weights = ips_nb_weights(biased_rows, cfg.method == DebiasMethod::IPSNBIW);
      std::fill(rep.interaction_selected.begin(), rep.interaction_selected.end(), 1);
      break;
    }
  }
  return rep;
}

Selection selection_from_report(const InfluenceReport& report,
                                const std::vector<SessionRow>& biased_rows) {
  if (biased_rows.size() != report.interactions.size())
    throw std::invalid_argument("selection_from_report: rows/report mismatch");
  Selection sel;
  for (std::size_t i = 0; i < report.interactions.size(); ++i) {
    if (!report.interaction_selected[i]) continue;
    const SessionRow& r = biased_rows[i];
    sel.rows.push_back(Interaction{r.user_id, r.item_id, r.correct});
    sel.weights.push_back(report.weights.empty() ? 1.0 : report.weights[i]);
  }
  return sel;
}

FittedModel retrain_with_selection(const std::vector<Interaction>& train,
                                   const Selection& sel,
                                   const std::vector<Interaction>& val,
                                   const FitConfig& cfg, const std::vector<int>* catalog) {
  if (sel.rows.size() != sel.weights.size())
    throw std::invalid_argument("retrain_with_selection: rows/weights mismatch");
  std::vector<Interaction> all = train;
  std::vector<double> w(train.size(), 1.0);
  all.insert(all.end(), sel.rows.begin(), sel.rows.end());
  w.insert(w.end(), sel.weights.begin(), sel.weights.end());
  return fit_irt_weighted(all, w, val, cfg, catalog);
}

void save_influence_csv(const InfluenceReport& report,
                        const std::string& interactions_path,
                        const std::string& users_path,
                        const std::string& header_comment) {
  char buf[64];
  {
    std::ofstream out(interactions_path);
    if (!out) throw DataError("cannot write " + interactions_path);
    out << header_comment;
    out << "# method=" << report.method << " lambda_damp=" << report.lambda_damp;
    if (report.eta != 0) out << " eta=" << report.eta;
    if (report.alpha != 0) out << " alpha=" << report.alpha;
    if (report.budget != 0) out << " budget=" << report.budget;
    out << '\n';
    out << "user_id,item_id,if_param_sum,if_loss," << (report.weights.empty() ? "selected" : "weight")
        << '\n';
    for (std::size_t i = 0; i < report.interactions.size(); ++i) {
      const InteractionInfluence& x = report.interactions[i];
      out << x.user_id << ',' << x.item_id << ',';
      std::snprintf(buf, sizeof buf, "%.17g", x.if_param_sum);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", x.if_loss);
      out << buf << ',';
      if (report.weights.empty()) {
        out << int(report.interaction_selected[i]);
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", report.weights[i]);
        out << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(users_path);
    if (!out) throw DataError("cannot write " + users_path);
    out << header_comment;
    std::snprintf(buf, sizeof buf, "%.17g", report.eta);
    out << "# method=" << report.method << " eta=" << buf << '\n';
    out << "user_id,aif,selected\n";
    for (const UserInfluence& u : report.users) {
      std::snprintf(buf, sizeof buf, "%.17g", u.aif);
      out << u.user_id << ',' << buf << ',' << int(u.selected) << '\n';
    }
  }
}

}  // namespace catkit
