#include "catkit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "catkit/cat.hpp"
#include "catkit/model.hpp"
#include "catkit/rng.hpp"

namespace catkit {

std::vector<std::pair<int, ItemParams>> FittedModel::all_items() const {
  std::vector<std::pair<int, ItemParams>> out;
  out.reserve(index.n_items());
  for (int id : index.item_ids()) out.emplace_back(id, item(id));
  return out;
}

namespace {

constexpr int kMaxHalvings = 30;

// Optimization coordinates phi mirror beta's layout with a -> log a.
Eigen::VectorXd beta_from_phi(const ParamIndex& ix, const Eigen::VectorXd& phi) {
  Eigen::VectorXd beta = phi;
  for (int j = 0; j < ix.n_items(); ++j) beta[ix.a_offset(j)] = std::exp(phi[ix.a_offset(j)]);
  return beta;
}

struct Problem {
  const ParamIndex& ix;
  const std::vector<Interaction>& train;  // sorted
  const std::vector<double>& weights;     // aligned with train
  double lambda;
  const std::vector<char>& frozen_item;   // per item slot: no train data

  double objective(const Eigen::VectorXd& beta) const {
    double loss = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const Interaction& z = train[i];
      const int j = ix.item_slot(z.item_id);
      const ItemParams it{beta[ix.a_offset(j)], beta[ix.b_offset(j)]};
      const double th = beta[ix.theta_offset(ix.user_slot(z.user_id))];
      loss += weights[i] * interaction_loss(z.correct, it, th);
    }
    loss /= static_cast<double>(train.size());
    double pen = 0;
    for (int j = 0; j < ix.n_items(); ++j) {
      if (frozen_item[j]) continue;
      pen += beta[ix.a_offset(j)] * beta[ix.a_offset(j)] +
             beta[ix.b_offset(j)] * beta[ix.b_offset(j)];
    }
    for (int u = 0; u < ix.n_users(); ++u)
      pen += beta[ix.theta_offset(u)] * beta[ix.theta_offset(u)];
    return loss + 0.5 * lambda * pen;
  }

  // Gradient in phi coordinates (chain rule through a = exp(log a));
  // frozen item coordinates are masked to zero.
  Eigen::VectorXd gradient_phi(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ix.size());
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      const Interaction& z = train[i];
      const int j = ix.item_slot(z.item_id);
      const int ia = ix.a_offset(j), ib = ix.b_offset(j);
      const int it = ix.theta_offset(ix.user_slot(z.user_id));
      const double a = beta[ia];
      const double u = beta[it] - beta[ib];
      const double p = 1.0 / (1.0 + std::exp(-a * u));
      const double d = (p - z.correct) * weights[i] * inv_n;
      g[ia] += d * u;
      g[ib] += -a * d;
      g[it] += a * d;
    }
    for (int j = 0; j < ix.n_items(); ++j) {
      const int ia = ix.a_offset(j), ib = ix.b_offset(j);
      if (frozen_item[j]) {
        g[ia] = 0;
        g[ib] = 0;
        continue;
      }
      g[ia] += lambda * beta[ia];
      g[ib] += lambda * beta[ib];
      g[ia] *= beta[ia];  // d/d(log a) = a * d/da
    }
    for (int u = 0; u < ix.n_users(); ++u) {
      const int it = ix.theta_offset(u);
      g[it] += lambda * beta[it];
    }
    return g;
  }
};

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

double validation_loss(const ParamIndex& ix, const Eigen::VectorXd& beta,
                       const std::vector<Interaction>& val, double holdout_fraction,
                       double prior_strength, std::uint64_t rng_seed, int* skipped) {
  if (holdout_fraction <= 0 || holdout_fraction >= 1)
    throw std::invalid_argument("validation_loss: holdout_fraction must be in (0,1)");
  std::map<int, std::vector<Interaction>> by_user;
  for (const Interaction& z : val) by_user[z.user_id].push_back(z);
  int n_skipped = 0;
  double total = 0;
  long count = 0;
  for (auto& [uid, rows] : by_user) {
    const int n = static_cast<int>(rows.size());
    if (n < 5) {
      ++n_skipped;
      continue;
    }
    std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
      return a.item_id < b.item_id;
    });
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(uid)));
    std::shuffle(order.begin(), order.end(), rng);
    const int n_hold = static_cast<int>(std::ceil(holdout_fraction * n));
    std::vector<std::pair<ItemParams, int>> fit_rows;
    for (int i = n_hold; i < n; ++i) {
      const Interaction& z = rows[order[i]];
      fit_rows.emplace_back(item_at(ix, beta, z.item_id), z.correct);
    }
    const double th = estimate_ability(fit_rows, prior_strength);
    for (int i = 0; i < n_hold; ++i) {
      const Interaction& z = rows[order[i]];
      total += interaction_loss(z.correct, item_at(ix, beta, z.item_id), th);
      ++count;
    }
  }
  if (skipped) *skipped = n_skipped;
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(count);
}

FittedModel fit_irt_weighted(const std::vector<Interaction>& train,
                             const std::vector<double>& weights,
                             const std::vector<Interaction>& val, const FitConfig& cfg,
                             const std::vector<int>* catalog) {
  if (train.empty()) throw std::invalid_argument("fit_irt: empty train set");
  if (weights.size() != train.size())
    throw std::invalid_argument("fit_irt: weights/train size mismatch");
  if (cfg.learning_rate <= 0 || cfg.max_epochs < 1 || cfg.grad_tolerance <= 0 ||
      cfg.prior_strength < 0 || cfg.patience < 1)
    throw std::invalid_argument("fit_irt: bad config");

  std::set<int> train_users;
  std::set<int> items;
  for (const Interaction& z : train) {
    train_users.insert(z.user_id);
    items.insert(z.item_id);
  }
  for (const Interaction& z : val) {
    if (train_users.count(z.user_id))
      throw std::invalid_argument("fit_irt: val user " + std::to_string(z.user_id) +
                                  " overlaps train");
    items.insert(z.item_id);
  }
  if (catalog)
    for (int id : *catalog) items.insert(id);

  ParamIndex ix(std::vector<int>(items.begin(), items.end()),
                std::vector<int>(train_users.begin(), train_users.end()));

  // Deterministic interaction order regardless of caller ordering.
  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](std::size_t l, std::size_t r) {
    if (train[l].user_id != train[r].user_id) return train[l].user_id < train[r].user_id;
    return train[l].item_id < train[r].item_id;
  });
  std::vector<Interaction> tr(train.size());
  std::vector<double> w(train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    tr[i] = train[perm[i]];
    w[i] = weights[perm[i]];
  }

  // Smart init: a = 1, b = logit of the item's Laplace-smoothed incorrectness,
  // theta = logit of the user's Laplace-smoothed correctness.
  std::vector<double> item_cnt(ix.n_items(), 0), item_corr(ix.n_items(), 0);
  std::vector<double> user_cnt(ix.n_users(), 0), user_corr(ix.n_users(), 0);
  for (const Interaction& z : tr) {
    const int j = ix.item_slot(z.item_id);
    const int u = ix.user_slot(z.user_id);
    item_cnt[j] += 1;
    item_corr[j] += z.correct;
    user_cnt[u] += 1;
    user_corr[u] += z.correct;
  }
  std::vector<char> frozen(ix.n_items(), 0);
  std::vector<int> unobserved;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(ix.size());
  for (int j = 0; j < ix.n_items(); ++j) {
    const double p_corr = (item_corr[j] + 1.0) / (item_cnt[j] + 2.0);
    phi[ix.a_offset(j)] = 0.0;  // log a = 0
    phi[ix.b_offset(j)] = logit(1.0 - p_corr);
    if (item_cnt[j] == 0) {
      frozen[j] = 1;
      unobserved.push_back(ix.item_ids()[j]);
    }
  }
  for (int u = 0; u < ix.n_users(); ++u) {
    const double p = (user_corr[u] + 1.0) / (user_cnt[u] + 2.0);
    phi[ix.theta_offset(u)] = logit(p);
  }

  Problem prob{ix, tr, w, cfg.prior_strength, frozen};
  Eigen::VectorXd beta = beta_from_phi(ix, phi);
  double f = prob.objective(beta);

  bool has_val = !val.empty();
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_phi = phi;
  int val_skipped = 0;
  if (has_val) {
    best_val = validation_loss(ix, beta, val, cfg.val_holdout_fraction,
                               cfg.prior_strength, cfg.rng_seed, &val_skipped);
    if (std::isnan(best_val)) has_val = false;  // every val user too sparse
  }
  int since_best = 0;
  int epochs = 0;
  double lr = cfg.learning_rate;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const Eigen::VectorXd g = prob.gradient_phi(beta);
    if (g.norm() <= cfg.grad_tolerance) break;
    lr *= 2;
    bool accepted = false;
    Eigen::VectorXd cand, cand_beta;
    double fc = 0;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      cand = phi - lr * g;
      cand_beta = beta_from_phi(ix, cand);
      fc = prob.objective(cand_beta);
      if (fc < f) {
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // no descent direction progress left at fp resolution
    phi = cand;
    beta = cand_beta;
    f = fc;
    epochs = epoch;
    if (has_val) {
      const double vl = validation_loss(ix, beta, val, cfg.val_holdout_fraction,
                                        cfg.prior_strength, cfg.rng_seed, nullptr);
      if (vl < best_val) {
        best_val = vl;
        best_phi = phi;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }

  FittedModel m;
  m.index = ix;
  m.beta = beta_from_phi(ix, has_val ? best_phi : phi);
  m.config = cfg;
  m.epochs_run = epochs;
  m.unobserved_items = unobserved;
  double loss = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Interaction& z = tr[i];
    loss += w[i] * interaction_loss(z.correct, m.item(z.item_id), m.theta(z.user_id));
  }
  m.final_train_loss = loss / static_cast<double>(tr.size());
  m.final_val_loss =
      has_val ? validation_loss(ix, m.beta, val, cfg.val_holdout_fraction,
                                cfg.prior_strength, cfg.rng_seed, &m.val_users_skipped)
              : std::numeric_limits<double>::quiet_NaN();
  return m;
}

FittedModel fit_irt(const std::vector<Interaction>& train,
                    const std::vector<Interaction>& val, const FitConfig& cfg,
                    const std::vector<int>* catalog) {
  return fit_irt_weighted(train, std::vector<double>(train.size(), 1.0), val, cfg,
                          catalog);
}

std::string model_to_json(const FittedModel& m) {
  nlohmann::json j;
  j["config"] = {{"learning_rate", m.config.learning_rate},
                 {"max_epochs", m.config.max_epochs},
                 {"grad_tolerance", m.config.grad_tolerance},
                 {"prior_strength", m.config.prior_strength},
                 {"patience", m.config.patience},
                 {"val_holdout_fraction", m.config.val_holdout_fraction},
                 {"rng_seed", m.config.rng_seed}};
  j["epochs_run"] = m.epochs_run;
  j["final_train_loss"] = m.final_train_loss;
  j["final_val_loss"] = m.final_val_loss;
  j["val_users_skipped"] = m.val_users_skipped;
  j["unobserved_items"] = m.unobserved_items;
  auto& items = j["items"] = nlohmann::json::array();
  for (int id : m.index.item_ids()) {
    const ItemParams it = m.item(id);
    items.push_back(
        {{"item_id", id}, {"discrimination", it.a}, {"difficulty", it.b}});
  }
  auto& users = j["users"] = nlohmann::json::array();
  for (int id : m.index.user_ids())
    users.push_back({{"user_id", id}, {"theta", m.theta(id)}});
  return j.dump(2) + "\n";
}

namespace {
FittedModel model_from_json_impl(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  FittedModel m;
  const auto& c = j.at("config");
  m.config.learning_rate = c.at("learning_rate");
  m.config.max_epochs = c.at("max_epochs");
  m.config.grad_tolerance = c.at("grad_tolerance");
  m.config.prior_strength = c.at("prior_strength");
  m.config.patience = c.at("patience");
  m.config.val_holdout_fraction = c.at("val_holdout_fraction");
  m.config.rng_seed = c.at("rng_seed");
  m.epochs_run = j.at("epochs_run");
  m.final_train_loss = j.at("final_train_loss");
  // NaN (no validation) serializes as null; read it back as NaN.
  m.final_val_loss = std::numeric_limits<double>::quiet_NaN();
  if (j.contains("final_val_loss") && j.at("final_val_loss").is_number())
    m.final_val_loss = j.at("final_val_loss").get<double>();
  m.val_users_skipped = j.at("val_users_skipped");
  m.unobserved_items = j.at("unobserved_items").get<std::vector<int>>();

  std::vector<int> item_ids;
  std::vector<int> user_ids;
  for (const auto& e : j.at("items")) item_ids.push_back(e.at("item_id"));
  for (const auto& e : j.at("users")) user_ids.push_back(e.at("user_id"));
  m.index = ParamIndex(item_ids, user_ids);
  m.beta.resize(m.index.size());
  for (const auto& e : j.at("items")) {
    const int slot = m.index.item_slot(e.at("item_id"));
    m.beta[m.index.a_offset(slot)] = e.at("discrimination");
    m.beta[m.index.b_offset(slot)] = e.at("difficulty");
  }
  for (const auto& e : j.at("users")) {
    const int slot = m.index.user_slot(e.at("user_id"));
    m.beta[m.index.theta_offset(slot)] = e.at("theta");
  }
  return m;
}
}  // namespace

FittedModel model_from_json(const std::string& text) {
  try {
    return model_from_json_impl(text);
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("bad model JSON: ") + e.what());
  }
}

void save_model_json(const FittedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << model_to_json(m);
}

FittedModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace catkit
