#include "catkit/cat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "catkit/model.hpp"
#include "catkit/parallel.hpp"
#include "catkit/rng.hpp"

namespace catkit {

std::string selector_name(Selector s) { return s == Selector::FI ? "FI" : "KLI"; }

Selector selector_from_name(const std::string& s) {
  if (s == "FI") return Selector::FI;
  if (s == "KLI") return Selector::KLI;
  throw UsageError("unknown selector '" + s + "' (expected FI|KLI)");
}

double estimate_ability(const std::vector<std::pair<ItemParams, int>>& responses,
                        double prior_strength) {
  if (prior_strength < 0) throw std::invalid_argument("negative prior_strength");
  if (responses.empty()) {
    if (prior_strength == 0)
      throw std::invalid_argument("estimate_ability: empty responses with flat prior");
    return 0.0;
  }
  const auto objective = [&](double th) {
    double f = 0.5 * prior_strength * th * th;
    for (const auto& [it, x] : responses) f += interaction_loss(x, it, th);
    return f;
  };
  double theta = 0.0;
  double f = objective(theta);
  for (int iter = 0; iter < 50; ++iter) {
    double g = prior_strength * theta;
    double h = prior_strength;
    for (const auto& [it, x] : responses) {
      const double p = predict_prob(theta, it);
      g += it.a * (p - x);
      h += it.a * it.a * p * (1.0 - p);
    }
    if (std::abs(g) < 1e-12) break;
    if (h < 1e-12) h = 1e-12;
    double step = -g / h;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      const double fc = objective(theta + step);
      if (fc < f) {
        theta += step;
        f = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return theta;
}

double fisher_information(double theta, const ItemParams& item) {
  const double p = predict_prob(theta, item);
  return item.a * item.a * p * (1.0 - p);
}

namespace {
// log sigma(t), computed without overflow on either tail.
double log_sigmoid(double t) {
  if (t >= 0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}
}  // namespace

double kli_index(double theta_hat, const ItemParams& item, double delta, int n_quad) {
  if (delta <= 0) throw std::invalid_argument("kli_index: delta must be > 0");
  if (n_quad < 3) throw std::invalid_argument("kli_index: n_quad must be >= 3");
  if (n_quad % 2 == 0) ++n_quad;  // composite Simpson needs an odd node count
  const double t_hat = item.a * (theta_hat - item.b);
  const double p_hat = 1.0 / (1.0 + std::exp(-t_hat));
  const double ls_hat = log_sigmoid(t_hat);
  const double ls_hat_c = log_sigmoid(-t_hat);
  const auto integrand = [&](double theta) {
    const double t = item.a * (theta - item.b);
    // p_hat log(p_hat/p) + (1-p_hat) log((1-p_hat)/(1-p))
    return p_hat * (ls_hat - log_sigmoid(t)) +
           (1.0 - p_hat) * (ls_hat_c - log_sigmoid(-t));
  };
  const double h = 2.0 * delta / (n_quad - 1);
  double sum = integrand(theta_hat - delta) + integrand(theta_hat + delta);
  for (int i = 1; i < n_quad - 1; ++i) {
    const double w = (i % 2 == 1) ? 4.0 : 2.0;
    sum += w * integrand(theta_hat - delta + i * h);
  }
  return sum * h / 3.0;
}

int select_next_item(double theta_hat, const std::vector<std::pair<int, ItemParams>>& pool,
                     Selector sel, int step) {
  if (pool.empty()) throw std::invalid_argument("select_next_item: pool exhausted");
  if (step < 1) throw std::invalid_argument("select_next_item: step must be >= 1");
  const double delta = 3.0 / std::sqrt(static_cast<double>(step));
  int best_id = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [id, it] : pool) {
    const double s = sel == Selector::FI ? fisher_information(theta_hat, it)
                                         : kli_index(theta_hat, it, delta);
    if (s > best_score || (s == best_score && (best_id < 0 || id < best_id))) {
      best_score = s;
      best_id = id;
    }
  }
  return best_id;
}

ResponseOracle ResponseOracle::bernoulli_from_truth(double true_theta,
                                                    const std::map<int, ItemParams>& items,
                                                    std::uint64_t seed) {
  ResponseOracle o;
  o.kind_ = Kind::Bernoulli;
  o.theta_ = true_theta;
  o.truth_ = items;
  o.seed_ = seed;
  return o;
}

ResponseOracle ResponseOracle::dense_lookup(std::unordered_map<int, int> row) {
  ResponseOracle o;
  o.kind_ = Kind::Dense;
  o.row_ = std::move(row);
  return o;
}

bool ResponseOracle::can_answer(int item_id) const {
  return kind_ == Kind::Bernoulli ? truth_.count(item_id) > 0 : row_.count(item_id) > 0;
}

int ResponseOracle::respond(int item_id) const {
  if (kind_ == Kind::Dense) {
    auto it = row_.find(item_id);
    if (it == row_.end())
      throw DataError("oracle cannot answer item " + std::to_string(item_id));
    return it->second;
  }
  auto it = truth_.find(item_id);
  if (it == truth_.end())
    throw DataError("oracle cannot answer item " + std::to_string(item_id));
  const double p = predict_prob(theta_, it->second);
  return hash_u01(seed_, static_cast<std::uint64_t>(item_id)) < p ? 1 : 0;
}

CatSession simulate_cat(const ResponseOracle& oracle, int user_id,
                        const std::vector<std::pair<int, ItemParams>>& pool,
                        Selector sel, int steps, double prior_strength) {
  if (steps < 1) throw std::invalid_argument("simulate_cat: steps must be >= 1");
  std::vector<std::pair<int, ItemParams>> remaining;
  remaining.reserve(pool.size());
  for (const auto& c : pool)
    if (oracle.can_answer(c.first)) remaining.push_back(c);

  CatSession s;
  s.user_id = user_id;
  s.selector = sel;
  std::vector<std::pair<ItemParams, int>> answered;
  double theta_hat = 0.0;
  for (int t = 1; t <= steps; ++t) {
    if (remaining.empty()) {
      s.truncated = true;
      break;
    }
    const int pick = select_next_item(theta_hat, remaining, sel, t);
    auto it = std::find_if(remaining.begin(), remaining.end(),
                           [pick](const auto& c) { return c.first == pick; });
    const ItemParams item = it->second;
    remaining.erase(it);
    const int x = oracle.respond(pick);
    answered.emplace_back(item, x);
    theta_hat = estimate_ability(answered, prior_strength);
    s.administered.push_back(pick);
    s.responses.push_back(x);
    s.theta_trajectory.push_back(theta_hat);
  }
  return s;
}

std::vector<SessionRow> session_rows(const std::vector<CatSession>& sessions) {
  std::vector<SessionRow> rows;
  for (std::size_t sid = 0; sid < sessions.size(); ++sid) {
    const CatSession& s = sessions[sid];
    for (std::size_t k = 0; k < s.administered.size(); ++k) {
      SessionRow r;
      r.session_id = static_cast<int>(sid);
      r.user_id = s.user_id;
      r.step = static_cast<int>(k) + 1;
      r.item_id = s.administered[k];
      r.correct = s.responses[k];
      r.theta_hat = s.theta_trajectory[k];
      r.selector = s.selector;
      rows.push_back(r);
    }
  }
  return rows;
}

void save_sessions_csv(const std::vector<SessionRow>& rows, const std::string& path,
                       const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << header_comment;
  out << "session_id,user_id,step,item_id,correct,theta_hat,selector\n";
  char buf[64];
  for (const SessionRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.theta_hat);
    out << r.session_id << ',' << r.user_id << ',' << r.step << ',' << r.item_id << ','
        << r.correct << ',' << buf << ',' << selector_name(r.selector) << '\n';
  }
}

std::vector<SessionRow> load_sessions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<SessionRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("session_id,user_id,step,item_id,correct,theta_hat,selector", 0) != 0)
        throw DataError(path + " line " + std::to_string(line_no) + ": bad header");
      header_seen = true;
      continue;
    }
    SessionRow r;
    char sel[16] = {0};
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%lf,%15s", &r.session_id, &r.user_id,
                    &r.step, &r.item_id, &r.correct, &r.theta_hat, sel) != 7)
      throw DataError(path + " line " + std::to_string(line_no) + ": malformed row");
    r.selector = selector_from_name(sel);
    rows.push_back(r);
  }
  if (!header_seen) throw DataError(path + ": missing header");
  return rows;
}

BiasOutput build_biased_set(const ResponseDataset& data, const FittedModel& model,
                            Selector sel, int steps, int threads) {
  const std::vector<int> users = data.users_with_role(Role::Biased);
  if (users.empty()) throw DataError("build_biased_set: no Biased-role users");

  // Dense row per biased user, restricted to items the model knows.
  std::vector<std::unordered_map<int, int>> rows(users.size());
  {
    std::unordered_map<int, std::size_t> slot;
    for (std::size_t i = 0; i < users.size(); ++i) slot[users[i]] = i;
    for (const Interaction& z : data.interactions) {
      auto it = slot.find(z.user_id);
      if (it != slot.end() && model.index.has_item(z.item_id))
        rows[it->second][z.item_id] = z.correct;
    }
  }
  const auto pool = model.all_items();

  BiasOutput out;
  out.sessions.resize(users.size());
  parallel_for(static_cast<int>(users.size()), threads, [&](int i) {
    const ResponseOracle oracle = ResponseOracle::dense_lookup(rows[i]);
    out.sessions[i] = simulate_cat(oracle, users[i], pool, sel, steps);
  });

  out.rows = session_rows(out.sessions);
  std::vector<Interaction> zs;
  std::unordered_map<int, Role> roles;
  for (const CatSession& s : out.sessions) {
    roles[s.user_id] = Role::Biased;
    out.final_theta[s.user_id] = s.final_theta();
    for (std::size_t k = 0; k < s.administered.size(); ++k)
      zs.push_back(Interaction{s.user_id, s.administered[k], s.responses[k]});
  }
  out.dataset = make_dataset(std::move(zs), std::move(roles), Provenance::CatSimulated);
  return out;
}

}  // namespace catkit
