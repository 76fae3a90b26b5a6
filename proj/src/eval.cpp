#include "catkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "catkit/model.hpp"
#include "catkit/parallel.hpp"
#include "catkit/rng.hpp"

namespace catkit {

namespace {
// Average ranks (1-based), ties get the mid-rank.
std::vector<double> mid_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: scores/labels size mismatch");
  long n_pos = 0, n_neg = 0;
  for (int l : labels) {
    if (l == 1)
      ++n_pos;
    else if (l == 0)
      ++n_neg;
    else
      throw std::invalid_argument("auc: labels must be 0/1");
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("auc undefined: single-class labels");
  const std::vector<double> ranks = mid_ranks(scores);
  double rank_sum_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) rank_sum_pos += ranks[i];
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("accuracy: bad input sizes");
  long hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    hit += (scores[i] >= 0.5 ? 1 : 0) == labels[i];
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("spearman: need length >= 3");
  const std::vector<double> rx = mid_ranks(x), ry = mid_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
    sxy += (rx[i] - mx) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw DataError("spearman undefined: constant input");
  return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: empty");
  double m = 0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  if (values.size() == 1) return {m, 0.0};
  double s2 = 0;
  for (double v : values) s2 += (v - m) * (v - m);
  return {m, std::sqrt(s2 / static_cast<double>(values.size() - 1))};
}

std::vector<EvalResult> cat_auc_protocol(
    const FittedModel& model,
    const std::map<int, std::unordered_map<int, int>>& test_rows,
    const CatAucConfig& cfg, std::uint64_t seed, int threads, int* users_skipped) {
  if (cfg.steps.empty()) throw std::invalid_argument("cat_auc_protocol: no steps");
  if (cfg.pool_fraction <= 0 || cfg.pool_fraction >= 1)
    throw std::invalid_argument("cat_auc_protocol: pool_fraction must be in (0,1)");
  // Seeded pool/eval item split over the model's catalog.
  std::vector<int> ids = model.index.item_ids();
  Rng rng(mix_seed(seed, 10));
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_pool = static_cast<std::size_t>(
      std::llround(cfg.pool_fraction * static_cast<double>(ids.size())));
  const std::set<int> pool_set(ids.begin(), ids.begin() + n_pool);
  const std::set<int> eval_set(ids.begin() + n_pool, ids.end());

  std::vector<std::pair<int, ItemParams>> pool_items;
  for (int id : pool_set) pool_items.emplace_back(id, model.item(id));

  const int max_step = *std::max_element(cfg.steps.begin(), cfg.steps.end());

  struct UserOut {
    bool skipped = true;
    // per requested step: (scores, labels) against pool remainder and eval set
    std::vector<std::vector<double>> pool_scores, eval_scores;
    std::vector<std::vector<int>> pool_labels, eval_labels;
  };
  std::vector<int> user_ids;
  user_ids.reserve(test_rows.size());
  for (const auto& [uid, row] : test_rows) user_ids.push_back(uid);
  std::vector<UserOut> outs(user_ids.size());

  parallel_for(static_cast<int>(user_ids.size()), threads, [&](int ui) {
    const auto& row = test_rows.at(user_ids[ui]);
    UserOut& o = outs[ui];
    // Need answerable pool items for the session and at least one labeled
    // target on each side.
    long pool_in_row = 0, eval_in_row = 0;
    for (const auto& [item, x] : row) {
      if (pool_set.count(item)) ++pool_in_row;
      if (eval_set.count(item)) ++eval_in_row;
    }
    if (pool_in_row < max_step + 1 || eval_in_row < 1) return;  // skipped
    o.skipped = false;
    const ResponseOracle oracle = ResponseOracle::dense_lookup(
        std::unordered_map<int, int>(row.begin(), row.end()));
    const CatSession s = simulate_cat(oracle, user_ids[ui], pool_items, cfg.selector,
                                      max_step, cfg.prior_strength);
    o.pool_scores.resize(cfg.steps.size());
    o.eval_scores.resize(cfg.steps.size());
    o.pool_labels.resize(cfg.steps.size());
    o.eval_labels.resize(cfg.steps.size());
    for (std::size_t si = 0; si < cfg.steps.size(); ++si) {
      const int t = cfg.steps[si];
      if (t < 1 || t > static_cast<int>(s.theta_trajectory.size())) continue;
      const double th = s.theta_trajectory[t - 1];
      const std::set<int> seen(s.administered.begin(), s.administered.begin() + t);
      for (const auto& [item, x] : row) {
        if (!model.index.has_item(item)) continue;
        const bool in_pool = pool_set.count(item) > 0;
        if (in_pool && seen.count(item)) continue;
        const double p = predict_prob(th, model.item(item));
        if (in_pool) {
          o.pool_scores[si].push_back(p);
          o.pool_labels[si].push_back(x);
        } else {
          o.eval_scores[si].push_back(p);
          o.eval_labels[si].push_back(x);
        }
      }
    }
  });

  int skipped = 0;
  std::vector<std::vector<double>> pool_scores(cfg.steps.size()), eval_scores(cfg.steps.size());
  std::vector<std::vector<int>> pool_labels(cfg.steps.size()), eval_labels(cfg.steps.size());
  for (const UserOut& o : outs) {
    if (o.skipped) {
      ++skipped;
      continue;
    }
    for (std::size_t si = 0; si < cfg.steps.size(); ++si) {
      pool_scores[si].insert(pool_scores[si].end(), o.pool_scores[si].begin(),
                             o.pool_scores[si].end());
      eval_scores[si].insert(eval_scores[si].end(), o.eval_scores[si].begin(),
                             o.eval_scores[si].end());
      pool_labels[si].insert(pool_labels[si].end(), o.pool_labels[si].begin(),
                             o.pool_labels[si].end());
      eval_labels[si].insert(eval_labels[si].end(), o.eval_labels[si].begin(),
                             o.eval_labels[si].end());
    }
  }
  if (users_skipped) *users_skipped = skipped;

  std::vector<EvalResult> results;
  for (std::size_t si = 0; si < cfg.steps.size(); ++si) {
    EvalResult pool_r;
    pool_r.metric = "cat_auc_pool";
    pool_r.step = cfg.steps[si];
    pool_r.value = auc(pool_scores[si], pool_labels[si]);
    pool_r.seed_base = seed;
    results.push_back(pool_r);
    EvalResult eval_r;
    eval_r.metric = "cat_auc_eval";
    eval_r.step = cfg.steps[si];
    eval_r.value = auc(eval_scores[si], eval_labels[si]);
    eval_r.seed_base = seed;
    results.push_back(eval_r);
  }
  return results;
}

double random_auc_once(const FittedModel& model,
                       const std::map<int, std::unordered_map<int, int>>& test_rows,
                       const RandomAucConfig& cfg, std::uint64_t seed, int threads,
                       int* users_skipped) {
  if (cfg.fit_fraction <= 0 || cfg.fit_fraction >= 1)
    throw std::invalid_argument("random_auc: fit_fraction must be in (0,1)");
  std::vector<int> user_ids;
  for (const auto& [uid, row] : test_rows) user_ids.push_back(uid);
  struct UserOut {
    bool skipped = true;
    std::vector<double> scores;
    std::vector<int> labels;
  };
  std::vector<UserOut> outs(user_ids.size());
  parallel_for(static_cast<int>(user_ids.size()), threads, [&](int ui) {
    const int uid = user_ids[ui];
    std::vector<std::pair<int, int>> row;  // (item, correct), model items only
    for (const auto& [item, x] : test_rows.at(uid))
      if (model.index.has_item(item)) row.emplace_back(item, x);
    std::sort(row.begin(), row.end());
    const int n = static_cast<int>(row.size());
    if (n < 5) return;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(uid)));
    std::shuffle(order.begin(), order.end(), rng);
    const int n_hold = static_cast<int>(std::ceil((1.0 - cfg.fit_fraction) * n));
    std::vector<std::pair<ItemParams, int>> fit_rows;
    for (int i = n_hold; i < n; ++i)
      fit_rows.emplace_back(model.item(row[order[i]].first), row[order[i]].second);
    const double th = estimate_ability(fit_rows, cfg.prior_strength);
    UserOut& o = outs[ui];
    o.skipped = false;
    for (int i = 0; i < n_hold; ++i) {
      o.scores.push_back(predict_prob(th, model.item(row[order[i]].first)));
      o.labels.push_back(row[order[i]].second);
    }
  });
  int skipped = 0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const UserOut& o : outs) {
    if (o.skipped) {
      ++skipped;
      continue;
    }
    scores.insert(scores.end(), o.scores.begin(), o.scores.end());
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
  }
  if (users_skipped) *users_skipped = skipped;
  return auc(scores, labels);
}

EvalResult random_auc_protocol(const FittedModel& model,
                               const std::map<int, std::unordered_map<int, int>>& test_rows,
                               const RandomAucConfig& cfg,
                               const std::vector<std::uint64_t>& seeds, int threads) {
  if (seeds.empty()) throw std::invalid_argument("random_auc_protocol: no seeds");
  std::vector<double> values;
  values.reserve(seeds.size());
  for (std::uint64_t s : seeds)
    values.push_back(random_auc_once(model, test_rows, cfg, s, threads, nullptr));
  const auto [m, sd] = mean_std(values);
  EvalResult r;
  r.metric = "random_auc";
  r.value = m;
  r.stddev = sd;
  r.n_repeats = static_cast<int>(seeds.size());
  r.seed_base = seeds.front();
  return r;
}

BiasDiagnostics bias_diagnostics(const ResponseDataset& reference,
                                 const std::vector<SessionRow>& biased_rows,
                                 const FittedModel& retrained,
                                 const std::map<int, ItemParams>& truth_items) {
  BiasDiagnostics d;
  std::map<int, std::pair<long, long>> ref_cnt, cat_cnt;  // item -> (correct, total)
  for (const Interaction& z : reference.interactions) {
    auto& c = ref_cnt[z.item_id];
    c.first += z.correct;
    c.second += 1;
  }
  for (const SessionRow& r : biased_rows) {
    auto& c = cat_cnt[r.item_id];
    c.first += r.correct;
    c.second += 1;
  }
  for (const auto& [item, rc] : ref_cnt) {
    ItemRatio ir;
    ir.item_id = item;
    ir.reference_ratio = static_cast<double>(rc.first) / static_cast<double>(rc.second);
    auto it = cat_cnt.find(item);
    if (it == cat_cnt.end()) {
      ir.biased_ratio = std::numeric_limits<double>::quiet_NaN();
      ++d.items_missing_from_biased;
    } else {
      ir.biased_ratio =
          static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
    }
    d.item_ratios.push_back(ir);
  }

  // Difficulty recovery: retrained vs truth over items known to both, minus
  // the retrained model's unobserved items.
  const std::set<int> unobs(retrained.unobserved_items.begin(),
                            retrained.unobserved_items.end());
  std::vector<double> bhat, btrue;
  for (const auto& [item, truth] : truth_items) {
    if (!retrained.index.has_item(item) || unobs.count(item)) continue;
    bhat.push_back(retrained.item(item).b);
    btrue.push_back(truth.b);
  }
  d.rank_corr_difficulty = spearman(bhat, btrue);

  // Bias signature: final ability estimate vs mean true difficulty of that
  // user's administered items.
  std::map<int, std::pair<int, double>> final_theta;
  std::map<int, std::pair<double, long>> mean_b;
  for (const SessionRow& r : biased_rows) {
    auto& slot = final_theta[r.user_id];
    if (r.step >= slot.first) slot = {r.step, r.theta_hat};
    auto it = truth_items.find(r.item_id);
    if (it != truth_items.end()) {
      auto& mb = mean_b[r.user_id];
      mb.first += it->second.b;
      mb.second += 1;
    }
  }
  std::vector<double> thetas, diffs;
  for (const auto& [uid, ft] : final_theta) {
    auto it = mean_b.find(uid);
    if (it == mean_b.end() || it->second.second == 0) continue;
    thetas.push_back(ft.second);
    diffs.push_back(it->second.first / static_cast<double>(it->second.second));
  }
  d.bias_signature = spearman(thetas, diffs);
  return d;
}

void save_eval_csv(const std::vector<EvalResult>& results, const std::string& path,
                   const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << header_comment;
  out << "metric,step,value,std,n_repeats\n";
  char buf[64];
  for (const EvalResult& r : results) {
    out << r.metric << ',';
    if (r.step >= 0) out << r.step;
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", r.stddev);
    out << ',' << buf << ',' << r.n_repeats << '\n';
  }
}

void save_ratio_csv(const BiasDiagnostics& diag, const std::string& path,
                    const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << header_comment;
  out << "item_id,reference_ratio,biased_ratio\n";
  char buf[64];
  for (const ItemRatio& r : diag.item_ratios) {
    out << r.item_id << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.reference_ratio);
    out << buf << ',';
    if (std::isnan(r.biased_ratio)) {
      out << "missing";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", r.biased_ratio);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace catkit
