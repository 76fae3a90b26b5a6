#include "catkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "catkit/model.hpp"
#include "catkit/parallel.hpp"
#include "catkit/rng.hpp"

namespace catkit {

double rank_corr_vs_truth(const FittedModel& model, const SyntheticTruth& truth) {
  const std::set<int> unobs(model.unobserved_items.begin(), model.unobserved_items.end());
  std::vector<double> bhat, btrue;
  for (const auto& [item, tp] : truth.items) {
    if (!model.index.has_item(item) || unobs.count(item)) continue;
    bhat.push_back(model.item(item).b);
    btrue.push_back(tp.b);
  }
  return spearman(bhat, btrue);
}

std::map<int, std::unordered_map<int, int>> test_rows_of(const ResponseDataset& data) {
  std::map<int, std::unordered_map<int, int>> rows;
  for (const Interaction& z : data.interactions) {
    auto it = data.user_roles.find(z.user_id);
    if (it != data.user_roles.end() && it->second == Role::Test)
      rows[z.user_id][z.item_id] = z.correct;
  }
  return rows;
}

std::vector<EvalResult> evaluate_model(const FittedModel& model,
                                       const std::map<int, std::unordered_map<int, int>>& test_rows,
                                       const BenchmarkConfig& bc) {
  // Stepped CAT AUC, repeated over derived seeds, aggregated per (metric, step).
  std::map<std::pair<std::string, int>, std::vector<double>> by_key;
  for (int r = 0; r < bc.eval_repeats; ++r) {
    const std::uint64_t s = mix_seed(bc.seed, 5000 + static_cast<std::uint64_t>(r));
    for (const EvalResult& e :
         cat_auc_protocol(model, test_rows, bc.cat_eval, s, bc.threads))
      by_key[{e.metric, e.step}].push_back(e.value);
  }
  std::vector<EvalResult> out;
  for (const auto& [key, values] : by_key) {
    const auto [m, sd] = mean_std(values);
    EvalResult e;
    e.metric = key.first;
    e.step = key.second;
    e.value = m;
    e.stddev = sd;
    e.n_repeats = static_cast<int>(values.size());
    e.seed_base = bc.seed;
    out.push_back(e);
  }
  std::vector<std::uint64_t> rand_seeds;
  for (int r = 0; r < bc.eval_repeats; ++r)
    rand_seeds.push_back(mix_seed(bc.seed, 6000 + static_cast<std::uint64_t>(r)));
  out.push_back(random_auc_protocol(model, test_rows, bc.rand_eval, rand_seeds, bc.threads));
  return out;
}

std::vector<SessionRow> build_random_administration_rows(const ResponseDataset& data,
                                                         const FittedModel& model,
                                                         int steps, std::uint64_t seed) {
  const std::vector<int> users = data.users_with_role(Role::Biased);
  std::vector<std::vector<SessionRow>> per_user(users.size());
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t i = 0; i < users.size(); ++i) slot[users[i]] = i;
  std::vector<std::vector<std::pair<int, int>>> rows(users.size());
  for (const Interaction& z : data.interactions) {
    auto it = slot.find(z.user_id);
    if (it != slot.end() && model.index.has_item(z.item_id))
      rows[it->second].emplace_back(z.item_id, z.correct);
  }
  std::vector<SessionRow> out;
  for (std::size_t i = 0; i < users.size(); ++i) {
    auto& row = rows[i];
    std::sort(row.begin(), row.end());
    if (static_cast<int>(row.size()) < steps)
      throw DataError("random administration: user " + std::to_string(users[i]) +
                      " has fewer than " + std::to_string(steps) + " answerable items");
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(users[i])));
    std::shuffle(row.begin(), row.end(), rng);
    std::vector<std::pair<ItemParams, int>> resp;
    for (int t = 0; t < steps; ++t)
      resp.emplace_back(model.item(row[t].first), row[t].second);
    const double theta = estimate_ability(resp, 1.0);
    for (int t = 0; t < steps; ++t) {
      SessionRow r;
      r.session_id = static_cast<int>(i);
      r.user_id = users[i];
      r.step = t + 1;
      r.item_id = row[t].first;
      r.correct = row[t].second;
      r.theta_hat = theta;
      r.selector = Selector::FI;  // label only; these rows never drive selection
      per_user[i].push_back(r);
    }
    out.insert(out.end(), per_user[i].begin(), per_user[i].end());
  }
  return out;
}

namespace {

// Fail fast with the failing stage named, preserving the error category.
template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(name) + ": " + e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const BenchmarkConfig& bc) {
  PipelineResult res;
  const int total_users =
      bc.roles.unbiased_train + bc.roles.unbiased_val + bc.roles.biased + bc.roles.test;
  res.truth = stage("synth", [&] {
    auto [data, truth] = generate_synthetic(total_users, bc.n_items, bc.synth, bc.seed);
    res.data = split_roles(data, bc.roles, bc.seed);
    return truth;
  });

  const std::vector<Interaction> train = res.data.slice(Role::UnbiasedTrain);
  const std::vector<Interaction> val = res.data.slice(Role::UnbiasedVal);
  FitConfig fit_cfg = bc.fit;
  fit_cfg.rng_seed = bc.seed;
  res.unbiased_fit =
      stage("fit", [&] { return fit_irt(train, val, fit_cfg, &res.data.item_catalog); });

  res.bias = stage("bias", [&] {
    return build_biased_set(res.data, res.unbiased_fit, bc.cat_selector, bc.cat_steps,
                            bc.threads);
  });
  res.diagnostics = stage("bias", [&] {
    return bias_diagnostics(res.data, res.bias.rows, res.unbiased_fit, res.truth.items);
  });

  const auto test_rows = test_rows_of(res.data);

  for (DebiasMethod method : bc.methods) {
    MethodOutcome mo;
    mo.method = method_name(method);
    if (method == DebiasMethod::UnbiasedOnly) {
      mo.model = res.unbiased_fit;
    } else if (method == DebiasMethod::BiasedOnly) {
      mo.model = stage("debias", [&] {
        return fit_irt(res.bias.dataset.interactions, val, fit_cfg,
                       &res.data.item_catalog);
      });
    } else {
      mo.model = stage("debias", [&] {
        DebiasConfig dc = bc.debias;
        dc.method = method;
        mo.report =
            compute_influence_report(res.unbiased_fit, train, res.bias.rows, val, dc);
        const Selection sel = selection_from_report(mo.report, res.bias.rows);
        return retrain_with_selection(train, sel, val, fit_cfg, &res.data.item_catalog);
      });
    }
    mo.rank_corr = rank_corr_vs_truth(mo.model, res.truth);
    mo.results = stage("eval", [&] { return evaluate_model(mo.model, test_rows, bc); });
    res.methods.push_back(std::move(mo));
  }
  return res;
}

void write_comparison_csv(const PipelineResult& res, const std::string& path,
                          const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << header_comment;
  out << "method,metric,step,value,std,n_repeats\n";
  char buf[64];
  const auto emit = [&](const std::string& method, const std::string& metric, int step,
                        double value, double sd, int n) {
    out << method << ',' << metric << ',';
    if (step >= 0) out << step;
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", sd);
    out << ',' << buf << ',' << n << '\n';
  };
  for (const MethodOutcome& mo : res.methods) {
    emit(mo.method, "rank_corr", -1, mo.rank_corr, 0.0, 1);
    for (const EvalResult& e : mo.results)
      emit(mo.method, e.metric, e.step, e.value, e.stddev, e.n_repeats);
  }
}

}  // namespace catkit
