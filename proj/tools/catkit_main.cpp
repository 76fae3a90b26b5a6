// catkit command-line driver: synth | fit | bias | debias | eval | pipeline.
// One INI config file (option names quoted: 'synth.items'=16) plus flag
// overrides; every output embeds the effective config hash and seed, so
// identical invocations produce byte-identical files at any --threads value.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "catkit/cat.hpp"
#include "catkit/dataset.hpp"
#include "catkit/eval.hpp"
#include "catkit/fitting.hpp"
#include "catkit/influence.hpp"
#include "catkit/io.hpp"
#include "catkit/pipeline.hpp"

namespace {

struct Options {
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 1;

  int items = 185;
  catkit::RoleCounts roles{40, 10, 1000, 500};
  catkit::SynthConfig synth;
  catkit::FitConfig fit;
  std::string cat_selector = "KLI";
  int cat_steps = 30;

  std::string method = "UserAIF";
  std::string methods_csv =
      "unbiased,biased,union,UserAIF,IFParam,IFLoss,GreedyAIF,IF4URec,IPS-NB,IPS-NB-IW";
  catkit::DebiasConfig debias;

  std::vector<int> eval_steps = {10, 20};
  double eval_pool_fraction = 0.7;
  std::string eval_selector = "KLI";
  double eval_fit_fraction = 0.8;
  double eval_cat_prior = 1.0;
  int eval_repeats = 5;

  std::string data_path, model_path, biased_path, truth_path;
};

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

catkit::BenchmarkConfig benchmark_config(const Options& o) {
  catkit::BenchmarkConfig bc;
  bc.n_items = o.items;
  bc.roles = o.roles;
  bc.synth = o.synth;
  bc.fit = o.fit;
  bc.cat_selector = catkit::selector_from_name(o.cat_selector);
  bc.cat_steps = o.cat_steps;
  bc.methods.clear();
  for (const std::string& name : split_csv_list(o.methods_csv))
    bc.methods.push_back(catkit::method_from_name(name));
  bc.debias = o.debias;
  bc.cat_eval.pool_fraction = o.eval_pool_fraction;
  bc.cat_eval.steps = o.eval_steps;
  bc.cat_eval.selector = catkit::selector_from_name(o.eval_selector);
  bc.cat_eval.prior_strength = o.eval_cat_prior;
  bc.rand_eval.fit_fraction = o.eval_fit_fraction;
  bc.eval_repeats = o.eval_repeats;
  bc.seed = o.seed;
  bc.threads = o.threads;
  return bc;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw catkit::UsageError(msg);
}

std::string out_file(const Options& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  return (std::filesystem::path(o.out) / name).string();
}

int run(int argc, char** argv) {
  using namespace catkit;
  Options o;
  CLI::App app{"catkit: adaptive-testing selection-bias toolkit"};
  app.set_config("--config", "",
                 "INI config file (quote dotted keys: 'synth.items'=16); "
                 "explicit flags override it");
  app.fallthrough();

  app.add_option("--seed", o.seed, "Base RNG seed")->capture_default_str();
  // --out and --threads change where and how fast results land, never their
  // bytes, so they stay outside the hashed config (and the config file).
  app.add_option("--out", o.out, "Output directory")
      ->capture_default_str()
      ->configurable(false);
  app.add_option("--threads", o.threads, "Worker threads (1 = serial)")
      ->capture_default_str()
      ->configurable(false);

  app.add_option("--synth.items", o.items)->capture_default_str();
  app.add_option("--roles.train", o.roles.unbiased_train)->capture_default_str();
  app.add_option("--roles.val", o.roles.unbiased_val)->capture_default_str();
  app.add_option("--roles.biased", o.roles.biased)->capture_default_str();
  app.add_option("--roles.test", o.roles.test)->capture_default_str();
  app.add_option("--synth.a_min", o.synth.a_min)->capture_default_str();
  app.add_option("--synth.a_max", o.synth.a_max)->capture_default_str();
  app.add_option("--synth.b_mean", o.synth.b_mean)->capture_default_str();
  app.add_option("--synth.b_sd", o.synth.b_sd)->capture_default_str();
  app.add_option("--synth.theta_mean", o.synth.theta_mean)->capture_default_str();
  app.add_option("--synth.theta_sd", o.synth.theta_sd)->capture_default_str();
  app.add_option("--synth.fill", o.synth.fill_fraction)->capture_default_str();

  app.add_option("--fit.learning_rate", o.fit.learning_rate)->capture_default_str();
  app.add_option("--fit.max_epochs", o.fit.max_epochs)->capture_default_str();
  app.add_option("--fit.grad_tolerance", o.fit.grad_tolerance)->capture_default_str();
  app.add_option("--fit.prior_strength", o.fit.prior_strength)->capture_default_str();
  app.add_option("--fit.patience", o.fit.patience)->capture_default_str();
  app.add_option("--fit.val_holdout", o.fit.val_holdout_fraction)->capture_default_str();

  app.add_option("--cat.selector", o.cat_selector, "FI|KLI")->capture_default_str();
  app.add_option("--cat.steps", o.cat_steps)->capture_default_str();

  app.add_option("--debias.method", o.method)->capture_default_str();
  app.add_option("--debias.methods", o.methods_csv, "pipeline method list")
      ->capture_default_str();
  app.add_option("--debias.quantile", o.debias.quantile)->capture_default_str();
  app.add_option("--debias.alpha", o.debias.alpha)->capture_default_str();
  app.add_option("--debias.budget", o.debias.budget)->capture_default_str();
  app.add_flag("--debias.greedy_signed", o.debias.greedy_signed);
  app.add_option("--debias.lambda_damp", o.debias.lambda_damp)->capture_default_str();

  app.add_option("--eval.steps", o.eval_steps)->capture_default_str();
  app.add_option("--eval.pool_fraction", o.eval_pool_fraction)->capture_default_str();
  app.add_option("--eval.selector", o.eval_selector)->capture_default_str();
  app.add_option("--eval.fit_fraction", o.eval_fit_fraction)->capture_default_str();
  app.add_option("--eval.cat_prior", o.eval_cat_prior)->capture_default_str();
  app.add_option("--eval.repeats", o.eval_repeats)->capture_default_str();

  app.add_option("--data", o.data_path, "Input dataset CSV");
  app.add_option("--model", o.model_path, "Fitted model JSON");
  app.add_option("--biased", o.biased_path, "Biased session CSV");
  app.add_option("--truth", o.truth_path, "Synthetic truth JSON");

  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic role-split dataset");
  auto* c_fit = app.add_subcommand("fit", "Fit the model on train/val roles");
  auto* c_bias = app.add_subcommand("bias", "Simulate CAT sessions for Biased users");
  auto* c_debias = app.add_subcommand("debias", "Influence report + retrained model");
  auto* c_eval = app.add_subcommand("eval", "Evaluate a fitted model");
  auto* c_pipe = app.add_subcommand("pipeline", "synth->fit->bias->debias->eval");
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse message
    return code == 0 ? 0 : 2;
  }

  const std::string config_text = app.config_to_str(true, false);
  const auto header = [&](const std::string& kind) {
    return provenance_header(kind, config_text, o.seed);
  };

  if (*c_synth) {
    const int total =
        o.roles.unbiased_train + o.roles.unbiased_val + o.roles.biased + o.roles.test;
    auto [data, truth] = generate_synthetic(total, o.items, o.synth, o.seed);
    const ResponseDataset split = split_roles(data, o.roles, o.seed);
    save_csv(split, out_file(o, "data.csv"), header("synth"));
    save_truth_json(truth, out_file(o, "truth.json"));
    std::printf("synth: %zu interactions, %zu users, %zu items -> %s\n",
                split.interactions.size(), split.user_roles.size(),
                split.item_catalog.size(), o.out.c_str());
    return 0;
  }

  if (*c_fit) {
    require(!o.data_path.empty(), "fit: --data is required");
    const ResponseDataset data = load_csv(o.data_path);
    FitConfig fc = o.fit;
    fc.rng_seed = o.seed;
    const FittedModel m = fit_irt(data.slice(Role::UnbiasedTrain),
                                  data.slice(Role::UnbiasedVal), fc, &data.item_catalog);
    save_model_json(m, out_file(o, "model.json"));
    std::printf("fit: epochs=%d train_loss=%.6f val_loss=%.6f\n", m.epochs_run,
                m.final_train_loss, m.final_val_loss);
    if (!o.truth_path.empty()) {
      const SyntheticTruth truth = load_truth_json(o.truth_path);
      std::printf("fit: difficulty rank corr vs truth = %.6f\n",
                  rank_corr_vs_truth(m, truth));
    }
    return 0;
  }

  if (*c_bias) {
    require(!o.data_path.empty() && !o.model_path.empty(),
            "bias: --data and --model are required");
    const ResponseDataset data = load_csv(o.data_path);
    const FittedModel m = load_model_json(o.model_path);
    const BiasOutput bias = build_biased_set(data, m, selector_from_name(o.cat_selector),
                                             o.cat_steps, o.threads);
    save_sessions_csv(bias.rows, out_file(o, "biased.csv"), header("bias"));
    std::printf("bias: %zu sessions, %zu rows -> %s\n", bias.sessions.size(),
                bias.rows.size(), o.out.c_str());
    if (!o.truth_path.empty()) {
      const SyntheticTruth truth = load_truth_json(o.truth_path);
      const BiasDiagnostics d = bias_diagnostics(data, bias.rows, m, truth.items);
      std::printf("bias: signature (theta_hat vs administered difficulty) = %.4f\n",
                  d.bias_signature);
    }
    return 0;
  }

  if (*c_debias) {
    require(!o.data_path.empty() && !o.model_path.empty() && !o.biased_path.empty(),
            "debias: --data, --model and --biased are required");
    const ResponseDataset data = load_csv(o.data_path);
    const FittedModel m = load_model_json(o.model_path);
    const std::vector<SessionRow> rows = load_sessions_csv(o.biased_path);
    const std::vector<Interaction> train = data.slice(Role::UnbiasedTrain);
    const std::vector<Interaction> val = data.slice(Role::UnbiasedVal);
    FitConfig fc = o.fit;
    fc.rng_seed = o.seed;

    DebiasConfig dc = o.debias;
    dc.method = method_from_name(o.method);
    FittedModel retrained;
    if (dc.method == DebiasMethod::BiasedOnly) {
      std::vector<Interaction> zs;
      for (const SessionRow& r : rows) zs.push_back({r.user_id, r.item_id, r.correct});
      retrained = fit_irt(zs, val, fc, &data.item_catalog);
    } else {
      const InfluenceReport rep = compute_influence_report(m, train, rows, val, dc);
      save_influence_csv(rep, out_file(o, "influence_interactions.csv"),
                         out_file(o, "influence_users.csv"), header("debias"));
      retrained = retrain_with_selection(train, selection_from_report(rep, rows), val,
                                         fc, &data.item_catalog);
      long n_sel = 0;
      for (char s : rep.interaction_selected) n_sel += s;
      std::printf("debias[%s]: selected %ld/%zu rows (eta=%g lambda=%g)\n",
                  rep.method.c_str(), n_sel, rep.interactions.size(), rep.eta,
                  rep.lambda_damp);
    }
    save_model_json(retrained, out_file(o, "model_" + o.method + ".json"));
    std::printf("debias[%s]: retrained epochs=%d val_loss=%.6f\n", o.method.c_str(),
                retrained.epochs_run, retrained.final_val_loss);
    return 0;
  }

  if (*c_eval) {
    require(!o.data_path.empty() && !o.model_path.empty(),
            "eval: --data and --model are required");
    const ResponseDataset data = load_csv(o.data_path);
    const FittedModel m = load_model_json(o.model_path);
    const BenchmarkConfig bc = benchmark_config(o);
    const auto rows = test_rows_of(data);
    require(!rows.empty(), "eval: dataset has no Test-role users");
    std::vector<EvalResult> results = evaluate_model(m, rows, bc);
    if (!o.truth_path.empty()) {
      const SyntheticTruth truth = load_truth_json(o.truth_path);
      EvalResult rc;
      rc.metric = "rank_corr";
      rc.value = rank_corr_vs_truth(m, truth);
      rc.seed_base = o.seed;
      results.push_back(rc);
      if (!o.biased_path.empty()) {
        const BiasDiagnostics d =
            bias_diagnostics(data, load_sessions_csv(o.biased_path), m, truth.items);
        EvalResult sig;
        sig.metric = "bias_signature";
        sig.value = d.bias_signature;
        sig.seed_base = o.seed;
        results.push_back(sig);
        save_ratio_csv(d, out_file(o, "ratios.csv"), header("eval"));
      }
    }
    save_eval_csv(results, out_file(o, "metrics.csv"), header("eval"));
    for (const EvalResult& r : results) {
      if (r.step >= 0)
        std::printf("eval: %s@%d = %.4f (+/- %.4f, n=%d)\n", r.metric.c_str(), r.step,
                    r.value, r.stddev, r.n_repeats);
      else
        std::printf("eval: %s = %.4f (+/- %.4f, n=%d)\n", r.metric.c_str(), r.value,
                    r.stddev, r.n_repeats);
    }
    return 0;
  }

  // pipeline
  const BenchmarkConfig bc = benchmark_config(o);
  const PipelineResult res = run_pipeline(bc);
  save_csv(res.data, out_file(o, "data.csv"), header("synth"));
  save_truth_json(res.truth, out_file(o, "truth.json"));
  save_model_json(res.unbiased_fit, out_file(o, "model.json"));
  save_sessions_csv(res.bias.rows, out_file(o, "biased.csv"), header("bias"));
  save_ratio_csv(res.diagnostics, out_file(o, "ratios.csv"), header("eval"));
  for (const MethodOutcome& mo : res.methods) {
    save_model_json(mo.model, out_file(o, "model_" + mo.method + ".json"));
    if (!mo.report.interactions.empty())
      save_influence_csv(mo.report, out_file(o, "influence_" + mo.method + "_interactions.csv"),
                         out_file(o, "influence_" + mo.method + "_users.csv"),
                         header("debias"));
  }
  write_comparison_csv(res, out_file(o, "comparison.csv"), header("pipeline"));
  std::printf("pipeline: bias signature=%.4f, %zu methods -> %s/comparison.csv\n",
              res.diagnostics.bias_signature, res.methods.size(), o.out.c_str());
  for (const MethodOutcome& mo : res.methods)
    std::printf("pipeline: %-10s rank_corr=%.4f\n", mo.method.c_str(), mo.rank_corr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const catkit::UsageError& e) {
    std::fprintf(stderr, "error (usage): %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error (usage): %s\n", e.what());
    return 2;
  } catch (const catkit::DataError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return 3;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return 3;
  } catch (const catkit::NumericalError& e) {
    std::fprintf(stderr, "error (numerical): %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
