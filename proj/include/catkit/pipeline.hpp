#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "catkit/cat.hpp"
#include "catkit/dataset.hpp"
#include "catkit/eval.hpp"
#include "catkit/fitting.hpp"
#include "catkit/influence.hpp"

namespace catkit {

// One benchmark run: synthesize -> fit unbiased -> simulate CAT ->
// debias/retrain per method -> evaluate.
struct BenchmarkConfig {
  int n_items = 185;
  RoleCounts roles{40, 10, 1000, 500};
  SynthConfig synth;
  FitConfig fit;
  Selector cat_selector = Selector::KLI;
  int cat_steps = 30;
  std::vector<DebiasMethod> methods = {
      DebiasMethod::UnbiasedOnly, DebiasMethod::BiasedOnly, DebiasMethod::Union,
      DebiasMethod::UserAIF,      DebiasMethod::IFParam,    DebiasMethod::IFLoss,
      DebiasMethod::GreedyAIF,    DebiasMethod::IF4URec,    DebiasMethod::IPSNB,
      DebiasMethod::IPSNBIW};
  DebiasConfig debias;
  CatAucConfig cat_eval;
  RandomAucConfig rand_eval;
  int eval_repeats = 5;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct MethodOutcome {
  std::string method;
  FittedModel model;
  InfluenceReport report;  // empty interactions for unbiased/biased rows
  double rank_corr = 0;    // difficulty vs synthetic truth
  std::vector<EvalResult> results;  // aggregated cat/random metrics
};

struct PipelineResult {
  ResponseDataset data;
  SyntheticTruth truth;
  FittedModel unbiased_fit;
  BiasOutput bias;
  BiasDiagnostics diagnostics;  // for the unbiased fit
  std::vector<MethodOutcome> methods;
};

PipelineResult run_pipeline(const BenchmarkConfig& bc);

// Difficulty rank correlation vs truth over items the model observed.
double rank_corr_vs_truth(const FittedModel& model, const SyntheticTruth& truth);

// Evaluation bundle used for every retrained model: stepped CAT AUC (mean and
// std over eval_repeats derived seeds) plus the random-split AUC.
std::vector<EvalResult> evaluate_model(const FittedModel& model,
                                       const std::map<int, std::unordered_map<int, int>>& test_rows,
                                       const BenchmarkConfig& bc);

// Dense test rows restricted to Test-role users.
std::map<int, std::unordered_map<int, int>> test_rows_of(const ResponseDataset& data);

// Size-matched non-adaptive control: per Biased user, `steps` uniformly drawn
// items from their dense row, ability estimated once on all of them. Shares
// the SessionRow shape so the same diagnostics run on both.
std::vector<SessionRow> build_random_administration_rows(const ResponseDataset& data,
                                                         const FittedModel& model,
                                                         int steps, std::uint64_t seed);

// Long-form comparison table (method x metric), the pipeline's final output.
void write_comparison_csv(const PipelineResult& res, const std::string& path,
                          const std::string& header_comment = "");

}  // namespace catkit
