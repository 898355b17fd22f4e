#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowgrasp/io.hpp"

namespace flowgrasp {

// Per-repetition refinement metrics. Counts refer to the recorded threshold.
struct RunMetrics {
  int repetition = 0;
  double initial_mean_d = 0.0;
  double final_mean_d = 0.0;
  std::vector<std::string> classifier_names;
  std::vector<double> initial_classifier_means;
  std::vector<double> final_classifier_means;
  int initial_above = 0;
  int final_above = 0;
  double relative_improvement = 1.0;  // +inf encoded as infinity
  double wall_time_s = 0.0;
  std::uint64_t eval_count = 0;
  std::uint64_t grad_count = 0;
  std::vector<double> ranked_final_scores;  // nonincreasing
};

struct MetricsReport {
  std::string method;
  double threshold = 0.5;
  std::vector<RunMetrics> runs;
  std::vector<double> success_by_attempt;  // index k-1: P(top-k has a success)

  double mean_initial_d() const;
  double mean_final_d() const;
  std::uint64_t total_eval_count() const;
  double total_wall_time_s() const;
};

// Loaded experiment inputs, reusable across repetitions and method overrides.
struct ExperimentContext {
  ExperimentSpec spec;
  Scene scene;
  ClassifierSet classifiers;
  std::optional<KinematicChain> chain;
  std::optional<GripperModel> gripper;
};

ExperimentContext load_context(const ExperimentSpec& spec);

// Sample -> (top-k select) -> refine -> rank. When `write_outputs` is set,
// traces stream to <output_dir>/traces.jsonl and the report and csv table are
// written alongside.
MetricsReport run_experiment(const ExperimentContext& ctx, bool write_outputs = true);

inline MetricsReport run_experiment(const ExperimentSpec& spec, bool write_outputs = true) {
  return run_experiment(load_context(spec), write_outputs);
}

// MH iteration count whose classifier-evaluation budget matches a flow run:
// each flow step is costed as three evaluates (one evaluate plus a gradient).
int matched_mh_iterations(const FlowConfig& flow);

struct ComparisonRow {
  std::string label;
  double mean_final_d = 0.0;
  double relative_improvement = 1.0;
  double wall_time_s = 0.0;
  std::uint64_t eval_count = 0;
  std::uint64_t grad_count = 0;
};

// Runs each spec (all must share scene, sampler and seed) and tabulates the
// outcomes; with budget_match every MH method is re-run at the evaluation
// budget of the first flow spec.
std::vector<ComparisonRow> compare_methods(const std::vector<ExperimentSpec>& specs,
                                           bool budget_match = false);

// Fraction of repetitions whose top-k ranked grasps contain at least one
// final score above tau, for k = 1..K.
std::vector<double> success_by_attempt(const MetricsReport& report, double tau);

void write_report(const std::filesystem::path& file, const MetricsReport& report);
void write_table(const std::filesystem::path& file, const MetricsReport& report);
void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows);

}  // namespace flowgrasp
