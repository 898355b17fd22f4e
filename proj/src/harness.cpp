#include "flowgrasp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace flowgrasp {

namespace {

std::vector<EulerGrasp> to_euler_batch(const std::vector<GraspPose>& poses) {
  std::vector<EulerGrasp> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(from_pose(p));
  return out;
}

double joint_product(const ClassifierSet& set, const EulerGrasp& g, const Scene& scene) {
  double d = 1.0;
  for (const auto& c : set.classifiers) d *= c->evaluate(g, scene);
  return clamp_prob(d);
}

// Single-entry trace so method=none flows through the same reporting path.
RefinementTrace identity_trace(const EulerGrasp& g, const ClassifierSet& set,
                               const Scene& scene) {
  RefinementTrace t;
  TraceStep s;
  s.step = 0;
  s.grasp = g;
  for (const auto& c : set.classifiers) s.per_classifier.push_back(c->evaluate(g, scene));
  s.joint_score = clamp_prob(
      std::accumulate(s.per_classifier.begin(), s.per_classifier.end(), 1.0,
                      std::multiplies<double>()));
  t.steps.push_back(std::move(s));
  return t;
}

}  // namespace

double MetricsReport::mean_initial_d() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.initial_mean_d;
  return runs.empty() ? 0.0 : s / runs.size();
}

double MetricsReport::mean_final_d() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.final_mean_d;
  return runs.empty() ? 0.0 : s / runs.size();
}

std::uint64_t MetricsReport::total_eval_count() const {
  std::uint64_t s = 0;
  for (const auto& r : runs) s += r.eval_count;
  return s;
}

double MetricsReport::total_wall_time_s() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.wall_time_s;
  return s;
}

ExperimentContext load_context(const ExperimentSpec& spec) {
  ExperimentContext ctx;
  ctx.spec = spec;
  ctx.scene = load_scene(spec.scene_file);
  if (!spec.chain_file.empty()) ctx.chain = load_chain(spec.chain_file);
  if (!spec.gripper_file.empty()) ctx.gripper = load_gripper(spec.gripper_file);

  for (char c : spec.classifier_selection) {
    switch (c) {
      case 'S':
        ctx.classifiers.add(std::make_shared<StabilityClassifier>(*ctx.gripper));
        break;
      case 'E': {
        JointConfig seed(ctx.chain->dof());
        for (int i = 0; i < ctx.chain->dof(); ++i)
          seed(i) = 0.5 * (ctx.chain->joint_limits[i].lo + ctx.chain->joint_limits[i].hi);
        ctx.classifiers.add(std::make_shared<ExecutionClassifier>(*ctx.chain, seed));
        break;
      }
      case 'H':
        ctx.classifiers.add(std::make_shared<HandoverClassifier>());
        break;
      default:
        throw std::invalid_argument("unknown classifier selector");
    }
  }
  return ctx;
}

int matched_mh_iterations(const FlowConfig& flow) { return 3 * flow.n_steps; }

static int success_curve_length(const MetricsReport& report) {
  std::size_t k = 0;
  for (const auto& r : report.runs) k = std::max(k, r.ranked_final_scores.size());
  return static_cast<int>(k);
}

std::vector<double> success_by_attempt(const MetricsReport& report, double tau) {
  const int max_k = success_curve_length(report);
  std::vector<double> curve(max_k, 0.0);
  if (report.runs.empty()) return curve;
  for (const auto& r : report.runs) {
    bool hit = false;
    for (int k = 0; k < max_k; ++k) {
      if (k < static_cast<int>(r.ranked_final_scores.size()) &&
          r.ranked_final_scores[k] > tau)
        hit = true;
      curve[k] += hit ? 1.0 : 0.0;
    }
  }
  for (auto& v : curve) v /= report.runs.size();
  return curve;
}

MetricsReport run_experiment(const ExperimentContext& ctx, bool write_outputs) {
  const ExperimentSpec& spec = ctx.spec;
  ctx.classifiers.require_nonempty();

  std::ofstream trace_stream;
  if (write_outputs) {
    std::filesystem::create_directories(spec.output_dir);
    trace_stream.open(spec.output_dir / "traces.jsonl");
    if (!trace_stream) throw std::runtime_error("cannot open trace output");
  }

  MetricsReport report;
  report.method = method_name(spec.method);
  report.threshold = spec.threshold;

  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    ctx.classifiers.reset_counts();

    SamplerConfig sampler = spec.sampler;
    sampler.seed = derive_seed(spec.sampler.seed, rep);
    std::vector<EulerGrasp> batch = to_euler_batch(sample_bbox(ctx.scene, sampler));

    // the top-k pre-selection the pipeline applies before refinement
    if (spec.top_k > 0 && spec.top_k < static_cast<int>(batch.size())) {
      std::vector<std::pair<double, std::size_t>> scored;
      scored.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i)
        scored.emplace_back(joint_product(ctx.classifiers, batch[i], ctx.scene), i);
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
      });
      std::vector<EulerGrasp> kept;
      for (int k = 0; k < spec.top_k; ++k) kept.push_back(batch[scored[k].second]);
      batch = std::move(kept);
    }

    std::vector<RefinementTrace> traces;
    const std::uint64_t method_seed = derive_seed(spec.flow.seed, rep);
    switch (spec.method) {
      case Method::Flow: {
        FlowConfig cfg = spec.flow;
        cfg.seed = method_seed;
        traces = refine_batch(batch, ctx.classifiers, ctx.scene, cfg);
        break;
      }
      case Method::Mh: {
        MHConfig cfg = spec.mh;
        cfg.seed = method_seed;
        traces = mh_refine_batch(batch, ctx.classifiers, ctx.scene, cfg);
        break;
      }
      case Method::MhV1:
      case Method::MhV2: {
        MHConfig cfg = spec.mh;
        cfg.seed = method_seed;
        cfg.n_steps = mh_variant_iterations(spec.method == Method::MhV1 ? MHVariant::MhV1
                                                                        : MHVariant::MhV2);
        traces = mh_refine_batch(batch, ctx.classifiers, ctx.scene, cfg);
        break;
      }
      case Method::None: {
        traces.reserve(batch.size());
        for (const auto& g : batch)
          traces.push_back(identity_trace(g, ctx.classifiers, ctx.scene));
        break;
      }
    }

    RunMetrics m;
    m.repetition = rep;
    m.eval_count = ctx.classifiers.total_eval_count();
    m.grad_count = ctx.classifiers.total_grad_count();
    for (const auto& c : ctx.classifiers.classifiers) m.classifier_names.push_back(c->name());
    m.initial_classifier_means.assign(m.classifier_names.size(), 0.0);
    m.final_classifier_means.assign(m.classifier_names.size(), 0.0);
    for (const auto& t : traces) {
      const TraceStep& first = t.steps.front();
      const TraceStep& last = t.steps.back();
      m.initial_mean_d += first.joint_score;
      m.final_mean_d += last.joint_score;
      for (std::size_t i = 0; i < m.classifier_names.size(); ++i) {
        m.initial_classifier_means[i] += first.per_classifier[i];
        m.final_classifier_means[i] += last.per_classifier[i];
      }
      if (first.joint_score > spec.threshold) ++m.initial_above;
      if (last.joint_score > spec.threshold) ++m.final_above;
      m.ranked_final_scores.push_back(last.joint_score);
    }
    const double n = static_cast<double>(traces.size());
    m.initial_mean_d /= n;
    m.final_mean_d /= n;
    for (auto& v : m.initial_classifier_means) v /= n;
    for (auto& v : m.final_classifier_means) v /= n;
    if (m.initial_above > 0)
      m.relative_improvement = static_cast<double>(m.final_above) / m.initial_above;
    else if (m.final_above > 0)
      m.relative_improvement = std::numeric_limits<double>::infinity();
    else
      m.relative_improvement = 1.0;  // nothing to improve, nothing improved
    std::sort(m.ranked_final_scores.begin(), m.ranked_final_scores.end(),
              std::greater<double>());

    if (write_outputs)
      for (std::size_t i = 0; i < traces.size(); ++i)
        write_trace(trace_stream, i, traces[i]);

    m.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.runs.push_back(std::move(m));
  }

  report.success_by_attempt = success_by_attempt(report, spec.threshold);

  if (write_outputs) {
    write_report(spec.output_dir / "report.txt", report);
    write_table(spec.output_dir / "table.csv", report);
  }
  return report;
}

std::vector<ComparisonRow> compare_methods(const std::vector<ExperimentSpec>& specs,
                                           bool budget_match) {
  if (specs.empty()) throw std::invalid_argument("no specs to compare");
  for (const auto& s : specs) {
    if (s.scene_file != specs.front().scene_file)
      throw std::invalid_argument("compared specs must share the scene file");
    if (s.sampler.seed != specs.front().sampler.seed ||
        s.sampler.n_samples != specs.front().sampler.n_samples)
      throw std::invalid_argument("compared specs must share the sampler and seed");
  }

  const FlowConfig* flow_ref = nullptr;
  for (const auto& s : specs)
    if (s.method == Method::Flow) {
      flow_ref = &s.flow;
      break;
    }

  std::vector<ComparisonRow> rows;
  auto add_row = [&](const ExperimentSpec& spec, const std::string& label) {
    const MetricsReport rep = run_experiment(spec, /*write_outputs=*/false);
    ComparisonRow row;
    row.label = label;
    row.mean_final_d = rep.mean_final_d();
    double ri = 0.0;
    for (const auto& r : rep.runs) ri += std::isfinite(r.relative_improvement)
                                             ? r.relative_improvement
                                             : static_cast<double>(r.final_above);
    row.relative_improvement = ri / rep.runs.size();
    row.wall_time_s = rep.total_wall_time_s();
    row.eval_count = rep.total_eval_count();
    for (const auto& r : rep.runs) row.grad_count += r.grad_count;
    rows.push_back(row);
  };

  for (const auto& spec : specs) add_row(spec, method_name(spec.method));
  if (budget_match && flow_ref) {
    const int iters = matched_mh_iterations(*flow_ref);
    for (const auto& spec : specs) {
      if (spec.method == Method::Mh || spec.method == Method::MhV1 ||
          spec.method == Method::MhV2) {
        ExperimentSpec matched = spec;
        matched.method = Method::Mh;
        matched.mh.n_steps = iters;
        add_row(matched, "mh@budget" + std::to_string(iters));
      }
    }
  }
  return rows;
}

void write_report(const std::filesystem::path& file, const MetricsReport& report) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open report file: " + file.string());
  os << "method: " << report.method << "\n";
  os << "threshold: " << format_double(report.threshold) << "\n";
  os << "repetitions: " << report.runs.size() << "\n";
  for (const auto& r : report.runs) {
    os << "run " << r.repetition << ":\n";
    os << "  initial_mean_D: " << format_double(r.initial_mean_d) << "\n";
    os << "  final_mean_D: " << format_double(r.final_mean_d) << "\n";
    for (std::size_t i = 0; i < r.classifier_names.size(); ++i) {
      os << "  initial_mean_" << r.classifier_names[i] << ": "
         << format_double(r.initial_classifier_means[i]) << "\n";
      os << "  final_mean_" << r.classifier_names[i] << ": "
         << format_double(r.final_classifier_means[i]) << "\n";
    }
    os << "  initial_above_threshold: " << r.initial_above << "\n";
    os << "  final_above_threshold: " << r.final_above << "\n";
    os << "  relative_improvement: " << format_double(r.relative_improvement) << "\n";
    os << "  classifier_evaluations: " << r.eval_count << "\n";
    os << "  classifier_gradients: " << r.grad_count << "\n";
    os << "  wall_time_s: " << format_double(r.wall_time_s) << "\n";
  }
  os << "success_by_attempt:";
  for (double v : report.success_by_attempt) os << " " << format_double(v);
  os << "\n";
}

void write_table(const std::filesystem::path& file, const MetricsReport& report) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open table file: " + file.string());
  os << "rep,initial_mean_D,final_mean_D,initial_above,final_above,"
        "relative_improvement,evaluations,gradients,wall_time_s\n";
  for (const auto& r : report.runs) {
    os << r.repetition << "," << format_double(r.initial_mean_d) << ","
       << format_double(r.final_mean_d) << "," << r.initial_above << "," << r.final_above
       << "," << format_double(r.relative_improvement) << "," << r.eval_count << ","
       << r.grad_count << "," << format_double(r.wall_time_s) << "\n";
  }
}

void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "method,mean_final_D,relative_improvement,evaluations,gradients,wall_time_s\n";
  for (const auto& r : rows) {
    os << r.label << "," << format_double(r.mean_final_d) << ","
       << format_double(r.relative_improvement) << "," << r.eval_count << ","
       << r.grad_count << "," << format_double(r.wall_time_s) << "\n";
  }
}

}  // namespace flowgrasp
