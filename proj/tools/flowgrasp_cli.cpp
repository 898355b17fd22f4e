#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "flowgrasp/harness.hpp"
#include "flowgrasp/oracle.hpp"

using namespace flowgrasp;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> threshold;
};

void apply(const Overrides& ov, ExperimentSpec& spec) {
  if (ov.seed) {
    spec.sampler.seed = *ov.seed;
    spec.flow.seed = derive_seed(*ov.seed, 1);
    spec.mh.seed = derive_seed(*ov.seed, 2);
  }
  if (ov.out_dir) spec.output_dir = *ov.out_dir;
  if (ov.threshold) spec.threshold = *ov.threshold;
}

int cmd_run(const std::string& spec_file, const Overrides& ov) {
  ExperimentSpec spec = load_experiment(spec_file);
  apply(ov, spec);
  const MetricsReport report = run_experiment(spec);
  std::cout << "method: " << report.method << "\n"
            << "mean_initial_D: " << format_double(report.mean_initial_d()) << "\n"
            << "mean_final_D: " << format_double(report.mean_final_d()) << "\n"
            << "evaluations: " << report.total_eval_count() << "\n"
            << "outputs: " << spec.output_dir.string() << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& spec_files, const Overrides& ov,
                bool budget_match) {
  std::vector<ExperimentSpec> specs;
  for (const auto& f : spec_files) {
    specs.push_back(load_experiment(f));
    apply(ov, specs.back());
  }
  const auto rows = compare_methods(specs, budget_match);
  write_comparison(std::cout, rows);
  if (ov.out_dir) {
    std::filesystem::create_directories(*ov.out_dir);
    std::ofstream os(std::filesystem::path(*ov.out_dir) / "comparison.csv");
    write_comparison(os, rows);
  }
  return 0;
}

// Toy flows checked against the grid-quadrature ground truth. `1d` targets
// p(x) ~ sigma(4 - x^2) on [-4, 4]; `2d` targets the radial analog on
// [-4, 4]^2. Reports TV at checkpoints {0, N/4, N/2, N}.
int cmd_oracle_check(const std::string& toy, std::uint64_t seed, int n_particles,
                     int n_steps, double eta, double gamma) {
  int dims;
  if (toy == "1d")
    dims = 1;
  else if (toy == "2d")
    dims = 2;
  else {
    std::cerr << "unknown toy '" << toy << "' (expected 1d or 2d)\n";
    return 2;
  }

  const auto score = [dims](const VecXd& x) {
    double r2 = 0.0;
    for (int a = 0; a < dims; ++a) r2 += x(a) * x(a);
    return 1.0 / (1.0 + std::exp(-(4.0 - r2)));
  };
  const GridDensity target =
      grid_target(score, [](const VecXd&) { return 1.0; },
                  VecXd::Constant(dims, -4.0), VecXd::Constant(dims, 4.0),
                  std::vector<int>(dims, 20));

  ClassifierSet set;
  set.add(std::make_shared<FunctionClassifier>(
      "toy",
      [dims](const EulerGrasp& g, const Scene&) {
        return logistic(4.0 - g.translation.head(dims).squaredNorm());
      },
      [dims](const EulerGrasp& g, const Scene&) {
        const double s = logistic(4.0 - g.translation.head(dims).squaredNorm());
        Vec6d grad = Vec6d::Zero();
        for (int a = 0; a < dims; ++a)
          grad(a) = s * (1.0 - s) * (-2.0 * g.translation(a));
        return grad;
      }));

  FlowConfig cfg;
  cfg.eta_trans = eta;
  cfg.eta_euler = eta;
  cfg.gamma = gamma;
  const Scene scene;

  Rng init(seed);
  std::vector<EulerGrasp> particles(n_particles);
  for (auto& p : particles)
    for (int a = 0; a < dims; ++a) p.translation(a) = init.uniform(-4.0, 4.0);
  std::vector<Rng> streams;
  streams.reserve(n_particles);
  for (int i = 0; i < n_particles; ++i) streams.push_back(Rng::substream(seed + 1, i));

  const auto tv_now = [&]() {
    std::vector<VecXd> xs;
    xs.reserve(n_particles);
    for (const auto& p : particles) {
      VecXd x(dims);
      for (int a = 0; a < dims; ++a) x(a) = p.translation(a);
      xs.push_back(std::move(x));
    }
    return tv_distance(xs, target);
  };

  std::vector<std::pair<int, double>> checkpoints;
  checkpoints.emplace_back(0, tv_now());
  for (int step = 1; step <= n_steps; ++step) {
    for (int i = 0; i < n_particles; ++i) {
      const TraceStep ts = euler_maruyama_step(particles[i], set, scene, cfg, streams[i]);
      particles[i] =
          EulerGrasp::from_vector(particles[i].as_vector() + ts.drift + ts.noise);
    }
    if (step == n_steps / 4 || step == n_steps / 2 || step == n_steps)
      checkpoints.emplace_back(step, tv_now());
  }

  bool monotone = true;
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    std::cout << "step " << checkpoints[i - 1].first << ": tv "
              << format_double(checkpoints[i - 1].second) << "\n";
    if (checkpoints[i].second >= checkpoints[i - 1].second) monotone = false;
  }
  std::cout << "step " << checkpoints.back().first << ": tv "
            << format_double(checkpoints.back().second) << "\n";
  const bool converged = checkpoints.back().second < 0.15;
  std::cout << (monotone && converged ? "PASS" : "FAIL") << " (monotone="
            << (monotone ? "yes" : "no") << ", final<0.15=" << (converged ? "yes" : "no")
            << ")\n";
  return monotone && converged ? 0 : 1;
}

// Finite-difference audit of every bundled classifier on its natural scene.
int cmd_gradcheck(std::uint64_t seed, int n_poses) {
  Scene scene;
  scene.add("ball", Primitive::sphere(0.05, GraspPose({0.45, 0.0, 0.35}, Quatd::Identity())));
  scene.has_handover_target = true;
  scene.handover_target = Vec3d(0.2, 0.4, 0.5);

  std::vector<ClassifierPtr> classifiers;
  classifiers.push_back(std::make_shared<StabilityClassifier>(GripperModel::default_model()));
  classifiers.push_back(std::make_shared<HandoverClassifier>());
  classifiers.push_back(std::make_shared<ExecutionClassifier>(
      make_planar_2r(), (JointConfig(2) << 0.3, 1.2).finished()));

  Rng rng(seed);
  bool all_ok = true;
  for (const auto& cls : classifiers) {
    double worst = 0.0;
    int checked = 0;
    while (checked < n_poses) {
      EulerGrasp g;
      g.translation << rng.uniform(-0.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 1.0);
      g.euler << rng.uniform(-1.5, 1.5), rng.uniform(-1.4, 1.4), rng.uniform(-1.5, 1.5);
      const double p = cls->evaluate(g, scene);
      if (p <= 2.0 * kProbEps || p >= 1.0 - 2.0 * kProbEps) continue;  // saturated
      // skip poses where h and 2h central differences disagree at the
      // tolerance scale: the difference quotient has not converged there
      const Vec6d b = fd_pose_gradient(
          [&](const EulerGrasp& x) { return cls->evaluate(x, scene); }, g);
      const Vec6d b2 = fd_pose_gradient(
          [&](const EulerGrasp& x) { return cls->evaluate(x, scene); }, g, 2e-6);
      const double tol = std::max(1e-4 * b.norm(), 1e-6);
      if ((b - b2).norm() > 0.5 * tol) continue;
      const Vec6d a = cls->gradient(g, scene);
      const double abs_err = (a - b).norm();
      const double rel = abs_err / std::max(b.norm(), 1e-12);
      if (abs_err > tol) all_ok = false;
      worst = std::max(worst, b.norm() < 1e-6 ? abs_err : rel);
      ++checked;
    }
    std::cout << cls->name() << ": worst error " << format_double(worst) << " over "
              << n_poses << " poses\n";
  }
  std::cout << (all_ok ? "PASS" : "FAIL") << "\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasp refinement by classifier-driven gradient flow"};
  app.require_subcommand(1);

  Overrides ov;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir;
  bool has_out = false;
  double threshold = 0.5;
  bool has_threshold = false;
  bool budget_match = false;

  std::string run_spec;
  auto* run = app.add_subcommand("run", "run one experiment spec");
  run->add_option("spec-file", run_spec, "experiment spec file")->required();

  std::vector<std::string> compare_specs;
  auto* compare = app.add_subcommand("compare", "run and tabulate several specs");
  compare->add_option("spec-file", compare_specs, "experiment spec files")->required();
  compare->add_flag("--budget-match", budget_match,
                    "re-run MH methods at the flow evaluation budget");

  std::string toy;
  int particles = 10000, steps = 2000;
  double eta = 1e-3, gamma = 1e-2;
  auto* oracle = app.add_subcommand("oracle-check", "flow vs grid-quadrature ground truth");
  oracle->add_option("toy-name", toy, "toy problem: 1d or 2d")->required();
  oracle->add_option("--particles", particles, "refined sample count");
  oracle->add_option("--steps", steps, "flow steps");
  oracle->add_option("--eta", eta, "step size");
  oracle->add_option("--gamma", gamma, "noise temperature");

  int poses = 1000;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--poses", poses, "poses per classifier");

  for (auto* sub : {run, compare, oracle, gradcheck}) {
    sub->add_option("--seed", seed, "override all seeds")->each([&](const std::string&) {
      has_seed = true;
    });
  }
  for (auto* sub : {run, compare}) {
    sub->add_option("--out-dir", out_dir, "override the output directory")
        ->each([&](const std::string&) { has_out = true; });
    sub->add_option("--threshold", threshold, "override the success threshold")
        ->each([&](const std::string&) { has_threshold = true; });
  }

  CLI11_PARSE(app, argc, argv);
  if (has_seed) ov.seed = seed;
  if (has_out) ov.out_dir = out_dir;
  if (has_threshold) ov.threshold = threshold;

  try {
    if (app.got_subcommand(run)) return cmd_run(run_spec, ov);
    if (app.got_subcommand(compare)) return cmd_compare(compare_specs, ov, budget_match);
    if (app.got_subcommand(oracle))
      return cmd_oracle_check(toy, has_seed ? seed : 0, particles, steps, eta, gamma);
    if (app.got_subcommand(gradcheck)) return cmd_gradcheck(has_seed ? seed : 0, poses);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
