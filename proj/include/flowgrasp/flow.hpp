#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flowgrasp/classifiers.hpp"
#include "flowgrasp/rng.hpp"

namespace flowgrasp {

// f'(r) for f(r) = r log r (the KL member).
inline double kl_f_prime(double r) { return std::log(r) + 1.0; }

// f'(r) = log(r / (1 + r)) for the logD divergence from the refinement-flows
// literature.
inline double logd_f_prime(double r) { return std::log(r / (1.0 + r)); }

struct FDivergence {
  std::string name;
  double (*f_prime)(double r);
  double (*f_double_prime)(double r);

  static FDivergence kl() {
    return {"KL", &kl_f_prime, [](double r) { return 1.0 / r; }};
  }
  static FDivergence logd() {
    return {"logD", &logd_f_prime, [](double r) { return 1.0 / (r * (1.0 + r)); }};
  }
  static FDivergence by_name(const std::string& n) {
    if (n == "KL" || n == "kl") return kl();
    if (n == "logD" || n == "logd") return logd();
    throw std::invalid_argument("unknown divergence: " + n);
  }
};

// Drift assembly: `LogScore` follows the refinement pseudocode
// (+eta * grad sum_i log p_i); `FullFPrime` differentiates f' of the
// classifier density ratio.
enum class DriftMode { LogScore, FullFPrime };

struct FlowConfig {
  int n_steps = 50;
  double eta_trans = 1e-5;
  double eta_euler = 1e-4;
  double gamma = 1e-4;
  FDivergence divergence = FDivergence::kl();
  DriftMode drift_mode = DriftMode::LogScore;
  std::uint64_t seed = 0;
  ClassifierPtr corrector;  // optional base-sampler discriminator

  void validate() const {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    if (!(eta_trans > 0.0) || !(eta_euler > 0.0))
      throw std::invalid_argument("step sizes must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  }

  Vec6d eta_vector() const {
    Vec6d eta;
    eta << eta_trans, eta_trans, eta_trans, eta_euler, eta_euler, eta_euler;
    return eta;
  }
};

struct TraceStep {
  int step = 0;
  EulerGrasp grasp;
  double joint_score = 0.0;               // D = prod_i p_i
  std::vector<double> per_classifier;
  Vec6d drift = Vec6d::Zero();            // applied to reach the next state
  Vec6d noise = Vec6d::Zero();
  bool flagged = false;                   // non-finite drift, step skipped
  bool accepted = true;                   // MH bookkeeping; always true for flow
};

struct RefinementTrace {
  std::vector<TraceStep> steps;

  const EulerGrasp& final_grasp() const { return steps.back().grasp; }
  GraspPose final_pose() const { return to_pose(steps.back().grasp); }
  double final_score() const { return steps.back().joint_score; }
  double initial_score() const { return steps.front().joint_score; }
};

namespace detail {

inline Vec6d flow_drift(const ClassifierSet& set, const EulerGrasp& g, const Scene& scene,
                        const FlowConfig& cfg, const JointScore& js) {
  const Vec6d eta = cfg.eta_vector();
  if (cfg.drift_mode == DriftMode::LogScore) {
    return eta.cwiseProduct(js.gradient);
  }
  // d/dg f'(r(g)) = f''(r) * dr/dg with r = (1-D)/D (optionally corrected);
  // dr/dg = -gradD / D^2 and gradD = D * grad log D.
  const double d = js.product;
  double r = (1.0 - d) / d;
  double corr = 1.0;
  if (cfg.corrector) {
    const double pd = cfg.corrector->evaluate(g, scene);
    corr = pd / (1.0 - pd);
    r *= corr;
  }
  const Vec6d grad_d = d * js.gradient;
  const Vec6d grad_r = corr * (-grad_d / (d * d));
  return -eta.cwiseProduct(cfg.divergence.f_double_prime(r) * grad_r);
}

}  // namespace detail

// One Euler-Maruyama update g' = g + drift + sqrt(2 gamma eta) xi with
// per-block step sizes. A non-finite drift leaves the grasp unchanged and
// flags the step.
inline TraceStep euler_maruyama_step(const EulerGrasp& g, const ClassifierSet& set,
                                     const Scene& scene, const FlowConfig& cfg, Rng& rng) {
  const JointScore js = joint_log_score(set, g, scene);
  TraceStep out;
  out.grasp = g;
  out.joint_score = js.product;
  out.per_classifier = js.per_classifier;
  const Vec6d eta = cfg.eta_vector();
  for (int i = 0; i < 6; ++i)
    out.noise(i) = std::sqrt(2.0 * cfg.gamma * eta(i)) * rng.normal();
  const Vec6d drift = detail::flow_drift(set, g, scene, cfg, js);
  if (!drift.allFinite()) {
    out.flagged = true;
    out.drift = Vec6d::Zero();
    out.noise = Vec6d::Zero();
    return out;
  }
  out.drift = drift;
  return out;
}

inline RefinementTrace refine(const EulerGrasp& g0, const ClassifierSet& set,
                              const Scene& scene, const FlowConfig& cfg, Rng rng) {
  cfg.validate();
  set.require_nonempty();
  RefinementTrace trace;
  trace.steps.reserve(cfg.n_steps + 1);
  EulerGrasp g = g0;
  for (int n = 0; n < cfg.n_steps; ++n) {
    TraceStep step = euler_maruyama_step(g, set, scene, cfg, rng);
    step.step = n;
    const Vec6d next = step.flagged
                           ? step.grasp.as_vector()
                           : step.grasp.as_vector() + step.drift + step.noise;
    trace.steps.push_back(std::move(step));
    g = EulerGrasp::from_vector(next);
  }
  // closing entry: final grasp with its score, no update and no gradient
  TraceStep last;
  last.step = cfg.n_steps;
  last.grasp = g;
  double product = 1.0;
  for (const auto& c : set.classifiers) {
    const double p = c->evaluate(g, scene);
    last.per_classifier.push_back(p);
    product *= p;
  }
  last.joint_score = clamp_prob(product);
  trace.steps.push_back(std::move(last));
  return trace;
}

inline RefinementTrace refine(const EulerGrasp& g0, const ClassifierSet& set,
                              const Scene& scene, const FlowConfig& cfg) {
  return refine(g0, set, scene, cfg, Rng(cfg.seed));
}

// Element-wise refinement with independent RNG substreams; results do not
// depend on the worker count.
inline std::vector<RefinementTrace> refine_batch(const std::vector<EulerGrasp>& grasps,
                                                 const ClassifierSet& set, const Scene& scene,
                                                 const FlowConfig& cfg, int n_workers = 1) {
  if (grasps.empty()) throw std::invalid_argument("empty batch");
  std::vector<RefinementTrace> traces(grasps.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      traces[i] = refine(grasps[i], set, scene, cfg, Rng::substream(cfg.seed, i));
  };
  if (n_workers <= 1) {
    work(0, grasps.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (grasps.size() + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      const std::size_t b = std::min(grasps.size(), w * chunk);
      const std::size_t e = std::min(grasps.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return traces;
}

}  // namespace flowgrasp
