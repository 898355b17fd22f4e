#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowgrasp/flow.hpp"

namespace flowgrasp {

struct MHConfig {
  int n_steps = 135;
  double c_trans = 0.005;  // proposal scale, meters
  double c_euler = 0.02;   // proposal scale, radians
  std::uint64_t seed = 0;

  void validate() const {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(c_trans > 0.0) || !(c_euler > 0.0))
      throw std::invalid_argument("proposal scales must be > 0");
  }

  Vec6d scale_vector() const {
    Vec6d s;
    s << c_trans, c_trans, c_trans, c_euler, c_euler, c_euler;
    return s;
  }
};

// Metropolis-Hastings refinement: uniform box proposals, acceptance ratio
// D(candidate) / D(current) on the joint classifier product. Gradients are
// never evaluated.
inline RefinementTrace mh_refine(const EulerGrasp& g0, const ClassifierSet& set,
                                 const Scene& scene, const MHConfig& cfg, Rng rng) {
  cfg.validate();
  set.require_nonempty();
  auto product_score = [&](const EulerGrasp& g, std::vector<double>& per) {
    per.clear();
    double d = 1.0;
    for (const auto& c : set.classifiers) {
      const double p = c->evaluate(g, scene);
      per.push_back(p);
      d *= p;
    }
    return clamp_prob(d);
  };

  const Vec6d scale = cfg.scale_vector();
  RefinementTrace trace;
  trace.steps.reserve(cfg.n_steps + 1);
  EulerGrasp g = g0;
  std::vector<double> per, cand_per;
  double score = product_score(g, per);
  for (int n = 0; n < cfg.n_steps; ++n) {
    Vec6d delta;
    for (int i = 0; i < 6; ++i) delta(i) = scale(i) * rng.uniform(-1.0, 1.0);
    const EulerGrasp candidate = EulerGrasp::from_vector(g.as_vector() + delta);
    const double cand_score = product_score(candidate, cand_per);
    const double alpha = cand_score / score;
    const double u = rng.uniform01();
    TraceStep step;
    step.step = n;
    step.grasp = g;
    step.joint_score = score;
    step.per_classifier = per;
    step.accepted = u <= alpha;
    if (step.accepted) {
      step.drift = delta;  // realized move
      g = candidate;
      score = cand_score;
      per = cand_per;
    }
    trace.steps.push_back(std::move(step));
  }
  TraceStep last;
  last.step = cfg.n_steps;
  last.grasp = g;
  last.joint_score = score;
  last.per_classifier = per;
  trace.steps.push_back(std::move(last));
  return trace;
}

inline RefinementTrace mh_refine(const EulerGrasp& g0, const ClassifierSet& set,
                                 const Scene& scene, const MHConfig& cfg) {
  return mh_refine(g0, set, scene, cfg, Rng(cfg.seed));
}

inline std::vector<RefinementTrace> mh_refine_batch(const std::vector<EulerGrasp>& grasps,
                                                    const ClassifierSet& set,
                                                    const Scene& scene, const MHConfig& cfg) {
  if (grasps.empty()) throw std::invalid_argument("empty batch");
  std::vector<RefinementTrace> traces(grasps.size());
  for (std::size_t i = 0; i < grasps.size(); ++i)
    traces[i] = mh_refine(grasps[i], set, scene, cfg, Rng::substream(cfg.seed, i));
  return traces;
}

enum class MHVariant { Mh, MhV1, MhV2 };

inline MHVariant mh_variant_by_name(const std::string& n) {
  if (n == "mh") return MHVariant::Mh;
  if (n == "mh_v1") return MHVariant::MhV1;
  if (n == "mh_v2") return MHVariant::MhV2;
  throw std::invalid_argument("unknown MH variant: " + n);
}

// Reference batch sizes and iteration counts, scaled down by `scale_divisor`
// for desk-size runs: mh = 5000 x 135, mh_v1 = 20000 x 135, mh_v2 = 5000 x 500.
inline int mh_variant_iterations(MHVariant v) {
  switch (v) {
    case MHVariant::Mh:
    case MHVariant::MhV1:
      return 135;
    case MHVariant::MhV2:
      return 500;
  }
  return 135;
}

inline int mh_variant_batch(MHVariant v, int scale_divisor = 50) {
  const int base = v == MHVariant::MhV1 ? 20000 : 5000;
  return std::max(1, base / scale_divisor);
}

struct MHVariantResult {
  std::vector<RefinementTrace> traces;
  // For mh_v1: indices of the top quartile ranked by final D.
  std::vector<std::size_t> top_quartile;
};

inline MHVariantResult mh_variant(MHVariant kind, const std::vector<EulerGrasp>& batch,
                                  const ClassifierSet& set, const Scene& scene,
                                  MHConfig cfg) {
  cfg.n_steps = mh_variant_iterations(kind);
  MHVariantResult out;
  out.traces = mh_refine_batch(batch, set, scene, cfg);
  if (kind == MHVariant::MhV1) {
    std::vector<std::size_t> idx(out.traces.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return out.traces[a].final_score() > out.traces[b].final_score();
    });
    idx.resize(std::max<std::size_t>(1, idx.size() / 4));
    out.top_quartile = std::move(idx);
  }
  return out;
}

}  // namespace flowgrasp
