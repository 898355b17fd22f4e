#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowgrasp/kinematics.hpp"
#include "flowgrasp/sdf.hpp"

namespace flowgrasp {

template <typename T>
T logistic(const T& z) {
  using flowgrasp::exp;
  using std::exp;
  if (value_of(z) >= 0.0) {
    const T e = exp(-z);
    return T(1.0) / (T(1.0) + e);
  }
  const T e = exp(z);
  return e / (T(1.0) + e);
}

// Central finite differences of a scalar function of the 6 pose coordinates.
inline Vec6d fd_pose_gradient(const std::function<double(const EulerGrasp&)>& fn,
                              const EulerGrasp& g, double h = 1e-6) {
  Vec6d grad;
  const Vec6d x = g.as_vector();
  for (int i = 0; i < 6; ++i) {
    Vec6d hi = x, lo = x;
    hi(i) += h;
    lo(i) -= h;
    grad(i) = (fn(EulerGrasp::from_vector(hi)) - fn(EulerGrasp::from_vector(lo))) / (2.0 * h);
  }
  return grad;
}

// Differentiable grasp-quality score p(c=1 | g, o) with gradient in the
// refinement coordinates (translation, intrinsic XYZ Euler angles).
// Evaluation is pure; the call counters exist for budget accounting.
class ContextClassifier {
 public:
  explicit ContextClassifier(std::string name) : name_(std::move(name)) {}
  virtual ~ContextClassifier() = default;

  const std::string& name() const { return name_; }

  double evaluate(const EulerGrasp& g, const Scene& scene) const {
    eval_count_.fetch_add(1, std::memory_order_relaxed);
    return clamp_prob(evaluate_impl(g, scene));
  }

  Vec6d gradient(const EulerGrasp& g, const Scene& scene) const {
    grad_count_.fetch_add(1, std::memory_order_relaxed);
    return gradient_impl(g, scene);
  }

  std::uint64_t eval_count() const { return eval_count_.load(std::memory_order_relaxed); }
  std::uint64_t grad_count() const { return grad_count_.load(std::memory_order_relaxed); }
  void reset_counts() const {
    eval_count_.store(0, std::memory_order_relaxed);
    grad_count_.store(0, std::memory_order_relaxed);
  }

 protected:
  virtual double evaluate_impl(const EulerGrasp& g, const Scene& scene) const = 0;
  virtual Vec6d gradient_impl(const EulerGrasp& g, const Scene& scene) const = 0;

 private:
  std::string name_;
  mutable std::atomic<std::uint64_t> eval_count_{0};
  mutable std::atomic<std::uint64_t> grad_count_{0};
};

using ClassifierPtr = std::shared_ptr<const ContextClassifier>;

// Parallel-jaw gripper geometry. The grasp frame has the approach axis
// along +z and the closing axis along +x; fingers sit at +-separation/2.
struct GripperModel {
  double finger_separation = 0.08;
  double finger_length = 0.05;
  double closing_offset = 0.10;  // grasp origin -> closing-region center, along +z
  std::vector<Vec3d> body_control_points;  // grasp frame, meters

  static GripperModel default_model() {
    GripperModel g;
    g.body_control_points = {
        {0.0, 0.0, 0.0},
        {0.04, 0.0, 0.02},
        {-0.04, 0.0, 0.02},
        {0.04, 0.0, 0.05},
        {-0.04, 0.0, 0.05},
    };
    return g;
  }
};

// Analytic stability surrogate: product of no-collision, closing-volume and
// antipodal-alignment logistic factors evaluated on exact primitive SDFs.
class StabilityClassifier final : public ContextClassifier {
 public:
  explicit StabilityClassifier(GripperModel gripper, double k_collision = 200.0,
                               double k_closure = 200.0, double k_antipodal = 10.0,
                               double cos_threshold = 0.85)
      : ContextClassifier("stability"),
        gripper_(std::move(gripper)),
        k_collision_(k_collision),
        k_closure_(k_closure),
        k_antipodal_(k_antipodal),
        cos_threshold_(cos_threshold) {}

  template <typename T>
  T score(const EulerGraspT<T>& g, const Scene& scene) const {
    using flowgrasp::abs;
    using std::abs;
    if (scene.objects.empty()) throw std::invalid_argument("scene has no objects");
    const Mat3<T> rot = euler_to_rotation(g.euler);
    auto world = [&](const Vec3d& local) -> Vec3<T> {
      Vec3<T> p;
      for (int i = 0; i < 3; ++i) {
        p(i) = g.translation(i);
        for (int j = 0; j < 3; ++j) p(i) += rot(i, j) * T(local(j));
      }
      return p;
    };

    // (a) no body control point inside an object
    T min_sdf(std::numeric_limits<double>::infinity());
    for (const auto& cp : gripper_.body_control_points) {
      const T d = scene_sdf(scene, world(cp));
      if (value_of(d) < value_of(min_sdf)) min_sdf = d;
    }
    const T collision = logistic(T(k_collision_) * min_sdf);

    // (b) object material between the fingers
    const Vec3<T> closing_center = world({0.0, 0.0, gripper_.closing_offset});
    const T closure = logistic(T(-k_closure_) * scene_sdf(scene, closing_center));

    // (c) antipodal alignment of the closing axis with the surface normal
    Vec3<T> axis;
    for (int i = 0; i < 3; ++i) axis(i) = rot(i, 0);
    T antipodal(0.0);
    const double half = 0.5 * gripper_.finger_separation;
    for (const double side : {half, -half}) {
      const Vec3<T> proxy = world({side, 0.0, gripper_.closing_offset});
      const Vec3<T> n = scene_sdf_gradient(scene, proxy);
      T align(0.0);
      for (int i = 0; i < 3; ++i) align += axis(i) * n(i);
      antipodal += T(0.5) * logistic(T(k_antipodal_) * (abs(align) - T(cos_threshold_)));
    }
    return collision * closure * antipodal;
  }

 protected:
  double evaluate_impl(const EulerGrasp& g, const Scene& scene) const override {
    return score(g, scene);
  }
  Vec6d gradient_impl(const EulerGrasp& g, const Scene& scene) const override {
    const Dual6 s = score(seed_grasp(g), scene);
    // gradient of the clamped score: zero in the saturated regions
    if (s.v <= kProbEps || s.v >= 1.0 - kProbEps) return Vec6d::Zero();
    return s.d;
  }

 private:
  GripperModel gripper_;
  double k_collision_, k_closure_, k_antipodal_, cos_threshold_;
};

// Handover score sigma(C' (d^2 - p_th^2)): larger away from the target
// centroid. The verbatim variant compares d^2 against p_th directly.
class HandoverClassifier final : public ContextClassifier {
 public:
  explicit HandoverClassifier(double p_threshold = 0.04, double scale = 10.0,
                              double transition_width = 0.01, bool verbatim_units = false)
      : ContextClassifier("handover"),
        p_threshold_(p_threshold),
        scale_(scale),
        verbatim_units_(verbatim_units) {
    // choose C' so the logistic transitions over ~transition_width around p_th
    effective_scale_ = scale_ / (2.0 * p_threshold_ * transition_width);
  }

  template <typename T>
  T score(const EulerGraspT<T>& g, const Scene& scene) const {
    if (!scene.has_handover_target)
      throw std::invalid_argument("scene has no handover target centroid");
    T d2(0.0);
    for (int i = 0; i < 3; ++i) {
      const T diff = g.translation(i) - T(scene.handover_target(i));
      d2 += diff * diff;
    }
    if (verbatim_units_) return logistic(T(scale_) * (d2 - T(p_threshold_)));
    return logistic(T(effective_scale_) * (d2 - T(p_threshold_ * p_threshold_)));
  }

 protected:
  double evaluate_impl(const EulerGrasp& g, const Scene& scene) const override {
    return score(g, scene);
  }
  Vec6d gradient_impl(const EulerGrasp& g, const Scene& scene) const override {
    const Dual6 s = score(seed_grasp(g), scene);
    if (s.v <= kProbEps || s.v >= 1.0 - kProbEps) return Vec6d::Zero();
    return s.d;
  }

 private:
  double p_threshold_, scale_, effective_scale_;
  bool verbatim_units_;
};

// Executability score sigma(C (omega(theta) - omega_th)) with theta from
// damped least-squares IK; unreachable targets use the best-effort config.
// Gradients run forward-mode duals through the IK iteration and fall back to
// finite differences when the two disagree by more than 10%.
class ExecutionClassifier final : public ContextClassifier {
 public:
  ExecutionClassifier(KinematicChain chain, JointConfig ik_seed, double scale = 100.0,
                      double omega_threshold = 0.04)
      : ContextClassifier("execution"),
        chain_(std::move(chain)),
        ik_seed_(std::move(ik_seed)),
        scale_(scale),
        omega_threshold_(omega_threshold) {
    chain_.validate();
    if (ik_seed_.size() != chain_.dof())
      throw std::invalid_argument("ik seed dimension mismatch");
  }

  template <typename T>
  T score(const EulerGraspT<T>& g, const Scene&) const {
    const Mat3<T> rot = euler_to_rotation(g.euler);
    VecX<T> seed(chain_.dof());
    for (int i = 0; i < chain_.dof(); ++i) seed(i) = T(ik_seed_(i));
    const auto ik = inverse_kinematics<T>(chain_, g.translation, rot, seed);
    const T omega = manipulability_volume(chain_, ik.config);
    return logistic(T(scale_) * (omega - T(omega_threshold_)));
  }

  std::uint64_t fd_fallback_count() const {
    return fd_fallbacks_.load(std::memory_order_relaxed);
  }

  const KinematicChain& chain() const { return chain_; }

 protected:
  double evaluate_impl(const EulerGrasp& g, const Scene& scene) const override {
    return score(g, scene);
  }

  Vec6d gradient_impl(const EulerGrasp& g, const Scene& scene) const override {
    const Dual6 s = score(seed_grasp(g), scene);
    if (s.v <= kProbEps || s.v >= 1.0 - kProbEps) return Vec6d::Zero();
    const Vec6d dual_grad = s.d;
    const Vec6d fd_grad = fd_pose_gradient(
        [&](const EulerGrasp& x) { return clamp_prob(score(x, scene)); }, g);
    const double denom = std::max(fd_grad.norm(), 1e-8);
    if ((dual_grad - fd_grad).norm() / denom > 0.1) {
      // near reachability boundaries the IK iteration is not locally smooth
      fd_fallbacks_.fetch_add(1, std::memory_order_relaxed);
      return fd_grad;
    }
    return dual_grad;
  }

 private:
  KinematicChain chain_;
  JointConfig ik_seed_;
  double scale_, omega_threshold_;
  mutable std::atomic<std::uint64_t> fd_fallbacks_{0};
};

// Wraps arbitrary scalar functions as a classifier; gradients by central
// differences unless an analytic gradient is supplied. Used by toy problems
// and tests.
class FunctionClassifier final : public ContextClassifier {
 public:
  using EvalFn = std::function<double(const EulerGrasp&, const Scene&)>;
  using GradFn = std::function<Vec6d(const EulerGrasp&, const Scene&)>;

  FunctionClassifier(std::string name, EvalFn eval, GradFn grad = nullptr)
      : ContextClassifier(std::move(name)), eval_(std::move(eval)), grad_(std::move(grad)) {}

 protected:
  double evaluate_impl(const EulerGrasp& g, const Scene& scene) const override {
    return eval_(g, scene);
  }
  Vec6d gradient_impl(const EulerGrasp& g, const Scene& scene) const override {
    if (grad_) return grad_(g, scene);
    return fd_pose_gradient(
        [&](const EulerGrasp& x) { return clamp_prob(eval_(x, scene)); }, g);
  }

 private:
  EvalFn eval_;
  GradFn grad_;
};

struct ClassifierSet {
  std::vector<ClassifierPtr> classifiers;

  void add(ClassifierPtr c) {
    for (const auto& existing : classifiers)
      if (existing->name() == c->name())
        throw std::invalid_argument("duplicate classifier name: " + c->name());
    classifiers.push_back(std::move(c));
  }

  void require_nonempty() const {
    if (classifiers.empty()) throw std::invalid_argument("classifier set is empty");
  }

  std::uint64_t total_eval_count() const {
    std::uint64_t n = 0;
    for (const auto& c : classifiers) n += c->eval_count();
    return n;
  }
  std::uint64_t total_grad_count() const {
    std::uint64_t n = 0;
    for (const auto& c : classifiers) n += c->grad_count();
    return n;
  }
  void reset_counts() const {
    for (const auto& c : classifiers) c->reset_counts();
  }
};

struct JointScore {
  double log_score = 0.0;   // sum_i log p_i
  Vec6d gradient = Vec6d::Zero();
  double product = 1.0;     // D = prod_i p_i (clamped)
  std::vector<double> per_classifier;
};

inline JointScore joint_log_score(const ClassifierSet& set, const EulerGrasp& g,
                                  const Scene& scene) {
  set.require_nonempty();
  JointScore out;
  double product = 1.0;
  for (const auto& c : set.classifiers) {
    const double p = c->evaluate(g, scene);
    const Vec6d grad_p = c->gradient(g, scene);
    out.per_classifier.push_back(p);
    out.log_score += std::log(p);
    out.gradient += grad_p / p;
    product *= p;
  }
  out.product = clamp_prob(product);
  return out;
}

// (1 - D) / D with D the clamped classifier product.
inline double density_ratio(const ClassifierSet& set, const EulerGrasp& g,
                            const Scene& scene) {
  set.require_nonempty();
  double product = 1.0;
  for (const auto& c : set.classifiers) product *= c->evaluate(g, scene);
  const double d = clamp_prob(product);
  return (1.0 - d) / d;
}

// Corrector: multiply the ratio by the odds of the base-vs-training
// discriminator, q/p = (q/p_hat)(p_hat/p).
inline double corrector_ratio(const ContextClassifier& base_disc, const ClassifierSet& set,
                              const EulerGrasp& g, const Scene& scene) {
  const double pd = clamp_prob(base_disc.evaluate(g, scene));
  return pd / (1.0 - pd) * density_ratio(set, g, scene);
}

}  // namespace flowgrasp
