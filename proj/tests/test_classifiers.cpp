#include <doctest.h>

#include "flowgrasp/classifiers.hpp"
#include "flowgrasp/rng.hpp"

using namespace flowgrasp;

namespace {

Scene sphere_scene() {
  Scene s;
  s.add("ball", Primitive::sphere(0.05));
  return s;
}

Scene handover_scene() {
  Scene s = sphere_scene();
  s.has_handover_target = true;
  s.handover_target = Vec3d(0.5, 0.0, 0.3);
  return s;
}

EulerGrasp grasp_at(double x, double y, double z) {
  EulerGrasp g;
  g.translation << x, y, z;
  return g;
}

}  // namespace

TEST_CASE("overflow-safe logistic") {
  CHECK(logistic(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(logistic(-4.0) == doctest::Approx(0.01798620996209156).epsilon(1e-12));
  CHECK(logistic(4.0) == doctest::Approx(1.0 - 0.01798620996209156).epsilon(1e-12));
  CHECK(logistic(1000.0) == 1.0);
  // deep saturation underflows cleanly to 0/1; evaluate() clamps afterwards
  CHECK(logistic(-1000.0) == 0.0);
  CHECK(std::isfinite(logistic(710.0)));  // no overflow in exp
}

TEST_CASE("stability score on a centered sphere grasp") {
  const Scene scene = sphere_scene();
  StabilityClassifier cls(GripperModel::default_model());
  // closing region centered on the ball: approach along +z from below
  const EulerGrasp g = grasp_at(0.0, 0.0, -0.10);
  const double p = cls.evaluate(g, scene);
  // factors: collision sigma(200 * 0.0140312) * closure sigma(10) * antipodal sigma(1.5)
  CHECK(p == doctest::Approx(0.7709479885117543).epsilon(1e-9));
  CHECK(p > 0.7);

  // far from the object the closure factor collapses
  CHECK(cls.evaluate(grasp_at(1.0, 0.0, 0.0), scene) < 1e-3);
}

TEST_CASE("stability gradient pulls toward the object") {
  const Scene scene = sphere_scene();
  StabilityClassifier cls(GripperModel::default_model());
  // slightly short of center: increasing z moves the closing region deeper
  const EulerGrasp g = grasp_at(0.0, 0.0, -0.12);
  const Vec6d grad = cls.gradient(g, scene);
  CHECK(grad(2) > 0.0);
}

TEST_CASE("handover score geometry") {
  const Scene scene = handover_scene();
  HandoverClassifier cls;
  // exactly at the threshold distance: midpoint of the logistic
  CHECK(cls.evaluate(grasp_at(0.5 + 0.04, 0.0, 0.3), scene) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // at the target centroid: floor clamp
  CHECK(cls.evaluate(grasp_at(0.5, 0.0, 0.3), scene) == kProbEps);
  // clear of the threshold
  CHECK(cls.evaluate(grasp_at(0.5 + 0.05, 0.0, 0.3), scene) ==
        doctest::Approx(0.9999869928715335).epsilon(1e-9));
  // monotone in distance along a ray
  double prev = 0.0;
  for (double d = 0.0; d <= 0.12; d += 0.005) {
    const double p = cls.evaluate(grasp_at(0.5 + d, 0.0, 0.3), scene);
    CHECK(p >= prev);
    prev = p;
  }
  // rotation does not enter
  EulerGrasp g = grasp_at(0.55, 0.01, 0.31);
  const double p0 = cls.evaluate(g, scene);
  g.euler << 0.7, -0.3, 1.2;
  CHECK(cls.evaluate(g, scene) == p0);
  CHECK(cls.gradient(g, scene).tail<3>().norm() == 0.0);
}

TEST_CASE("handover requires a target centroid") {
  HandoverClassifier cls;
  CHECK_THROWS_AS(cls.evaluate(grasp_at(0.0, 0.0, 0.0), sphere_scene()),
                  std::invalid_argument);
}

TEST_CASE("execution score tracks manipulability on the planar arm") {
  Scene scene = sphere_scene();
  const KinematicChain arm = make_planar_2r();
  ExecutionClassifier cls(arm, (JointConfig(2) << 0.3, 1.2).finished());
  auto grasp_for = [&](double q1, double q2) {
    return from_pose(forward_kinematics(arm, (JointConfig(2) << q1, q2).finished()));
  };
  // well-conditioned target: elbow strongly bent, omega = |sin 1.2| = 0.932
  const double good = cls.evaluate(grasp_for(0.3, 1.2), scene);
  // nearly stretched target: omega = |sin 0.005| = 0.005 << 0.04
  const double bad = cls.evaluate(grasp_for(0.2, 0.005), scene);
  CHECK(good > 0.9);
  CHECK(bad < 0.05);
}

TEST_CASE("dual-number gradients match finite differences") {
  const Scene scene = handover_scene();
  StabilityClassifier stab(GripperModel::default_model());
  HandoverClassifier hand;
  Rng rng(21);
  int checked = 0;
  auto check_one = [&](const ContextClassifier& cls, const EulerGrasp& g) {
    const double p = cls.evaluate(g, scene);
    if (p <= 1e-5 || p >= 1.0 - 1e-5) return;  // saturated: gradient defined as zero
    const Vec6d a = cls.gradient(g, scene);
    const Vec6d b = fd_pose_gradient(
        [&](const EulerGrasp& x) { return cls.evaluate(x, scene); }, g);
    const double scale = std::max(b.norm(), 1e-6);
    CHECK((a - b).norm() / scale < 1e-4);
    ++checked;
  };
  for (int trial = 0; trial < 800; ++trial) {
    // stability responds in a shell around the object surface
    EulerGrasp gs;
    gs.translation << rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
        rng.uniform(-0.25, 0.1);
    gs.euler << rng.uniform(-1.5, 1.5), rng.uniform(-1.4, 1.4), rng.uniform(-1.5, 1.5);
    check_one(stab, gs);

    // handover responds near the threshold shell around the target centroid
    Vec3d dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    EulerGrasp gh;
    gh.translation = scene.handover_target + rng.uniform(0.025, 0.055) * dir;
    gh.euler << rng.uniform(-1.5, 1.5), 0.0, 0.0;
    check_one(hand, gh);
  }
  CHECK(checked > 100);
}

TEST_CASE("saturated scores report a zero gradient") {
  const Scene scene = handover_scene();
  HandoverClassifier cls;
  // far inside the exclusion ball: the clamped score is flat there
  CHECK(cls.evaluate(grasp_at(0.5, 0.0, 0.3), scene) == kProbEps);
  CHECK(cls.gradient(grasp_at(0.5, 0.0, 0.3), scene).norm() == 0.0);
}

TEST_CASE("joint score over a classifier set") {
  const Scene scene = handover_scene();
  ClassifierSet set;
  set.add(std::make_shared<FunctionClassifier>(
      "a", [](const EulerGrasp&, const Scene&) { return 0.5; }));
  set.add(std::make_shared<FunctionClassifier>(
      "b", [](const EulerGrasp&, const Scene&) { return 0.8; }));
  const JointScore js = joint_log_score(set, grasp_at(0, 0, 0), scene);
  CHECK(js.log_score == doctest::Approx(std::log(0.5) + std::log(0.8)).epsilon(1e-12));
  CHECK(js.product == doctest::Approx(0.4).epsilon(1e-12));
  REQUIRE(js.per_classifier.size() == 2);
  CHECK(js.per_classifier[0] == doctest::Approx(0.5));
  CHECK(js.per_classifier[1] == doctest::Approx(0.8));

  CHECK_THROWS_AS(set.add(std::make_shared<FunctionClassifier>(
                      "a", [](const EulerGrasp&, const Scene&) { return 0.1; })),
                  std::invalid_argument);
}

TEST_CASE("joint gradient is the sum of per-classifier log gradients") {
  const Scene scene = handover_scene();
  ClassifierSet set;
  set.add(std::make_shared<FunctionClassifier>(
      "gx", [](const EulerGrasp& g, const Scene&) {
        return 0.2 + 0.5 * std::sin(g.translation(0));
      }));
  set.add(std::make_shared<FunctionClassifier>(
      "gy", [](const EulerGrasp& g, const Scene&) {
        return 0.3 + 0.4 * std::cos(g.translation(1));
      }));
  const EulerGrasp g = grasp_at(0.4, 0.9, 0.0);
  const JointScore js = joint_log_score(set, g, scene);
  const Vec6d fd = fd_pose_gradient(
      [&](const EulerGrasp& x) {
        return std::log(clamp_prob(0.2 + 0.5 * std::sin(x.translation(0)))) +
               std::log(clamp_prob(0.3 + 0.4 * std::cos(x.translation(1))));
      },
      g);
  CHECK((js.gradient - fd).norm() < 1e-6);
}

TEST_CASE("density ratio and corrector") {
  const Scene scene = handover_scene();
  ClassifierSet set;
  set.add(std::make_shared<FunctionClassifier>(
      "c", [](const EulerGrasp&, const Scene&) { return 0.8; }));
  // (1 - 0.8) / 0.8
  CHECK(density_ratio(set, grasp_at(0, 0, 0), scene) == doctest::Approx(0.25).epsilon(1e-9));

  ClassifierSet sure;
  sure.add(std::make_shared<FunctionClassifier>(
      "s", [](const EulerGrasp&, const Scene&) { return 1.0; }));
  // ceiling clamp keeps the ratio finite and positive
  const double r = density_ratio(sure, grasp_at(0, 0, 0), scene);
  CHECK(r > 0.0);
  CHECK(r == doctest::Approx(kProbEps / (1.0 - kProbEps)).epsilon(1e-9));

  ClassifierSet doomed;
  doomed.add(std::make_shared<FunctionClassifier>(
      "d", [](const EulerGrasp&, const Scene&) { return 0.0; }));
  CHECK(std::isfinite(density_ratio(doomed, grasp_at(0, 0, 0), scene)));

  // base discriminator at 0.9: odds 9 multiply the ratio
  FunctionClassifier base("base", [](const EulerGrasp&, const Scene&) { return 0.9; });
  CHECK(corrector_ratio(base, set, grasp_at(0, 0, 0), scene) ==
        doctest::Approx(9.0 * 0.25).epsilon(1e-6));
}

TEST_CASE("call counters track evaluations and gradients") {
  const Scene scene = handover_scene();
  ClassifierSet set;
  set.add(std::make_shared<HandoverClassifier>());
  const EulerGrasp g = grasp_at(0.55, 0.0, 0.3);
  joint_log_score(set, g, scene);      // 1 eval + 1 grad each
  density_ratio(set, g, scene);        // 1 eval, no grad
  CHECK(set.total_eval_count() == 2);
  CHECK(set.total_grad_count() == 1);
  set.reset_counts();
  CHECK(set.total_eval_count() == 0);
  CHECK(set.total_grad_count() == 0);
}
