#include <doctest.h>

#include "flowgrasp/io.hpp"
#include "flowgrasp/kinematics.hpp"
#include "flowgrasp/rng.hpp"

using namespace flowgrasp;

namespace {

KinematicChain load_arm7() {
  return load_chain(std::filesystem::path(FLOWGRASP_DATA_DIR) / "chains" / "panda7.yaml");
}

JointConfig random_config(const KinematicChain& chain, Rng& rng) {
  JointConfig q(chain.dof());
  for (int i = 0; i < chain.dof(); ++i)
    q(i) = rng.uniform(chain.joint_limits[i].lo, chain.joint_limits[i].hi);
  return q;
}

// Finite-difference spatial Jacobian column: [dp/dq; vee((dR/dq) R^T)].
MatXd fd_jacobian(const KinematicChain& chain, const JointConfig& q, double h = 1e-6) {
  MatXd jac(6, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    JointConfig hi = q, lo = q;
    hi(i) += h;
    lo(i) -= h;
    const GraspPose ph = forward_kinematics(chain, hi);
    const GraspPose pl = forward_kinematics(chain, lo);
    jac.block<3, 1>(0, i) = (ph.translation - pl.translation) / (2.0 * h);
    const Mat3d dr = (ph.rotation_matrix() - pl.rotation_matrix()) / (2.0 * h);
    const Mat3d w = dr * forward_kinematics(chain, q).rotation_matrix().transpose();
    jac(3, i) = 0.5 * (w(2, 1) - w(1, 2));
    jac(4, i) = 0.5 * (w(0, 2) - w(2, 0));
    jac(5, i) = 0.5 * (w(1, 0) - w(0, 1));
  }
  return jac;
}

}  // namespace

TEST_CASE("2R forward kinematics") {
  const KinematicChain arm = make_planar_2r();
  CHECK((forward_kinematics(arm, (JointConfig(2) << 0.0, 0.0).finished()).translation -
         Vec3d(2.0, 0.0, 0.0))
            .norm() < 1e-12);
  CHECK((forward_kinematics(arm, (JointConfig(2) << M_PI / 2, 0.0).finished()).translation -
         Vec3d(0.0, 2.0, 0.0))
            .norm() < 1e-12);
}

TEST_CASE("all-zero config equals the product of DH offset transforms") {
  const KinematicChain arm = load_arm7();
  const JointConfig q = JointConfig::Zero(arm.dof());
  Mat4<double> expected = Mat4<double>::Identity();
  for (const auto& row : arm.joints) expected = expected * dh_transform<double>(row, 0.0);
  const Mat4<double> got = forward_kinematics_matrix<double>(arm, q);
  CHECK((got - expected).norm() < 1e-12);
}

TEST_CASE("2R Jacobian position block determinant") {
  const KinematicChain arm = make_planar_2r();
  const MatXd j = jacobian<double>(arm, (JointConfig(2) << 0.0, M_PI / 2).finished());
  const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
  CHECK(std::abs(det) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate second link gives a pure-rotation column") {
  const KinematicChain arm = make_planar_2r(1.0, 1e-12);
  const MatXd j = jacobian<double>(arm, (JointConfig(2) << 0.3, 0.7).finished());
  CHECK(j.block<3, 1>(0, 1).norm() < 1e-9);  // no linear effect at the ee origin
  CHECK((j.block<3, 1>(3, 1) - Vec3d(0.0, 0.0, 1.0)).norm() < 1e-12);
}

TEST_CASE("Jacobian matches finite differences on random 7-joint configs") {
  const KinematicChain arm = load_arm7();
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const JointConfig q = random_config(arm, rng);
    const MatXd a = jacobian<double>(arm, q);
    const MatXd b = fd_jacobian(arm, q);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("2R manipulability equals |sin q2|") {
  const KinematicChain arm = make_planar_2r();
  for (double q2 = -3.0; q2 <= 3.0; q2 += 0.1) {
    if (std::abs(std::sin(q2)) < 1e-2) continue;  // singular: checked separately below
    const double omega =
        manipulability_volume<double>(arm, (JointConfig(2) << 0.4, q2).finished());
    CHECK(std::abs(omega - std::abs(std::sin(q2))) < 1e-9);
  }
  // near singularities omega = sqrt(det(J J^T)) has an O(sqrt(eps)) floor
  CHECK(manipulability_volume<double>(arm, (JointConfig(2) << 0.2, 0.0).finished()) <
        1e-7);
  CHECK(manipulability_volume<double>(arm, (JointConfig(2) << 0.2, M_PI).finished()) <
        1e-7);
}

TEST_CASE("manipulability is invariant under rigid re-basing") {
  Rng rng(9);

  KinematicChain arm = load_arm7();
  KinematicChain rebased = arm;
  rebased.base_pose =
      GraspPose({0.3, -0.2, 0.5}, Quatd(0.8, 0.1, -0.5, 0.3).normalized());
  for (int i = 0; i < 20; ++i) {
    const JointConfig q = random_config(arm, rng);
    CHECK(manipulability_volume<double>(arm, q) ==
          doctest::Approx(manipulability_volume<double>(rebased, q)).epsilon(1e-9));
  }

  // planar chain: in-plane re-basing only
  KinematicChain planar = make_planar_2r();
  KinematicChain planar_rebased = planar;
  planar_rebased.base_pose =
      GraspPose({0.4, 0.7, 0.0}, euler_to_quat({0.0, 0.0, 1.1}));
  for (int i = 0; i < 20; ++i) {
    JointConfig q(2);
    q << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
    CHECK(manipulability_volume<double>(planar, q) ==
          doctest::Approx(manipulability_volume<double>(planar_rebased, q)).epsilon(1e-9));
  }
}

TEST_CASE("IK recovers poses produced by FK") {
  const KinematicChain arm = load_arm7();
  Rng rng(13);
  int solved = 0;
  for (int i = 0; i < 50; ++i) {
    const JointConfig q_true = random_config(arm, rng);
    const GraspPose target = forward_kinematics(arm, q_true);
    JointConfig seed = q_true;
    for (int k = 0; k < arm.dof(); ++k) seed(k) += rng.uniform(-0.3, 0.3);
    for (int k = 0; k < arm.dof(); ++k)
      seed(k) = std::clamp(seed(k), arm.joint_limits[k].lo, arm.joint_limits[k].hi);
    const IkResult res = inverse_kinematics(arm, target, seed);
    if (!res.reachable) continue;  // seeds can still cross a fold
    ++solved;
    const GraspPose reached = forward_kinematics(arm, res.config);
    const double err = (reached.translation - target.translation).norm() +
                       geodesic_distance(reached.rotation, target.rotation);
    CHECK(err < 2e-4);
  }
  CHECK(solved > 40);
}

TEST_CASE("IK flags unreachable targets with a stretched best effort") {
  const KinematicChain arm = make_planar_2r();
  const GraspPose target(Vec3d(2.5, 0.0, 0.0), Quatd::Identity());
  const IkResult res = inverse_kinematics(arm, target, (JointConfig(2) << 0.3, 0.5).finished());
  CHECK_FALSE(res.reachable);
  // closest reachable: arm nearly stretched toward the target; convergence to
  // the exact stretch is asymptotic (the residual lies in the Jacobian's null
  // direction there), so allow a small remaining bend
  CHECK(std::abs(std::remainder(res.config(1), 2 * M_PI)) < 0.25);
  const GraspPose reached = forward_kinematics(arm, res.config);
  CHECK((reached.translation - Vec3d(2.0, 0.0, 0.0)).norm() < 0.1);
}

TEST_CASE("IK returns the seed when the target already matches") {
  const KinematicChain arm = load_arm7();
  JointConfig q(arm.dof());
  for (int i = 0; i < arm.dof(); ++i)
    q(i) = 0.5 * (arm.joint_limits[i].lo + arm.joint_limits[i].hi);
  const GraspPose target = forward_kinematics(arm, q);
  const IkResult res = inverse_kinematics(arm, target, q);
  CHECK(res.reachable);
  CHECK(res.iterations == 0);
  CHECK((res.config - q).norm() < 1e-12);
}

TEST_CASE("chain validation") {
  KinematicChain c;
  c.joints = {{1.0, 0.0, 0.0, 0.0}};
  c.joint_limits = {{-1.0, 1.0}};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
