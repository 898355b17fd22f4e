#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowgrasp/pose.hpp"
#include "flowgrasp/types.hpp"

namespace flowgrasp {

// Standard DH row: link length a, link twist alpha, link offset d, joint
// angle offset added to the variable.
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double lo = -M_PI;
  double hi = M_PI;
};

// Rows of the Jacobian entering the manipulability volume. Planar test
// chains use the x/y position block so det(J J^T) stays nonsingular.
enum class OmegaBlock { Full6, PlanarXY, Position3 };

struct KinematicChain {
  std::string name;
  std::vector<DhRow> joints;
  std::vector<JointLimit> joint_limits;
  GraspPose base_pose;
  OmegaBlock omega_block = OmegaBlock::Full6;

  int dof() const { return static_cast<int>(joints.size()); }

  void validate() const {
    if (joints.size() < 2) throw std::invalid_argument("chain needs >= 2 joints");
    if (joint_limits.size() != joints.size())
      throw std::invalid_argument("joint limit count mismatch");
    for (const auto& l : joint_limits)
      if (!(l.lo < l.hi)) throw std::invalid_argument("joint limit lo >= hi");
  }
};

// Planar 2R arm in the xy plane, revolute about z, links along x.
inline KinematicChain make_planar_2r(double l1 = 1.0, double l2 = 1.0) {
  KinematicChain c;
  c.name = "planar_2r";
  c.joints = {{l1, 0.0, 0.0, 0.0}, {l2, 0.0, 0.0, 0.0}};
  c.joint_limits = {{-M_PI, M_PI}, {-M_PI, M_PI}};
  c.omega_block = OmegaBlock::PlanarXY;
  return c;
}

using JointConfig = VecXd;

template <typename T>
Mat4<T> dh_transform(const DhRow& row, const T& theta_var) {
  using flowgrasp::cos;
  using flowgrasp::sin;
  using std::cos;
  using std::sin;
  const T th = theta_var + T(row.theta_offset);
  const T ct = cos(th), st = sin(th);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Mat4<T> m;
  m << ct, -st * T(ca), st * T(sa), ct * T(row.a),
       st, ct * T(ca), -ct * T(sa), st * T(row.a),
       T(0.0), T(sa), T(ca), T(row.d),
       T(0.0), T(0.0), T(0.0), T(1.0);
  return m;
}

template <typename T>
Mat4<T> base_transform(const KinematicChain& chain) {
  const Mat3d r = chain.base_pose.rotation_matrix();
  Mat4<T> m = Mat4<T>::Identity();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = T(r(i, j));
    m(i, 3) = T(chain.base_pose.translation(i));
  }
  return m;
}

template <typename T>
Mat4<T> forward_kinematics_matrix(const KinematicChain& chain, const VecX<T>& q) {
  if (q.size() != chain.dof()) throw std::invalid_argument("joint dimension mismatch");
  Mat4<T> m = base_transform<T>(chain);
  for (int i = 0; i < chain.dof(); ++i) m = m * dh_transform(chain.joints[i], q(i));
  return m;
}

inline GraspPose forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
  const Mat4<double> m = forward_kinematics_matrix<double>(chain, q);
  const Mat3d r = m.template block<3, 3>(0, 0);
  return GraspPose(m.template block<3, 1>(0, 3), Quatd(r));
}

// Geometric Jacobian: column i is [z_i x (p_e - p_i); z_i] for revolute
// joint i, all expressed in the world frame.
template <typename T>
MatX<T> jacobian(const KinematicChain& chain, const VecX<T>& q) {
  if (q.size() != chain.dof()) throw std::invalid_argument("joint dimension mismatch");
  const int n = chain.dof();
  std::vector<Vec3<T>> origins(n + 1);
  std::vector<Vec3<T>> axes(n);
  Mat4<T> m = base_transform<T>(chain);
  origins[0] = m.template block<3, 1>(0, 3);
  for (int i = 0; i < n; ++i) {
    axes[i] = m.template block<3, 1>(0, 2);  // joint axis before applying joint i
    m = m * dh_transform(chain.joints[i], q(i));
    origins[i + 1] = m.template block<3, 1>(0, 3);
  }
  const Vec3<T> pe = origins[n];
  MatX<T> jac(6, n);
  for (int i = 0; i < n; ++i) {
    const Vec3<T> lever = pe - origins[i];
    const Vec3<T> lin = axes[i].cross(lever);
    for (int r = 0; r < 3; ++r) {
      jac(r, i) = lin(r);
      jac(3 + r, i) = axes[i](r);
    }
  }
  return jac;
}

namespace detail {

// LU determinant with partial pivoting on |value|; works for dual scalars.
template <typename T>
T determinant(MatX<T> a) {
  using flowgrasp::abs;
  using std::abs;
  const int n = static_cast<int>(a.rows());
  T det(1.0);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (value_of(abs(a(i, k))) > value_of(abs(a(piv, k)))) piv = i;
    if (piv != k) {
      a.row(k).swap(a.row(piv));
      det = -det;
    }
    if (value_of(abs(a(k, k))) == 0.0) return T(0.0);
    det = det * a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const T f = a(i, k) / a(k, k);
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

// Gaussian elimination solve for the small symmetric DLS systems.
template <typename T>
VecX<T> solve(MatX<T> a, VecX<T> b) {
  using flowgrasp::abs;
  using std::abs;
  const int n = static_cast<int>(a.rows());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (value_of(abs(a(i, k))) > value_of(abs(a(piv, k)))) piv = i;
    if (piv != k) {
      a.row(k).swap(a.row(piv));
      const T tmp = b(k);
      b(k) = b(piv);
      b(piv) = tmp;
    }
    for (int i = k + 1; i < n; ++i) {
      const T f = a(i, k) / a(k, k);
      for (int j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b(i) -= f * b(k);
    }
  }
  VecX<T> x(n);
  for (int i = n - 1; i >= 0; --i) {
    T s = b(i);
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * x(j);
    x(i) = s / a(i, i);
  }
  return x;
}

template <typename T>
MatX<T> omega_rows(const KinematicChain& chain, const MatX<T>& jac) {
  switch (chain.omega_block) {
    case OmegaBlock::Full6:
      return jac;
    case OmegaBlock::PlanarXY:
      return jac.topRows(2);
    case OmegaBlock::Position3:
      return jac.topRows(3);
  }
  return jac;
}

}  // namespace detail

// Manipulability ellipsoid volume omega = sqrt(det(J J^T)) on the chain's
// task block, clamped to zero when the determinant goes nonpositive.
template <typename T>
T manipulability_volume(const KinematicChain& chain, const VecX<T>& q) {
  using flowgrasp::sqrt;
  using std::sqrt;
  const MatX<T> j = detail::omega_rows(chain, jacobian(chain, q));
  const MatX<T> jjt = j * j.transpose();
  const T det = detail::determinant(jjt);
  if (value_of(det) <= 0.0) return T(0.0);
  return sqrt(det);
}

template <typename T>
struct IkResultT {
  VecX<T> config;
  bool reachable = false;
  T error{0.0};
  int iterations = 0;
};

using IkResult = IkResultT<double>;

namespace detail {

// Pose error twist [p_t - p; rotation log of R_t R^T], world frame.
template <typename T>
Vec6<T> pose_error(const Mat4<T>& current, const Vec3<T>& target_p, const Mat3<T>& target_r) {
  using flowgrasp::atan2;
  using flowgrasp::sqrt;
  using std::atan2;
  using std::sqrt;
  Vec6<T> e;
  for (int i = 0; i < 3; ++i) e(i) = target_p(i) - current(i, 3);
  Mat3<T> rc;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rc(i, j) = current(i, j);
  const Mat3<T> re = target_r * rc.transpose();
  Vec3<T> w;
  w << T(0.5) * (re(2, 1) - re(1, 2)), T(0.5) * (re(0, 2) - re(2, 0)),
      T(0.5) * (re(1, 0) - re(0, 1));
  const T s = sqrt(w.squaredNorm());  // sin(theta)
  const T c = T(0.5) * (re(0, 0) + re(1, 1) + re(2, 2) - T(1.0));
  T scale(1.0);
  if (value_of(s) > 1e-9) {
    scale = atan2(s, c) / s;  // theta / sin(theta)
  }
  for (int i = 0; i < 3; ++i) e(3 + i) = scale * w(i);
  return e;
}

}  // namespace detail

// Damped least-squares IK. Joint limits are clamped every iteration.
// Non-convergence is not an error: the best configuration seen is returned
// with reachable=false, standing in for the nearest reachable grasp.
template <typename T>
IkResultT<T> inverse_kinematics(const KinematicChain& chain, const Vec3<T>& target_p,
                                const Mat3<T>& target_r, const VecX<T>& seed,
                                int max_iters = 200, double tol = 1e-4,
                                double damping = 1e-3) {
  using flowgrasp::sqrt;
  using std::sqrt;
  if (seed.size() != chain.dof()) throw std::invalid_argument("seed dimension mismatch");
  const int n = chain.dof();
  auto clamp_limits = [&](VecX<T>& q) {
    for (int i = 0; i < n; ++i) {
      if (value_of(q(i)) < chain.joint_limits[i].lo) q(i) = T(chain.joint_limits[i].lo);
      if (value_of(q(i)) > chain.joint_limits[i].hi) q(i) = T(chain.joint_limits[i].hi);
    }
  };
  auto error_norm = [](const Vec6<T>& e) {
    // translation norm (m) + rotation angle (rad), weighted 1:1
    const T tn = sqrt(e(0) * e(0) + e(1) * e(1) + e(2) * e(2));
    const T rn = sqrt(e(3) * e(3) + e(4) * e(4) + e(5) * e(5));
    return tn + rn;
  };

  VecX<T> q = seed;
  clamp_limits(q);
  IkResultT<T> best;
  best.config = q;
  best.error = T(std::numeric_limits<double>::infinity());
  for (int it = 0; it <= max_iters; ++it) {
    const Mat4<T> m = forward_kinematics_matrix(chain, q);
    const Vec6<T> e = detail::pose_error(m, target_p, target_r);
    const T en = error_norm(e);
    if (value_of(en) < value_of(best.error)) {
      best.error = en;
      best.config = q;
      best.iterations = it;
    }
    if (value_of(en) < tol) {
      best.reachable = true;
      return best;
    }
    if (it == max_iters) break;
    const MatX<T> j = jacobian(chain, q);
    MatX<T> jjt = j * j.transpose();
    for (int i = 0; i < 6; ++i) jjt(i, i) += T(damping * damping);
    VecX<T> ev(6);
    for (int i = 0; i < 6; ++i) ev(i) = e(i);
    const VecX<T> y = detail::solve(jjt, ev);
    VecX<T> dq = j.transpose() * y;
    // near singularities the damped inverse can request enormous joint
    // steps; cap the step norm to keep the iteration from oscillating
    T dq_norm(0.0);
    for (int i = 0; i < n; ++i) dq_norm += dq(i) * dq(i);
    dq_norm = sqrt(dq_norm);
    const double kMaxStep = 0.5;
    if (value_of(dq_norm) > kMaxStep) dq *= T(kMaxStep) / dq_norm;
    q += dq;
    clamp_limits(q);
  }
  return best;
}

inline IkResult inverse_kinematics(const KinematicChain& chain, const GraspPose& target,
                                   const JointConfig& seed, int max_iters = 200,
                                   double tol = 1e-4, double damping = 1e-3) {
  return inverse_kinematics<double>(chain, target.translation, target.rotation_matrix(),
                                    seed, max_iters, tol, damping);
}

}  // namespace flowgrasp
