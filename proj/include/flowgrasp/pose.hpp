#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowgrasp/dual.hpp"
#include "flowgrasp/types.hpp"

namespace flowgrasp {

// End-effector pose: translation in meters, unit quaternion (w,x,y,z).
struct GraspPose {
  Vec3d translation{Vec3d::Zero()};
  Quatd rotation{Quatd::Identity()};

  GraspPose() = default;
  GraspPose(const Vec3d& t, const Quatd& q) : translation(t), rotation(q.normalized()) {
    if (!translation.allFinite()) throw std::invalid_argument("non-finite translation");
  }

  Mat3d rotation_matrix() const { return rotation.toRotationMatrix(); }
};

// Refinement-space pose: translation plus intrinsic XYZ Euler angles.
// Templated on scalar so classifier evaluations can run on dual numbers.
template <typename T>
struct EulerGraspT {
  Vec3<T> translation{Vec3<T>::Zero()};
  Vec3<T> euler{Vec3<T>::Zero()};

  Vec6<T> as_vector() const {
    Vec6<T> v;
    v << translation(0), translation(1), translation(2), euler(0), euler(1), euler(2);
    return v;
  }

  static EulerGraspT from_vector(const Vec6<T>& v) {
    EulerGraspT g;
    g.translation << v(0), v(1), v(2);
    g.euler << v(3), v(4), v(5);
    return g;
  }
};

using EulerGrasp = EulerGraspT<double>;

// Seed all six pose coordinates as independent dual lanes.
inline EulerGraspT<Dual6> seed_grasp(const EulerGrasp& g) {
  EulerGraspT<Dual6> gd;
  for (int i = 0; i < 3; ++i) {
    gd.translation(i) = Dual6::seeded(g.translation(i), i);
    gd.euler(i) = Dual6::seeded(g.euler(i), 3 + i);
  }
  return gd;
}

// Rotation matrix of intrinsic XYZ Euler angles: R = Rx(e0) * Ry(e1) * Rz(e2).
template <typename T>
Mat3<T> euler_to_rotation(const Vec3<T>& e) {
  using flowgrasp::cos;
  using flowgrasp::sin;
  using std::cos;
  using std::sin;
  const T ca = cos(e(0)), sa = sin(e(0));
  const T cb = cos(e(1)), sb = sin(e(1));
  const T cc = cos(e(2)), sc = sin(e(2));
  Mat3<T> r;
  r(0, 0) = cb * cc;
  r(0, 1) = -cb * sc;
  r(0, 2) = sb;
  r(1, 0) = ca * sc + sa * sb * cc;
  r(1, 1) = ca * cc - sa * sb * sc;
  r(1, 2) = -sa * cb;
  r(2, 0) = sa * sc - ca * sb * cc;
  r(2, 1) = sa * cc + ca * sb * sc;
  r(2, 2) = ca * cb;
  return r;
}

struct EulerConversion {
  Vec3d euler{Vec3d::Zero()};
  bool near_gimbal_lock = false;  // |pitch| within 1e-6 of +-pi/2
};

// Intrinsic XYZ Euler angles of a unit quaternion. Near pitch = +-pi/2 the
// roll/yaw split is degenerate; the result is still a valid decomposition and
// the flag is raised.
inline EulerConversion quat_to_euler(const Quatd& q) {
  const Mat3d r = q.normalized().toRotationMatrix();
  EulerConversion out;
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  out.euler(1) = std::asin(sb);
  if (std::abs(std::abs(out.euler(1)) - M_PI / 2.0) < 1e-6) {
    out.near_gimbal_lock = true;
    // roll and yaw are coupled; attribute the full rotation to roll
    out.euler(0) = std::atan2(r(1, 0), r(1, 1));
    out.euler(2) = 0.0;
  } else {
    out.euler(0) = std::atan2(-r(1, 2), r(2, 2));
    out.euler(2) = std::atan2(-r(0, 1), r(0, 0));
  }
  return out;
}

inline Quatd euler_to_quat(const Vec3d& e) {
  const Quatd q = Eigen::AngleAxisd(e(0), Vec3d::UnitX()) *
                  Eigen::AngleAxisd(e(1), Vec3d::UnitY()) *
                  Eigen::AngleAxisd(e(2), Vec3d::UnitZ());
  return q.normalized();
}

inline GraspPose to_pose(const EulerGrasp& g) {
  return GraspPose(g.translation, euler_to_quat(g.euler));
}

inline EulerGrasp from_pose(const GraspPose& p) {
  EulerGrasp g;
  g.translation = p.translation;
  g.euler = quat_to_euler(p.rotation).euler;
  return g;
}

// Geodesic angle between two rotations, in [0, pi].
inline double geodesic_distance(const Quatd& a, const Quatd& b) {
  // atan2 form stays accurate for tiny angles where acos(|dot|) loses bits
  const Quatd d = a.normalized().conjugate() * b.normalized();
  const double s = d.vec().norm();
  return 2.0 * std::atan2(s, std::abs(d.w()));
}

}  // namespace flowgrasp
