#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "flowgrasp/pose.hpp"
#include "flowgrasp/types.hpp"

namespace flowgrasp {

enum class PrimitiveKind { Sphere, Box, Cylinder };

// Sphere: parameters = (radius).
// Box: parameters = (hx, hy, hz) half-extents.
// Cylinder: parameters = (radius, half_height), axis along local z.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Vec3d parameters{Vec3d::Zero()};
  GraspPose pose;

  static Primitive sphere(double radius, const GraspPose& pose = {}) {
    check_positive(radius);
    Primitive p;
    p.kind = PrimitiveKind::Sphere;
    p.parameters << radius, 0.0, 0.0;
    p.pose = pose;
    return p;
  }

  static Primitive box(const Vec3d& half_extents, const GraspPose& pose = {}) {
    for (int i = 0; i < 3; ++i) check_positive(half_extents(i));
    Primitive p;
    p.kind = PrimitiveKind::Box;
    p.parameters = half_extents;
    p.pose = pose;
    return p;
  }

  static Primitive cylinder(double radius, double half_height, const GraspPose& pose = {}) {
    check_positive(radius);
    check_positive(half_height);
    Primitive p;
    p.kind = PrimitiveKind::Cylinder;
    p.parameters << radius, half_height, 0.0;
    p.pose = pose;
    return p;
  }

 private:
  static void check_positive(double v) {
    if (!(v > 0.0)) throw std::invalid_argument("primitive size parameters must be > 0");
  }
};

struct NamedPrimitive {
  std::string name;
  Primitive primitive;
};

// Observation context: named primitives, gravity direction, and an optional
// handover target centroid (world frame).
struct Scene {
  std::vector<NamedPrimitive> objects;
  Vec3d gravity_up{0.0, 0.0, 1.0};
  bool has_handover_target = false;
  Vec3d handover_target{Vec3d::Zero()};

  void add(const std::string& name, const Primitive& prim) {
    for (const auto& o : objects)
      if (o.name == name) throw std::invalid_argument("duplicate object name: " + name);
    objects.push_back({name, prim});
  }

  const Primitive& object(const std::string& name) const {
    for (const auto& o : objects)
      if (o.name == name) return o.primitive;
    throw std::out_of_range("no such object: " + name);
  }
};

namespace detail {

template <typename T>
T clamp_min0(const T& x) {
  return max(x, T(0.0));
}

inline double clamp_min0(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace detail

// Signed distance in the primitive's local frame (exact for all three kinds).
template <typename T>
T sdf_local(const Primitive& prim, const Vec3<T>& p) {
  using flowgrasp::abs;
  using flowgrasp::max;
  using flowgrasp::min;
  using flowgrasp::sqrt;
  using std::abs;
  using std::max;
  using std::min;
  using std::sqrt;
  switch (prim.kind) {
    case PrimitiveKind::Sphere: {
      const T r2 = p.squaredNorm();
      return sqrt(max(r2, T(0.0))) - T(prim.parameters(0));
    }
    case PrimitiveKind::Box: {
      Vec3<T> q;
      for (int i = 0; i < 3; ++i) q(i) = abs(p(i)) - T(prim.parameters(i));
      const T qmax = max(q(0), max(q(1), q(2)));
      Vec3<T> qpos;
      for (int i = 0; i < 3; ++i) qpos(i) = detail::clamp_min0(q(i));
      const T outside = sqrt(qpos.squaredNorm());
      return outside + min(qmax, T(0.0));
    }
    case PrimitiveKind::Cylinder: {
      const T radial = sqrt(p(0) * p(0) + p(1) * p(1)) - T(prim.parameters(0));
      const T axial = abs(p(2)) - T(prim.parameters(1));
      const T dmax = max(radial, axial);
      const T rp = detail::clamp_min0(radial);
      const T ap = detail::clamp_min0(axial);
      return min(dmax, T(0.0)) + sqrt(rp * rp + ap * ap);
    }
  }
  return T(0.0);
}

template <typename T>
T sdf(const Primitive& prim, const Vec3<T>& point) {
  const Mat3d r = prim.pose.rotation_matrix();
  // world -> local with double-valued frame, scalar-typed point
  Vec3<T> local;
  for (int i = 0; i < 3; ++i) {
    local(i) = T(0.0);
    for (int j = 0; j < 3; ++j)
      local(i) += T(r(j, i)) * (point(j) - T(prim.pose.translation(j)));
  }
  return sdf_local(prim, local);
}

namespace detail {

// Deterministic axis pick for tied box faces: x before y before z.
template <typename T>
int argmax_priority(const Vec3<T>& v) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (value_of(v(i)) > value_of(v(best))) best = i;
  return best;
}

}  // namespace detail

// Gradient of sdf w.r.t. the query point, unit norm where differentiable.
// Ties and interior singularities resolve by coordinate priority x, y, z.
template <typename T>
Vec3<T> sdf_gradient_local(const Primitive& prim, const Vec3<T>& p) {
  using flowgrasp::abs;
  using flowgrasp::sqrt;
  using std::abs;
  using std::sqrt;
  Vec3<T> g = Vec3<T>::Zero();
  switch (prim.kind) {
    case PrimitiveKind::Sphere: {
      const T r = sqrt(p.squaredNorm());
      if (value_of(r) < 1e-12) {
        g(0) = T(1.0);  // center singularity
      } else {
        for (int i = 0; i < 3; ++i) g(i) = p(i) / r;
      }
      return g;
    }
    case PrimitiveKind::Box: {
      Vec3<T> q;
      for (int i = 0; i < 3; ++i) q(i) = abs(p(i)) - T(prim.parameters(i));
      const bool outside =
          value_of(q(0)) > 0.0 || value_of(q(1)) > 0.0 || value_of(q(2)) > 0.0;
      if (outside) {
        Vec3<T> qpos;
        for (int i = 0; i < 3; ++i) qpos(i) = detail::clamp_min0(q(i));
        const T n = sqrt(qpos.squaredNorm());
        for (int i = 0; i < 3; ++i) {
          g(i) = qpos(i) / n;
          if (value_of(p(i)) < 0.0) g(i) = -g(i);
        }
      } else {
        const int axis = detail::argmax_priority(q);
        g(axis) = value_of(p(axis)) >= 0.0 ? T(1.0) : T(-1.0);
      }
      return g;
    }
    case PrimitiveKind::Cylinder: {
      const T rxy = sqrt(p(0) * p(0) + p(1) * p(1));
      const T radial = rxy - T(prim.parameters(0));
      const T axial = abs(p(2)) - T(prim.parameters(1));
      Vec3<T> radial_dir = Vec3<T>::Zero();
      if (value_of(rxy) < 1e-12) {
        radial_dir(0) = T(1.0);
      } else {
        radial_dir(0) = p(0) / rxy;
        radial_dir(1) = p(1) / rxy;
      }
      const T axial_sign = value_of(p(2)) >= 0.0 ? T(1.0) : T(-1.0);
      const bool r_out = value_of(radial) > 0.0;
      const bool a_out = value_of(axial) > 0.0;
      if (r_out && a_out) {  // rim region
        const T n = sqrt(radial * radial + axial * axial);
        g = radial_dir * (radial / n);
        g(2) = axial_sign * (axial / n);
      } else if (r_out || (!a_out && value_of(radial) >= value_of(axial))) {
        g = radial_dir;  // lateral surface wins ties (x/y before z)
      } else {
        g(2) = axial_sign;
      }
      return g;
    }
  }
  return g;
}

template <typename T>
Vec3<T> sdf_gradient(const Primitive& prim, const Vec3<T>& point) {
  const Mat3d r = prim.pose.rotation_matrix();
  Vec3<T> local;
  for (int i = 0; i < 3; ++i) {
    local(i) = T(0.0);
    for (int j = 0; j < 3; ++j)
      local(i) += T(r(j, i)) * (point(j) - T(prim.pose.translation(j)));
  }
  const Vec3<T> gl = sdf_gradient_local(prim, local);
  Vec3<T> gw;
  for (int i = 0; i < 3; ++i) {
    gw(i) = T(0.0);
    for (int j = 0; j < 3; ++j) gw(i) += T(r(i, j)) * gl(j);
  }
  return gw;
}

// Scene-level distance: minimum over objects. Empty scenes are rejected.
template <typename T>
T scene_sdf(const Scene& scene, const Vec3<T>& point) {
  if (scene.objects.empty()) throw std::invalid_argument("scene has no objects");
  T best = sdf(scene.objects[0].primitive, point);
  for (std::size_t i = 1; i < scene.objects.size(); ++i) {
    const T d = sdf(scene.objects[i].primitive, point);
    if (value_of(d) < value_of(best)) best = d;
  }
  return best;
}

template <typename T>
Vec3<T> scene_sdf_gradient(const Scene& scene, const Vec3<T>& point) {
  if (scene.objects.empty()) throw std::invalid_argument("scene has no objects");
  std::size_t best = 0;
  double best_d = value_of(sdf(scene.objects[0].primitive, point));
  for (std::size_t i = 1; i < scene.objects.size(); ++i) {
    const double d = value_of(sdf(scene.objects[i].primitive, point));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return sdf_gradient(scene.objects[best].primitive, point);
}

}  // namespace flowgrasp
