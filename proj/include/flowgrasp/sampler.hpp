#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowgrasp/rng.hpp"
#include "flowgrasp/sdf.hpp"

namespace flowgrasp {

enum class OrientationMode { Uniform, TowardCentroid };

struct SamplerConfig {
  std::string object;          // empty = first object in the scene
  double bbox_margin = 0.0;    // inflation, meters
  int n_samples = 1;
  OrientationMode orientation_mode = OrientationMode::Uniform;
  std::uint64_t seed = 0;

  void validate() const {
    if (bbox_margin < 0.0) throw std::invalid_argument("bbox_margin must be >= 0");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  }
};

struct Aabb {
  Vec3d lo{Vec3d::Zero()};
  Vec3d hi{Vec3d::Zero()};

  bool contains(const Vec3d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Axis-aligned bounding box of a posed primitive (conservative and tight for
// all three kinds via the support function of the rotated body).
inline Aabb primitive_aabb(const Primitive& prim) {
  const Mat3d r = prim.pose.rotation_matrix();
  Vec3d half = Vec3d::Zero();
  switch (prim.kind) {
    case PrimitiveKind::Sphere:
      half.setConstant(prim.parameters(0));
      break;
    case PrimitiveKind::Box:
      half = r.cwiseAbs() * prim.parameters;
      break;
    case PrimitiveKind::Cylinder: {
      // support of disc radius a in plane of local x/y plus segment half_h on z
      const double a = prim.parameters(0), h = prim.parameters(1);
      for (int i = 0; i < 3; ++i) {
        const double disc = std::sqrt(r(i, 0) * r(i, 0) + r(i, 1) * r(i, 1));
        half(i) = a * disc + h * std::abs(r(i, 2));
      }
      break;
    }
  }
  return {prim.pose.translation - half, prim.pose.translation + half};
}

// Uniform unit quaternion via a normalized 4D Gaussian.
inline Quatd random_rotation(Rng& rng) {
  Quatd q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q;
}

// Rotation whose +z axis points along `dir`, rolled uniformly about it.
inline Quatd rotation_toward(const Vec3d& dir, double roll) {
  const Vec3d z = dir.normalized();
  const Quatd align = Quatd::FromTwoVectors(Vec3d::UnitZ(), z);
  return align * Quatd(Eigen::AngleAxisd(roll, Vec3d::UnitZ()));
}

// Base sampler q0: translations uniform in the inflated bounding box of the
// target object, orientations uniform on SO(3) or approach-axis toward the
// object centroid.
inline std::vector<GraspPose> sample_bbox(const Scene& scene, const SamplerConfig& cfg) {
  cfg.validate();
  if (scene.objects.empty()) throw std::invalid_argument("scene has no objects");
  const Primitive& prim =
      cfg.object.empty() ? scene.objects.front().primitive : scene.object(cfg.object);
  Aabb box = primitive_aabb(prim);
  box.lo.array() -= cfg.bbox_margin;
  box.hi.array() += cfg.bbox_margin;

  Rng rng(cfg.seed);
  std::vector<GraspPose> out;
  out.reserve(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    Vec3d t;
    for (int k = 0; k < 3; ++k) t(k) = rng.uniform(box.lo(k), box.hi(k));
    Quatd q;
    if (cfg.orientation_mode == OrientationMode::Uniform) {
      q = random_rotation(rng);
    } else {
      Vec3d dir = prim.pose.translation - t;
      if (dir.norm() < 1e-9) dir = Vec3d::UnitZ();
      q = rotation_toward(dir, rng.uniform(0.0, 2.0 * M_PI));
    }
    out.emplace_back(t, q);
  }
  return out;
}

}  // namespace flowgrasp
