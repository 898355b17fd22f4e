#include "flowgrasp/io.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace flowgrasp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, const YAML::Node& node,
                       const std::string& message) {
  std::ostringstream os;
  os << path.string() << ":" << (node.Mark().line + 1) << ": " << message;
  throw std::runtime_error(os.str());
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& message) {
  throw std::runtime_error(path.string() + ": " + message);
}

void check_keys(const std::filesystem::path& path, const YAML::Node& node,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(path, node, "expected a key/value map");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(path, kv.first, "unknown key '" + key + "'");
  }
}

Vec3d parse_vec3(const std::filesystem::path& path, const YAML::Node& node) {
  if (!node.IsSequence() || node.size() != 3) fail(path, node, "expected a 3-vector");
  return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

GraspPose parse_pose(const std::filesystem::path& path, const YAML::Node& node) {
  check_keys(path, node, {"translation", "rotation"});
  Vec3d t = Vec3d::Zero();
  Quatd q = Quatd::Identity();
  if (node["translation"]) t = parse_vec3(path, node["translation"]);
  if (node["rotation"]) {
    const YAML::Node r = node["rotation"];
    if (!r.IsSequence() || r.size() != 4)
      fail(path, r, "expected a quaternion [w, x, y, z]");
    q = Quatd(r[0].as<double>(), r[1].as<double>(), r[2].as<double>(), r[3].as<double>());
    if (q.norm() < 1e-9) fail(path, r, "zero quaternion");
  }
  return GraspPose(t, q);
}

YAML::Node load_root(const std::filesystem::path& path, const std::string& section) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(path, "cannot open file");
  } catch (const YAML::ParserException& e) {
    fail(path, std::string("parse error: ") + e.what());
  }
  check_keys(path, root, {section});
  if (!root[section]) fail(path, "missing top-level '" + section + "' section");
  return root[section];
}

}  // namespace

Scene load_scene(const std::filesystem::path& path) {
  const YAML::Node node = load_root(path, "scene");
  check_keys(path, node, {"gravity_up", "handover_target", "objects"});
  Scene scene;
  if (node["gravity_up"]) {
    scene.gravity_up = parse_vec3(path, node["gravity_up"]);
    const double n = scene.gravity_up.norm();
    if (n < 1e-9) fail(path, node["gravity_up"], "gravity_up must be nonzero");
    scene.gravity_up /= n;
  }
  if (node["handover_target"]) {
    scene.handover_target = parse_vec3(path, node["handover_target"]);
    scene.has_handover_target = true;
  }
  if (!node["objects"] || !node["objects"].IsSequence())
    fail(path, node, "missing 'objects' list");
  for (const auto& obj : node["objects"]) {
    check_keys(path, obj,
               {"name", "kind", "radius", "half_extents", "half_height", "pose"});
    if (!obj["name"]) fail(path, obj, "object needs a name");
    if (!obj["kind"]) fail(path, obj, "object needs a kind");
    const std::string name = obj["name"].as<std::string>();
    const std::string kind = obj["kind"].as<std::string>();
    GraspPose pose;
    if (obj["pose"]) pose = parse_pose(path, obj["pose"]);
    try {
      if (kind == "sphere") {
        if (!obj["radius"]) fail(path, obj, "sphere needs 'radius'");
        scene.add(name, Primitive::sphere(obj["radius"].as<double>(), pose));
      } else if (kind == "box") {
        if (!obj["half_extents"]) fail(path, obj, "box needs 'half_extents'");
        scene.add(name, Primitive::box(parse_vec3(path, obj["half_extents"]), pose));
      } else if (kind == "cylinder") {
        if (!obj["radius"] || !obj["half_height"])
          fail(path, obj, "cylinder needs 'radius' and 'half_height'");
        scene.add(name, Primitive::cylinder(obj["radius"].as<double>(),
                                            obj["half_height"].as<double>(), pose));
      } else {
        fail(path, obj["kind"], "unknown primitive kind '" + kind + "'");
      }
    } catch (const std::invalid_argument& e) {
      fail(path, obj, e.what());
    }
  }
  if (scene.objects.empty()) fail(path, "scene has no objects");
  return scene;
}

KinematicChain load_chain(const std::filesystem::path& path) {
  const YAML::Node node = load_root(path, "chain");
  check_keys(path, node, {"name", "omega_block", "base_pose", "joints"});
  KinematicChain chain;
  if (node["name"]) chain.name = node["name"].as<std::string>();
  if (node["base_pose"]) chain.base_pose = parse_pose(path, node["base_pose"]);
  if (!node["joints"] || !node["joints"].IsSequence())
    fail(path, node, "missing 'joints' list");
  for (const auto& j : node["joints"]) {
    check_keys(path, j, {"a", "alpha", "d", "theta_offset", "limits"});
    DhRow row;
    if (j["a"]) row.a = j["a"].as<double>();
    if (j["alpha"]) row.alpha = j["alpha"].as<double>();
    if (j["d"]) row.d = j["d"].as<double>();
    if (j["theta_offset"]) row.theta_offset = j["theta_offset"].as<double>();
    JointLimit limit;
    if (j["limits"]) {
      const YAML::Node l = j["limits"];
      if (!l.IsSequence() || l.size() != 2) fail(path, l, "limits must be [lo, hi]");
      limit.lo = l[0].as<double>();
      limit.hi = l[1].as<double>();
    }
    chain.joints.push_back(row);
    chain.joint_limits.push_back(limit);
  }
  if (node["omega_block"]) {
    const std::string b = node["omega_block"].as<std::string>();
    if (b == "full6")
      chain.omega_block = OmegaBlock::Full6;
    else if (b == "planar_xy")
      chain.omega_block = OmegaBlock::PlanarXY;
    else if (b == "position3")
      chain.omega_block = OmegaBlock::Position3;
    else
      fail(path, node["omega_block"], "unknown omega_block '" + b + "'");
  } else {
    chain.omega_block = chain.dof() >= 6 ? OmegaBlock::Full6 : OmegaBlock::Position3;
  }
  try {
    chain.validate();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return chain;
}

GripperModel load_gripper(const std::filesystem::path& path) {
  const YAML::Node node = load_root(path, "gripper");
  check_keys(path, node,
             {"finger_separation", "finger_length", "closing_offset", "body_control_points"});
  GripperModel g;
  g.body_control_points.clear();
  if (node["finger_separation"]) g.finger_separation = node["finger_separation"].as<double>();
  if (node["finger_length"]) g.finger_length = node["finger_length"].as<double>();
  if (node["closing_offset"]) g.closing_offset = node["closing_offset"].as<double>();
  if (node["body_control_points"])
    for (const auto& p : node["body_control_points"])
      g.body_control_points.push_back(parse_vec3(path, p));
  if (g.body_control_points.empty())
    fail(path, "gripper needs at least one body control point");
  if (!(g.finger_separation > 0.0) || !(g.finger_length > 0.0))
    fail(path, "gripper dimensions must be > 0");
  return g;
}

Method method_by_name(const std::string& name) {
  if (name == "flow") return Method::Flow;
  if (name == "mh") return Method::Mh;
  if (name == "mh_v1") return Method::MhV1;
  if (name == "mh_v2") return Method::MhV2;
  if (name == "none") return Method::None;
  throw std::invalid_argument("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Flow: return "flow";
    case Method::Mh: return "mh";
    case Method::MhV1: return "mh_v1";
    case Method::MhV2: return "mh_v2";
    case Method::None: return "none";
  }
  return "?";
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  const YAML::Node node = load_root(path, "experiment");
  check_keys(path, node,
             {"scene", "chain", "gripper", "method", "classifiers", "sampler", "top_k",
              "repetitions", "threshold", "flow", "mh", "output_dir"});
  ExperimentSpec spec;
  spec.spec_path = path;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& rel) { return base / rel; };

  if (!node["scene"]) fail(path, node, "experiment needs a scene file");
  spec.scene_file = resolve(node["scene"].as<std::string>());
  if (node["chain"]) spec.chain_file = resolve(node["chain"].as<std::string>());
  if (node["gripper"]) spec.gripper_file = resolve(node["gripper"].as<std::string>());
  if (node["method"]) spec.method = method_by_name(node["method"].as<std::string>());
  if (node["classifiers"]) {
    spec.classifier_selection.clear();
    for (const auto& c : node["classifiers"]) {
      const std::string s = c.as<std::string>();
      if (s != "S" && s != "E" && s != "H")
        fail(path, c, "classifier must be one of S, E, H");
      spec.classifier_selection += s;
    }
  }
  if (spec.method != Method::None && spec.classifier_selection.empty())
    fail(path, node, "refining methods need a nonempty classifier selection");
  if (node["sampler"]) {
    const YAML::Node s = node["sampler"];
    check_keys(path, s, {"object", "bbox_margin", "n_samples", "orientation_mode", "seed"});
    if (s["object"]) spec.sampler.object = s["object"].as<std::string>();
    if (s["bbox_margin"]) spec.sampler.bbox_margin = s["bbox_margin"].as<double>();
    if (s["n_samples"]) spec.sampler.n_samples = s["n_samples"].as<int>();
    if (s["orientation_mode"]) {
      const std::string m = s["orientation_mode"].as<std::string>();
      if (m == "uniform")
        spec.sampler.orientation_mode = OrientationMode::Uniform;
      else if (m == "toward_centroid")
        spec.sampler.orientation_mode = OrientationMode::TowardCentroid;
      else
        fail(path, s["orientation_mode"], "unknown orientation_mode '" + m + "'");
    }
    if (s["seed"]) spec.sampler.seed = s["seed"].as<std::uint64_t>();
  }
  if (node["flow"]) {
    const YAML::Node f = node["flow"];
    check_keys(path, f,
               {"n_steps", "eta_trans", "eta_euler", "gamma", "divergence", "drift_mode",
                "seed"});
    if (f["n_steps"]) spec.flow.n_steps = f["n_steps"].as<int>();
    if (f["eta_trans"]) spec.flow.eta_trans = f["eta_trans"].as<double>();
    if (f["eta_euler"]) spec.flow.eta_euler = f["eta_euler"].as<double>();
    if (f["gamma"]) spec.flow.gamma = f["gamma"].as<double>();
    if (f["divergence"])
      spec.flow.divergence = FDivergence::by_name(f["divergence"].as<std::string>());
    if (f["drift_mode"]) {
      const std::string m = f["drift_mode"].as<std::string>();
      if (m == "log_score")
        spec.flow.drift_mode = DriftMode::LogScore;
      else if (m == "full_fprime")
        spec.flow.drift_mode = DriftMode::FullFPrime;
      else
        fail(path, f["drift_mode"], "unknown drift_mode '" + m + "'");
    }
    if (f["seed"]) spec.flow.seed = f["seed"].as<std::uint64_t>();
  }
  if (node["mh"]) {
    const YAML::Node m = node["mh"];
    check_keys(path, m, {"n_steps", "c_trans", "c_euler", "seed"});
    if (m["n_steps"]) spec.mh.n_steps = m["n_steps"].as<int>();
    if (m["c_trans"]) spec.mh.c_trans = m["c_trans"].as<double>();
    if (m["c_euler"]) spec.mh.c_euler = m["c_euler"].as<double>();
    if (m["seed"]) spec.mh.seed = m["seed"].as<std::uint64_t>();
  }
  if (node["top_k"]) spec.top_k = node["top_k"].as<int>();
  if (node["repetitions"]) spec.repetitions = node["repetitions"].as<int>();
  if (node["threshold"]) spec.threshold = node["threshold"].as<double>();
  if (node["output_dir"]) spec.output_dir = resolve(node["output_dir"].as<std::string>());

  auto require_file = [&](const std::filesystem::path& p, const std::string& what) {
    if (!p.empty() && !std::filesystem::exists(p))
      fail(path, what + " file does not exist: " + p.string());
  };
  require_file(spec.scene_file, "scene");
  require_file(spec.chain_file, "chain");
  require_file(spec.gripper_file, "gripper");
  if (spec.classifier_selection.find('E') != std::string::npos && spec.chain_file.empty())
    fail(path, "classifier E needs a chain file");
  if (spec.classifier_selection.find('S') != std::string::npos && spec.gripper_file.empty())
    fail(path, "classifier S needs a gripper file");
  if (spec.repetitions < 1) fail(path, "repetitions must be >= 1");
  return spec;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace(std::ostream& os, std::size_t grasp_index, const RefinementTrace& trace) {
  for (const auto& s : trace.steps) {
    json rec;
    rec["grasp"] = grasp_index;
    rec["step"] = s.step;
    rec["pose"] = {format_double(s.grasp.translation(0)), format_double(s.grasp.translation(1)),
                   format_double(s.grasp.translation(2)), format_double(s.grasp.euler(0)),
                   format_double(s.grasp.euler(1)), format_double(s.grasp.euler(2))};
    rec["D"] = format_double(s.joint_score);
    json scores = json::array();
    for (double p : s.per_classifier) scores.push_back(format_double(p));
    rec["scores"] = std::move(scores);
    if (s.flagged) rec["flagged"] = true;
    if (!s.accepted) rec["accepted"] = false;
    os << rec.dump() << "\n";
  }
}

}  // namespace flowgrasp
