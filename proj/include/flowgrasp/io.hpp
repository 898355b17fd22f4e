#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "flowgrasp/classifiers.hpp"
#include "flowgrasp/flow.hpp"
#include "flowgrasp/mh.hpp"
#include "flowgrasp/sampler.hpp"
#include "flowgrasp/sdf.hpp"

namespace flowgrasp {

// All loaders are strict: unknown keys are rejected with the file path and
// line number in the error message.

Scene load_scene(const std::filesystem::path& path);
KinematicChain load_chain(const std::filesystem::path& path);
GripperModel load_gripper(const std::filesystem::path& path);

enum class Method { Flow, Mh, MhV1, MhV2, None };

Method method_by_name(const std::string& name);
std::string method_name(Method m);

// Classifier selection: S (stability), E (execution), H (handover).
struct ExperimentSpec {
  std::filesystem::path spec_path;
  std::filesystem::path scene_file;
  std::filesystem::path chain_file;    // may be empty when E unused
  std::filesystem::path gripper_file;  // may be empty when S unused
  Method method = Method::Flow;
  std::string classifier_selection = "S";
  SamplerConfig sampler;
  FlowConfig flow;
  MHConfig mh;
  int top_k = 0;  // 0 = keep all samples
  int repetitions = 1;
  double threshold = 0.5;
  std::filesystem::path output_dir = "out";
};

ExperimentSpec load_experiment(const std::filesystem::path& path);

// Trace record stream: one JSON object per line, one line per step.
void write_trace(std::ostream& os, std::size_t grasp_index, const RefinementTrace& trace);

// Deterministic decimal formatting shared by every writer.
std::string format_double(double v);

}  // namespace flowgrasp
