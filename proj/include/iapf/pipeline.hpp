#pragma once

// I repeated runs per image (tags -> boxes -> prompts -> masks -> collapse),
// then a vote across runs; dataset driver and synthetic dataset writer.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "iapf/backend.hpp"
#include "iapf/generator.hpp"
#include "iapf/simv.hpp"

namespace iapf {

struct PipelineConfig {
  // Synonymic task-generic prompts; cycled to `repeats` entries.
  std::vector<std::string> prompts = {"camouflaged animal", "hidden animal", "concealed creature"};
  int repeats = 3;
  GeneratorConfig generator;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::string> run_prompts() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
// Applies IAPF_SEED when set.
void apply_env_overrides(PipelineConfig& cfg);

struct CallStats {
  std::uint64_t calls = 0;
  double seconds = 0.0;
};

struct RunRecord {
  std::string prompt;
  TagBundle tags;
  std::vector<BoxSet> boxes;  // prepared boxes per fg tag
  InstanceMaskStack stack;
  BinaryMask semantic;
};

struct RunArtifact {
  ImageRef image;
  std::vector<RunRecord> runs;
  simv::VoteResult vote;
  BinaryMask final_mask;
  InstanceMaskStack final_stack;
  std::map<std::string, CallStats> calls;  // keyed by capability name
};

RunArtifact run_image(const ImageRef& image, const PipelineConfig& cfg, const Backend& backend);

nlohmann::json artifact_to_json(const RunArtifact& a, bool include_timings);

// Images (.png/.jpg/.jpeg) in a directory, sorted by id (the file stem).
std::vector<ImageRef> list_images(const std::filesystem::path& dir);

struct RunOptions {
  int jobs = 1;
  bool timings = false;
};

struct DatasetSummary {
  int ok = 0;
  int failed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, reason), id order

  std::string line() const;  // "N ok, M failed"
};

// Writes <id>.png, <id>.inst.json and <id>.artifact.json per image.
DatasetSummary run_dataset(const std::filesystem::path& image_dir, const PipelineConfig& cfg,
                           const Backend& backend, const std::filesystem::path& out_dir,
                           const RunOptions& opts = {});

// out/images/<id>.png + <id>.scene.json, out/gt/<id>.png + <id>.inst.json and
// out/fixtures/ recorded from a default-config synthetic run. Returns the ids.
std::vector<std::string> make_synthetic_dataset(int n_images, std::uint64_t seed,
                                                const std::filesystem::path& out_dir);

}  // namespace iapf
