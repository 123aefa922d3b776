// iapf: run the prompting pipeline, evaluate predictions, manage fixtures.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "iapf/fixture.hpp"
#include "iapf/io.hpp"
#include "iapf/metrics.hpp"
#include "iapf/pipeline.hpp"
#include "iapf/subprocess.hpp"
#include "iapf/synthetic.hpp"
#include "iapf/wire.hpp"

namespace fs = std::filesystem;

namespace {

std::unique_ptr<iapf::Backend> make_backend(const std::string& spec, std::uint64_t seed, double timeout_s) {
  if (spec == "synthetic") return std::make_unique<iapf::synthetic::SyntheticBackend>(seed);
  if (spec.rfind("fixture:", 0) == 0) return std::make_unique<iapf::FixtureBackend>(spec.substr(8));
  if (spec.rfind("subprocess:", 0) == 0) {
    const auto ms = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
    return std::make_unique<iapf::SubprocessBackend>(spec.substr(11), ms);
  }
  throw CLI::ValidationError("--backend", "expected synthetic, fixture:DIR or subprocess:CMD");
}

std::vector<std::string> read_prompt_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw iapf::Error(iapf::ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  if (out.empty()) throw iapf::Error(iapf::ErrorCode::InvalidArgument, path.string() + " has no prompts");
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  std::cout << text;
  if (!out_path.empty()) iapf::io::write_file(out_path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camouflaged object segmentation from box and point prompts"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the pipeline over a directory of images");
  std::string images, backend_spec, prompt, prompts_file, config_file, out_dir;
  int repeats = 0, jobs = 1;
  bool timings = false;
  double timeout_s = 300.0;
  run->add_option("--images", images, "Image directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--backend", backend_spec, "synthetic | fixture:DIR | subprocess:CMD")->required();
  run->add_option("--prompt", prompt, "Single task-generic prompt used for every run");
  run->add_option("--prompts", prompts_file, "File with one prompt per line")->check(CLI::ExistingFile);
  run->add_option("--repeats", repeats, "Number of runs I per image")->check(CLI::PositiveNumber);
  run->add_option("--config", config_file, "JSON pipeline config")->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Images processed concurrently")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--timeout", timeout_s, "Per-call timeout for subprocess backends, seconds")
      ->check(CLI::PositiveNumber);
  run->add_flag("--timings", timings, "Record wall-clock timings in artifacts");
  run->get_option("--prompt")->excludes(run->get_option("--prompts"));

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  eval->require_subcommand(1);
  std::string pred_dir, gt_dir, eval_out;
  double iou = 0.75;
  auto add_eval_opts = [&](CLI::App* sub) {
    sub->add_option("--pred", pred_dir, "Prediction directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--gt", gt_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", eval_out, "Also write the table to this file");
  };
  auto* eval_cos = eval->add_subcommand("cos", "S-measure, weighted F, MAE, mean E-measure");
  add_eval_opts(eval_cos);
  auto* eval_cis = eval->add_subcommand("cis", "Instance mask AP, AP50, AP75");
  add_eval_opts(eval_cis);
  auto* eval_boxes = eval->add_subcommand("boxes", "Box AP at one IoU threshold");
  add_eval_opts(eval_boxes);
  eval_boxes->add_option("--iou", iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));

  // fixture
  auto* fixture = app.add_subcommand("fixture", "Fixture tree tools");
  fixture->require_subcommand(1);
  auto* validate = fixture->add_subcommand("validate", "Schema and invariant checks");
  std::string fixture_dir;
  validate->add_option("dir", fixture_dir, "Fixture root")->required();

  // demo
  auto* demo = app.add_subcommand("demo", "Demo data");
  demo->require_subcommand(1);
  auto* synth = demo->add_subcommand("synth", "Write a synthetic dataset with ground truth and fixtures");
  int n_images = 10;
  std::uint64_t seed = 0;
  std::string demo_out;
  synth->add_option("--n", n_images, "Number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--out", demo_out, "Output directory")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Answer wire-protocol requests on stdin/stdout");
  std::string serve_backend;
  serve->add_option("--backend", serve_backend, "synthetic | fixture:DIR")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      iapf::PipelineConfig cfg;
      if (!config_file.empty()) cfg = iapf::config_from_json(iapf::io::read_json(config_file));
      if (!prompt.empty()) cfg.prompts = {prompt};
      if (!prompts_file.empty()) cfg.prompts = read_prompt_file(prompts_file);
      if (repeats > 0) cfg.repeats = repeats;
      iapf::apply_env_overrides(cfg);
      cfg.validate();
      const auto backend = make_backend(backend_spec, cfg.seed, timeout_s);
      const auto summary = iapf::run_dataset(images, cfg, *backend, out_dir, {jobs, timings});
      for (const auto& [id, why] : summary.failures) std::cerr << id << ": " << why << "\n";
      std::cout << summary.line() << "\n";
      return summary.failed == 0 ? 0 : 1;
    }
    if (*eval_cos) {
      emit(iapf::metrics::format_cos_tsv(iapf::metrics::evaluate_cos(pred_dir, gt_dir)), eval_out);
      return 0;
    }
    if (*eval_cis) {
      emit(iapf::metrics::format_cis_tsv(iapf::metrics::evaluate_cis(pred_dir, gt_dir)), eval_out);
      return 0;
    }
    if (*eval_boxes) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "iou\tbox_ap\n%.2f\t%.6f\n", iou,
                    iapf::metrics::evaluate_boxes(pred_dir, gt_dir, iou));
      emit(buf, eval_out);
      return 0;
    }
    if (*validate) {
      const auto errors = iapf::validate_fixture_tree(fixture_dir);
      for (const auto& e : errors) std::cerr << e << "\n";
      std::cout << (errors.empty() ? "valid" : std::to_string(errors.size()) + " violation(s)") << "\n";
      return errors.empty() ? 0 : 1;
    }
    if (*synth) {
      const auto ids = iapf::make_synthetic_dataset(n_images, seed, demo_out);
      std::cout << ids.size() << " scenes written to " << demo_out << "\n";
      return 0;
    }
    if (*serve) {
      if (serve_backend.rfind("subprocess:", 0) == 0) {
        throw CLI::ValidationError("--backend", "serve takes synthetic or fixture:DIR");
      }
      const auto backend = make_backend(serve_backend, 0, 300.0);
      return iapf::wire::serve(*backend, std::cin, std::cout);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "iapf: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
