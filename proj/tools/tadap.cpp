#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "tadap/pipeline.hpp"

namespace {

struct Overrides {
  std::string images, features, gnss, boxes, calibration, frames, output, ground_truth;
  int workers = -1;
};

void add_path_options(CLI::App& app, Overrides& o) {
  app.add_option("--images", o.images, "image directory");
  app.add_option("--features", o.features, "TDFG feature directory");
  app.add_option("--gnss", o.gnss, "GNSS log");
  app.add_option("--boxes", o.boxes, "box JSONL");
  app.add_option("--calibration", o.calibration, "calibration file");
  app.add_option("--frames", o.frames, "frame index CSV");
  app.add_option("--output", o.output, "output directory");
  app.add_option("--ground-truth", o.ground_truth, "ground-truth mask directory");
  app.add_option("--workers", o.workers, "worker threads (0 = all cores)");
}

tadap::RunConfig make_config(const std::string& path, const Overrides& o) {
  tadap::RunConfig cfg = path.empty() ? tadap::RunConfig{} : tadap::load_config(path);
  const auto set = [](std::string& dst, const std::string& v) {
    if (!v.empty()) dst = v;
  };
  set(cfg.paths.images, o.images);
  set(cfg.paths.features, o.features);
  set(cfg.paths.gnss, o.gnss);
  set(cfg.paths.boxes, o.boxes);
  set(cfg.paths.calibration, o.calibration);
  set(cfg.paths.frames, o.frames);
  set(cfg.paths.output, o.output);
  set(cfg.paths.ground_truth, o.ground_truth);
  if (o.workers >= 0) cfg.workers = static_cast<unsigned>(o.workers);
  return cfg;
}

// Fills unset paths from a synthetic suite directory.
void use_suite(tadap::RunConfig& cfg, const std::string& root) {
  if (root.empty()) return;
  const tadap::SuiteLayout s{root};
  const auto set = [](std::string& dst, const std::filesystem::path& v) {
    if (dst.empty()) dst = v.string();
  };
  set(cfg.paths.images, s.images());
  set(cfg.paths.features, s.features());
  set(cfg.paths.gnss, s.gnss());
  set(cfg.paths.boxes, s.boxes());
  set(cfg.paths.calibration, s.calibration());
  set(cfg.paths.frames, s.frames());
  set(cfg.paths.ground_truth, s.ground_truth());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-assisted drivable-area auto-labeling"};
  app.require_subcommand(1);
  std::string config_path, suite;
  Overrides o;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--suite", suite, "synthetic suite directory supplying default paths");
  add_path_options(app, o);

  auto* label = app.add_subcommand("label", "label every indexed frame");
  bool dry_run = false;
  label->add_flag("--dry-run", dry_run, "validate inputs only");

  auto* train = app.add_subcommand("train-head", "train the linear head on label masks");
  std::string labels, train_split, val_split, weights;
  train->add_option("--labels", labels, "label mask directory")->required();
  train->add_option("--train-split", train_split, "training frame list")->required();
  train->add_option("--val-split", val_split, "validation frame list")->required();
  train->add_option("--weights", weights, "output weight file")->required();

  auto* predict = app.add_subcommand("predict", "predict masks with a trained head");
  std::string split;
  bool refine = false;
  predict->add_option("--weights", weights, "weight file")->required();
  predict->add_option("--split", split, "frame list (default: all indexed frames)");
  predict->add_flag("--refine", refine, "refine with the CRF");

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  std::string pred_dir, report_dir;
  bool strict = false;
  eval->add_option("--pred", pred_dir, "prediction directory")->required();
  eval->add_option("--report", report_dir, "report directory")->required();
  eval->add_flag("--strict", strict, "fail on any missing frame");

  auto* synth = app.add_subcommand("synth", "generate a synthetic suite");
  std::string synth_out;
  tadap::SuiteOptions suite_opt;
  synth->add_option("out", synth_out, "suite directory")->required();
  synth->add_option("--scenes", suite_opt.scenes, "number of scenes");
  synth->add_option("--seed", suite_opt.seed, "suite seed");

  auto* over = app.add_subcommand("overlay", "blend masks over images");
  std::string masks, out_dir;
  double alpha = 0.5;
  over->add_option("--masks", masks, "mask directory")->required();
  over->add_option("--out", out_dir, "output directory")->required();
  over->add_option("--alpha", alpha, "blend factor in [0, 1]");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto manifest = tadap::generate_suite(suite_opt, synth_out);
      std::printf("synth: %zu scenes written to %s\n", manifest["frames"].size(), synth_out.c_str());
      return 0;
    }
    tadap::RunConfig cfg = make_config(config_path, o);
    use_suite(cfg, suite);
    tadap::Logger log(cfg.log_level);
    if (*label) {
      const auto s = tadap::cmd_label(cfg, dry_run, log);
      if (dry_run) std::printf("label (dry run): %zu frames incomplete\n", s.skipped);
      else std::printf("label: %zu labeled, %zu skipped\n", s.labeled, s.skipped);
    } else if (*train) {
      const auto w = tadap::cmd_train_head(cfg, labels, train_split, val_split, weights, log);
      std::printf("train-head: epoch %d, validation IoU %.4f\n", w.epoch, w.validation_iou);
    } else if (*predict) {
      require(!cfg.paths.output.empty(), tadap::Errc::config, "no output directory configured");
      const std::size_t n = tadap::cmd_predict(cfg, tadap::load_head(weights), split, refine, cfg.paths.output, log);
      std::printf("predict: %zu frames\n", n);
    } else if (*eval) {
      require(!cfg.paths.ground_truth.empty(), tadap::Errc::config, "no ground-truth directory configured");
      if (strict) cfg.eval.strict = true;
      tadap::EvalReport report;
      const std::size_t missing = tadap::cmd_eval(cfg, pred_dir, cfg.paths.ground_truth, report_dir, log, &report);
      std::printf("%s", tadap::report_text(report).c_str());
      if (missing) std::printf("eval: %zu frames excluded\n", missing);
    } else if (*over) {
      require(!cfg.paths.images.empty(), tadap::Errc::config, "no image directory configured");
      std::printf("overlay: %zu images\n", tadap::cmd_overlay(cfg.paths.images, masks, out_dir, alpha, log));
    }
  } catch (const tadap::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
