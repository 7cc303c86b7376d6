#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "clft/dataset.hpp"
#include "clft/evaluation.hpp"
#include "clft/geometry.hpp"
#include "clft/gradcheck.hpp"
#include "clft/image_io.hpp"
#include "clft/model.hpp"
#include "clft/runconfig.hpp"
#include "clft/serialize.hpp"
#include "clft/synthetic.hpp"
#include "clft/training.hpp"

namespace fs = std::filesystem;
using namespace clft;

namespace {

Tensor grid_tensor(const std::vector<double>& grid, int64_t height, int64_t width) {
  return Tensor::from_data({height, width}, grid);
}

int cmd_project(const std::string& cloud_path, const std::string& rig_path, const std::string& out_dir,
                int64_t dilate) {
  const SensorRig rig = read_rig(rig_path);
  const PointCloud cloud = read_point_cloud(cloud_path);
  const PlaneStack planes = densify(filter_and_populate(cloud, rig), dilate);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_tensor_file(out / "xy.clft", grid_tensor(planes.xy, rig.height, rig.width));
  write_tensor_file(out / "yz.clft", grid_tensor(planes.yz, rig.height, rig.width));
  write_tensor_file(out / "xz.clft", grid_tensor(planes.xz, rig.height, rig.width));
  std::vector<double> occ(planes.occupancy.begin(), planes.occupancy.end());
  write_tensor_file(out / "occupancy.clft", grid_tensor(occ, rig.height, rig.width));
  write_pgm(out / "preview_xy.pgm", rig.width, rig.height, plane_preview(planes.xy, planes.occupancy));
  write_pgm(out / "preview_yz.pgm", rig.width, rig.height, plane_preview(planes.yz, planes.occupancy));
  write_pgm(out / "preview_xz.pgm", rig.width, rig.height, plane_preview(planes.xz, planes.occupancy));
  std::cout << "wrote planes for " << cloud.size() << " points to " << out_dir << "\n";
  return 0;
}

int cmd_make_masks(const std::string& cloud_path, const std::string& boxes_path, const std::string& rig_path,
                   const std::string& out_dir) {
  const SensorRig rig = read_rig(rig_path);
  const PointCloud cloud = read_point_cloud(cloud_path);
  const std::vector<Box3D> boxes = read_boxes(boxes_path);
  const ClassMask mask = boxes_to_mask(cloud, boxes, rig);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  Tensor t({mask.height, mask.width});
  for (size_t i = 0; i < mask.codes.size(); ++i) t.data()[i] = static_cast<double>(mask.codes[i]);
  write_tensor_file(out / "mask.clft", t);
  write_ppm(out / "mask_preview.ppm", mask.width, mask.height, mask_preview(mask));
  std::cout << "wrote mask for " << boxes.size() << " boxes to " << out_dir << "\n";
  return 0;
}

int cmd_gen_synthetic(const std::string& out_dir, int64_t frames, uint64_t seed, const std::string& mode,
                      int64_t width, int64_t height) {
  const Dataset data = generate_synthetic(frames, seed, separability_from_string(mode), width, height);
  write_dataset(out_dir, data);
  std::cout << "wrote " << data.frames.size() << " frames to " << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) fail("train: paths.dataset (or --dataset) is required");
  if (cfg.out_path.empty()) fail("train: paths.out (or --out) is required");
  const Dataset data = load_dataset(cfg.dataset_path);
  if (data.rig.width != cfg.model.input_w || data.rig.height != cfg.model.input_h)
    fail("train: dataset resolution " + std::to_string(data.rig.width) + "x" + std::to_string(data.rig.height) +
         " does not match model input");
  ClftModel model(cfg.model, cfg.d_hat, cfg.train.seed);
  const FitResult result = fit(model, data, cfg.train, cfg.modality);
  fs::create_directories(cfg.out_path);
  const fs::path out(cfg.out_path);
  model.save(out / "checkpoint");
  std::ofstream log(out / "log.jsonl", std::ios::binary);
  if (!log) fail("train: cannot write log in " + cfg.out_path);
  log << result.log_jsonl;
  log.close();
  std::cout << "trained " << result.steps << " steps; best epoch " << result.best_epoch << "; checkpoint at "
            << (out / "checkpoint").string() << "\n";
  return 0;
}

std::vector<int64_t> eval_indices(const Dataset& data, const std::string& split, uint64_t seed) {
  std::vector<int64_t> train, val, test;
  split_indices(static_cast<int64_t>(data.frames.size()), seed, train, val, test);
  if (split == "train") return train;
  if (split == "val") return val;
  if (split == "test") return test;
  if (split == "all") {
    std::vector<int64_t> all(data.frames.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
    return all;
  }
  fail("eval: unknown split '" + split + "'");
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& modality_str,
             const std::string& split, uint64_t seed, int64_t dilate, const std::string& out_dir,
             const std::vector<std::string>& subset_filter, bool overlays) {
  const Modality modality = modality_from_string(modality_str);
  const ClftModel model = ClftModel::load(checkpoint);
  const Dataset data = load_dataset(dataset);
  if (data.rig.width != model.config().input_w || data.rig.height != model.config().input_h)
    fail("eval: checkpoint input " + std::to_string(model.config().input_w) + "x" +
         std::to_string(model.config().input_h) + " does not match dataset resolution " +
         std::to_string(data.rig.width) + "x" + std::to_string(data.rig.height));

  std::set<SubsetTag> wanted;
  for (const std::string& s : subset_filter) wanted.insert(subset_from_string(s));

  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  NoGradGuard ng;
  std::map<SubsetTag, ConfusionState> results;
  const std::vector<int64_t> indices = eval_indices(data, split, seed);
  for (int64_t i : indices) {
    const Frame& f = data.frames[static_cast<size_t>(i)];
    if (!wanted.empty() && !wanted.count(f.tag)) continue;
    const PlaneStack planes = densify(f.planes_raw, dilate);
    const Tensor logits = model.forward(&f.rgb, &planes, modality);
    const ClassMask pred = argmax_mask(logits);
    accumulate(results[f.tag], pred, f.mask);
    if (overlays) {
      char name[48];
      std::snprintf(name, sizeof(name), "overlay_%06lld.ppm", static_cast<long long>(i));
      write_ppm(out / name, f.mask.width, f.mask.height, overlay_rgb(f.rgb, pred));
    }
  }
  if (results.empty()) fail("eval: no frames matched the requested split/subsets");

  const StratifiedReport report = stratified_report(results);
  std::ofstream js(out / "report.json", std::ios::binary);
  js << report.json;
  std::ofstream txt(out / "report.txt", std::ios::binary);
  txt << report.text;
  std::cout << report.text;
  return 0;
}

int cmd_gradcheck(const std::string& scope, double tolerance, int64_t budget, uint64_t seed, bool corrupt) {
  GradcheckOptions opts;
  opts.scope = gradcheck_scope_from_string(scope);
  opts.tolerance = tolerance;
  opts.element_budget = budget;
  opts.seed = seed;
  opts.corrupt = corrupt;
  const bool ok = run_gradcheck(opts, std::cout);
  return ok ? 0 : 1;
}

int cmd_bench(const std::string& checkpoint, int64_t warmup, int64_t iters, const std::string& modality_str,
              const std::string& out_file) {
  const ClftModel model = ClftModel::load(checkpoint);
  const Modality modality = modality_from_string(modality_str);
  const Dataset data = generate_synthetic(1, 7, Separability::joint, model.config().input_w,
                                          model.config().input_h);
  const Frame& f = data.frames[0];
  const PlaneStack planes = densify(f.planes_raw, 2);
  NoGradGuard ng;
  const TimingStats stats = time_inference(
      [&]() {
        const Tensor logits = model.forward(&f.rgb, &planes, modality);
        (void)logits;
      },
      warmup, iters);
  const std::string json = timing_json(stats);
  if (!out_file.empty()) {
    std::ofstream os(out_file, std::ios::binary);
    if (!os) fail("bench: cannot write " + out_file);
    os << json;
  }
  std::cout << json;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_threads_from_env();
  CLI::App app{"CLFT camera-LiDAR fusion transformer pipeline"};
  app.require_subcommand(1);

  // project
  std::string cloud_path, rig_path, out_dir, boxes_path;
  int64_t dilate = 0;
  auto* project = app.add_subcommand("project", "Project a point cloud into camera-plane grids");
  project->add_option("cloud", cloud_path, "point cloud file (x y z per line)")->required();
  project->add_option("rig", rig_path, "rig JSON")->required();
  project->add_option("out", out_dir, "output directory")->required();
  project->add_option("--dilate", dilate, "densification radius in pixels");

  // make-masks
  auto* masks = app.add_subcommand("make-masks", "Rasterize 3D box labels into a class mask");
  masks->add_option("cloud", cloud_path, "point cloud file")->required();
  masks->add_option("boxes", boxes_path, "box JSON file")->required();
  masks->add_option("rig", rig_path, "rig JSON")->required();
  masks->add_option("out", out_dir, "output directory")->required();

  // gen-synthetic
  int64_t frames = 64, width = 96, height = 96;
  uint64_t seed = 0;
  std::string separability = "color";
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic paired dataset");
  gen->add_option("out", out_dir, "output directory")->required();
  gen->add_option("--frames", frames, "number of frames");
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--separability", separability, "color | depth | joint");
  gen->add_option("--width", width, "image width");
  gen->add_option("--height", height, "image height");

  // train
  std::string config_path, dataset_path, out_path, modality_str;
  double lr0 = -1.0;
  int64_t batch = -1, max_epochs = -1, patience = -1, dilate_override = -1;
  int64_t seed_flag = -1;
  bool no_augment = false;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--dataset", dataset_path, "dataset directory (overrides config)");
  train->add_option("--out", out_path, "output directory (overrides config)");
  train->add_option("--modality", modality_str, "C | L | C+L (overrides config)");
  train->add_option("--lr0", lr0, "initial learning rate (overrides config)");
  train->add_option("--batch", batch, "batch size (overrides config)");
  train->add_option("--max-epochs", max_epochs, "epoch budget (overrides config)");
  train->add_option("--patience", patience, "early stopping patience (overrides config)");
  train->add_option("--seed", seed_flag, "training seed (overrides config)");
  train->add_option("--dilate", dilate_override, "densification radius (overrides config)");
  train->add_flag("--no-augment", no_augment, "disable horizontal flips");

  // eval
  std::string checkpoint, split = "all";
  std::vector<std::string> subset_filter;
  int64_t eval_dilate = 2;
  uint64_t eval_seed = 0;
  bool no_overlays = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--dataset", dataset_path, "dataset directory")->required();
  eval->add_option("--modality", modality_str, "C | L | C+L")->required();
  eval->add_option("--out", out_path, "output directory")->required();
  eval->add_option("--split", split, "all | train | val | test");
  eval->add_option("--seed", eval_seed, "split seed (must match training for train/val/test)");
  eval->add_option("--dilate", eval_dilate, "densification radius");
  eval->add_option("--subsets", subset_filter, "restrict to subset tags");
  eval->add_flag("--no-overlays", no_overlays, "skip overlay images");

  // gradcheck
  std::string scope = "ops";
  double tolerance = 1e-4;
  int64_t budget = 2;
  uint64_t gc_seed = 42;
  bool corrupt = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  gradcheck->add_option("--scope", scope, "ops | encoder | full");
  gradcheck->add_option("--tolerance", tolerance, "max relative error");
  gradcheck->add_option("--budget", budget, "elements per tensor at model scale");
  gradcheck->add_option("--seed", gc_seed, "suite seed");
  gradcheck->add_flag("--corrupt", corrupt, "negative control: corrupt one gradient");

  // bench
  int64_t warmup = 50, iters = 200;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "Inference timing");
  bench->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  bench->add_option("--warmup", warmup, "warmup iterations");
  bench->add_option("--iters", iters, "measured iterations");
  bench->add_option("--modality", modality_str, "C | L | C+L");
  bench->add_option("--out", bench_out, "write timing JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (project->parsed()) return cmd_project(cloud_path, rig_path, out_dir, dilate);
    if (masks->parsed()) return cmd_make_masks(cloud_path, boxes_path, rig_path, out_dir);
    if (gen->parsed()) return cmd_gen_synthetic(out_dir, frames, seed, separability, width, height);
    if (train->parsed()) {
      RunConfig cfg = RunConfig::from_file(config_path);
      if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
      if (!out_path.empty()) cfg.out_path = out_path;
      if (!modality_str.empty()) cfg.modality = modality_from_string(modality_str);
      if (lr0 > 0.0) cfg.train.lr0 = lr0;
      if (batch >= 0) cfg.train.batch = batch;
      if (max_epochs >= 0) cfg.train.max_epochs = max_epochs;
      if (patience >= 0) cfg.train.patience = patience;
      if (seed_flag >= 0) cfg.train.seed = static_cast<uint64_t>(seed_flag);
      if (dilate_override >= 0) cfg.train.dilate_radius = dilate_override;
      if (no_augment) cfg.train.augment = false;
      cfg.train.validate();
      return cmd_train(cfg);
    }
    if (eval->parsed())
      return cmd_eval(checkpoint, dataset_path, modality_str, split, eval_seed, eval_dilate, out_path,
                      subset_filter, !no_overlays);
    if (gradcheck->parsed()) return cmd_gradcheck(scope, tolerance, budget, gc_seed, corrupt);
    if (bench->parsed())
      return cmd_bench(checkpoint, warmup, iters, modality_str.empty() ? "C+L" : modality_str, bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
