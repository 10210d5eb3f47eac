#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "voxhand/voxhand.hpp"

namespace vx = voxhand;

namespace {

constexpr const char* kConfigKeys =
    "Config file keys (key = value lines, # comments):\n"
    "  skeleton            nyu | icvl (default nyu)\n"
    "  skeleton_file       path to a skeleton description (overrides `skeleton`)\n"
    "  grid_resolution     voxel grid resolution (default 60)\n"
    "  voxel_size          voxel edge length, mm (default 5)\n"
    "  truncation          signed-distance truncation, mm (default 50)\n"
    "  half_extent         pose-target normalization half extent, mm (default 150)\n"
    "  pose_conv_channels  pose-net conv width (default 8)\n"
    "  pose_fc_width       pose-net fully connected width (default 2048)\n"
    "  pose_dropout        pose-net dropout rate (default 0.5)\n"
    "  refine_base         refine-net base channel count (default 32)\n"
    "  head_gain           final-layer init scale (default 1)\n"
    "  epochs              training epochs (default 30)\n"
    "  batch_size          training batch size (default 6)\n"
    "  learning_rate       SGD learning rate (default 0.0001)\n"
    "  momentum            SGD momentum (default 0.9)\n"
    "  pso_swarm           PSO particle count (default 64)\n"
    "  pso_iterations      PSO iteration count (default 300)\n"
    "  image_size          synth render size, px (default 128)\n"
    "  focal               synth focal length, px (default 160)\n"
    "  distance_lo/_hi     synth camera distance range, mm (default 400..900)\n"
    "The --toy flag replaces grid and network sizes with a small preset\n"
    "(24^3 grid, narrow nets, fixed schedule) sized for quick desk runs.\n";

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string config_path;
  bool toy = false;

  vx::RunConfig cfg;

  void load() {
    if (!config_path.empty()) cfg = vx::RunConfig::parse(vx::read_text_file(config_path));
  }

  vx::SkeletonModel skeleton() const {
    if (cfg.has("skeleton_file"))
      return vx::parse_skeleton(vx::read_text_file(cfg.get_string("skeleton_file")));
    const std::string name = cfg.get_string("skeleton", "nyu");
    if (name == "nyu") return vx::default_nyu_skeleton();
    if (name == "icvl") return vx::default_icvl_skeleton();
    throw vx::InvalidSpec("unknown skeleton '" + name + "' (expected nyu or icvl)");
  }

  vx::VoxelGridSpec grid() const {
    if (toy) return vx::ToyPreset{}.grid;
    return {static_cast<int>(cfg.get_int("grid_resolution", 60)),
            cfg.get_real("voxel_size", 5.0), cfg.get_real("truncation", 50.0)};
  }

  vx::PoseTargetCodec codec() const { return {cfg.get_real("half_extent", 150.0)}; }

  vx::TrainConfig train_config() const {
    vx::TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int("epochs", tc.epochs));
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size", tc.batch_size));
    tc.learning_rate = cfg.get_real("learning_rate", tc.learning_rate);
    tc.momentum = cfg.get_real("momentum", tc.momentum);
    tc.seed = seed;
    return tc;
  }

  vx::Network pose_net(int joints) const {
    if (toy) return vx::build_pose_net_toy(vx::ToyPreset{}, joints);
    return vx::build_pose_net(joints, grid().resolution,
                              static_cast<int>(cfg.get_int("pose_conv_channels", 8)),
                              static_cast<int>(cfg.get_int("pose_fc_width", 2048)),
                              cfg.get_real("pose_dropout", 0.5));
  }

  vx::Network refine_net() const {
    const int base = toy ? vx::ToyPreset{}.refine_base
                         : static_cast<int>(cfg.get_int("refine_base", 32));
    return vx::build_refine_net(base);
  }

  double head_gain() const {
    return toy ? vx::ToyPreset{}.head_gain : cfg.get_real("head_gain", 1.0);
  }
};

std::string zero_padded(int value, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << value;
  return os.str();
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
  return base_dir + "/" + path;
}

struct LoadedSample {
  vx::DepthImage depth;
  vx::JointSet joints;
  vx::CameraIntrinsics intrinsics{1.0, 1.0, 0.0, 0.0};
  std::string clean_path;  // resolved; empty when absent
};

std::vector<LoadedSample> load_samples(const std::string& manifest_path, bool need_joints) {
  const std::vector<vx::ManifestRecord> records = vx::load_manifest(manifest_path);
  const std::string base = std::filesystem::path(manifest_path).parent_path().string();
  std::vector<LoadedSample> samples;
  samples.reserve(records.size());
  for (const vx::ManifestRecord& rec : records) {
    LoadedSample s;
    s.depth = vx::load_depth(resolve_path(base, rec.depth));
    s.intrinsics = rec.intrinsics();
    if (need_joints) {
      const auto frames = vx::joints_from_csv(vx::read_text_file(resolve_path(base, rec.joints)));
      if (frames.size() != 1)
        throw vx::InvalidSpec("joints file " + rec.joints + " holds " +
                              std::to_string(frames.size()) + " frames, expected exactly 1");
      s.joints = frames.front();
    }
    if (!rec.clean.empty()) s.clean_path = resolve_path(base, rec.clean);
    samples.push_back(std::move(s));
  }
  return samples;
}

void check_labels(const vx::JointSet& joints, const std::vector<std::string>& labels,
                  const std::string& what) {
  if (joints.names != labels) throw vx::JointMismatch(what + ": joint names do not match the skeleton");
}

std::vector<double> losses_of(const std::vector<vx::EpochStats>& history) {
  std::vector<double> losses;
  losses.reserve(history.size());
  for (const vx::EpochStats& st : history) losses.push_back(st.loss);
  return losses;
}

int cmd_voxelize(const GlobalOpts& g, const std::string& manifest, const std::string& out_dir) {
  const vx::VoxelGridSpec grid = g.grid();
  const auto samples = load_samples(manifest, false);
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const vx::Vec3 com = vx::compute_com(samples[i].depth, samples[i].intrinsics);
    const vx::TsdfVolume vol = vx::depth_to_tsdf(samples[i].depth, samples[i].intrinsics, com, grid);
    vx::save_tsdf(out_dir + "/tsdf_" + zero_padded(static_cast<int>(i), 4) + ".t3d", vol);
  }
  std::cout << "voxelized " << samples.size() << " samples into " << out_dir << "\n";
  return 0;
}

int cmd_synth(const GlobalOpts& g, int count, int pose_count, bool corrupt,
              const std::string& out_dir) {
  const vx::SkeletonModel model = g.skeleton();
  vx::SynthConfig sc;
  sc.count = count;
  sc.seed = g.seed;
  sc.corrupt = corrupt;
  sc.image_size = static_cast<int>(g.cfg.get_int("image_size", sc.image_size));
  sc.focal = g.cfg.get_real("focal", sc.focal);
  sc.distance_lo = g.cfg.get_real("distance_lo", sc.distance_lo);
  sc.distance_hi = g.cfg.get_real("distance_hi", sc.distance_hi);

  if (pose_count <= 0) throw vx::InvalidSpec("synth: --poses must be > 0");
  vx::Rng pose_rng(g.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::vector<vx::HandPose> poses;
  for (int i = 0; i < pose_count; ++i) poses.push_back(vx::random_pose(model, pose_rng));

  const auto samples = vx::generate_synthetic_dataset(model, poses, sc);
  std::filesystem::create_directories(out_dir);
  std::vector<vx::ManifestRecord> records;
  std::vector<vx::JointSet> all_joints;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const vx::SynthSample& s = samples[i];
    const std::string tag = zero_padded(static_cast<int>(i), 4);
    vx::ManifestRecord rec;
    rec.depth = "depth_" + tag + ".d3d";
    rec.joints = "joints_" + tag + ".csv";
    rec.scale = s.scale;
    rec.cam = {s.camera.intrinsics.fx, s.camera.intrinsics.fy, s.camera.intrinsics.cx,
               s.camera.intrinsics.cy, static_cast<double>(s.camera.width),
               static_cast<double>(s.camera.height)};
    if (corrupt) {
      rec.clean = "clean_" + tag + ".d3d";
      vx::save_depth(out_dir + "/" + rec.depth, s.corrupted);
      vx::save_depth(out_dir + "/" + rec.clean, s.depth);
    } else {
      vx::save_depth(out_dir + "/" + rec.depth, s.depth);
    }
    vx::write_text_file(out_dir + "/" + rec.joints, vx::joints_to_csv({s.joints}));
    records.push_back(rec);
    all_joints.push_back(s.joints);
  }
  vx::save_manifest(out_dir + "/manifest.txt", records);
  vx::write_text_file(out_dir + "/joints.csv", vx::joints_to_csv(all_joints));
  std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n";
  return 0;
}

int cmd_train_pose(const GlobalOpts& g, const std::string& manifest, const std::string& out_path,
                   const std::string& loss_path) {
  const vx::SkeletonModel model = g.skeleton();
  const std::vector<std::string> labels = model.annotation_labels();
  const vx::VoxelGridSpec grid = g.grid();
  const vx::PoseTargetCodec codec = g.codec();

  auto samples = load_samples(manifest, true);
  if (g.toy) {
    const std::size_t cap = static_cast<std::size_t>(vx::ToyPreset{}.max_samples);
    if (samples.size() > cap) samples.resize(cap);
  }
  if (samples.empty()) throw vx::EmptyDataset("train-pose: manifest holds no samples");

  std::vector<vx::Tensor> inputs, targets;
  for (const LoadedSample& s : samples) {
    check_labels(s.joints, labels, "train-pose");
    const vx::Vec3 com = vx::compute_com(s.depth, s.intrinsics);
    const vx::TsdfVolume vol = vx::depth_to_tsdf(s.depth, s.intrinsics, com, grid);
    inputs.push_back(vx::tsdf_to_tensor(vol));
    targets.push_back(codec.encode(s.joints.positions, vol.origin));
  }

  vx::Network net = g.pose_net(static_cast<int>(labels.size()));
  net.initialize(g.seed, g.head_gain());
  std::vector<vx::EpochStats> history;
  if (g.toy) {
    history = vx::train_pose_toy(net, inputs, targets, vx::ToyPreset{}, g.seed);
  } else {
    history = vx::train_network(net, inputs, targets, g.train_config());
  }
  net.save(out_path);
  if (!loss_path.empty()) vx::write_text_file(loss_path, vx::loss_to_csv(losses_of(history)));
  std::cout << "trained pose net on " << samples.size() << " samples, " << history.size()
            << " epochs, final loss " << std::setprecision(6) << history.back().loss << "\n";
  return 0;
}

int cmd_train_refine(const GlobalOpts& g, const std::string& manifest, const std::string& out_path,
                     const std::string& loss_path) {
  const vx::VoxelGridSpec grid = g.grid();
  auto samples = load_samples(manifest, false);
  if (g.toy) {
    const std::size_t cap = static_cast<std::size_t>(vx::ToyPreset{}.max_samples);
    if (samples.size() > cap) samples.resize(cap);
  }
  if (samples.empty()) throw vx::EmptyDataset("train-refine: manifest holds no samples");

  std::vector<vx::Tensor> inputs, targets;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LoadedSample& s = samples[i];
    if (s.clean_path.empty())
      throw vx::InvalidSpec("train-refine: manifest record " + std::to_string(i) +
                            " has no clean= depth");
    // Both volumes share the grid placed at the corrupted frame's COM, so the
    // net learns the repair in a fixed frame.
    const vx::Vec3 com = vx::compute_com(s.depth, s.intrinsics);
    inputs.push_back(vx::tsdf_to_tensor(vx::depth_to_tsdf(s.depth, s.intrinsics, com, grid)));
    const vx::DepthImage clean = vx::load_depth(s.clean_path);
    targets.push_back(vx::tsdf_to_tensor(vx::depth_to_tsdf(clean, s.intrinsics, com, grid)));
  }

  vx::Network net = g.refine_net();
  net.initialize(g.seed, g.head_gain());
  std::vector<vx::EpochStats> history;
  if (g.toy) {
    history = vx::train_refine_toy(net, inputs, targets, vx::ToyPreset{}, g.seed);
  } else {
    history = vx::train_network(net, inputs, targets, g.train_config());
  }
  net.save(out_path);
  if (!loss_path.empty()) vx::write_text_file(loss_path, vx::loss_to_csv(losses_of(history)));
  std::cout << "trained refine net on " << samples.size() << " samples, " << history.size()
            << " accepted rounds";
  if (!history.empty())
    std::cout << ", final loss " << std::setprecision(6) << history.back().loss;
  std::cout << "\n";
  return 0;
}

int cmd_predict(const GlobalOpts& g, const std::string& manifest, const std::string& pose_weights,
                const std::string& refine_weights, const std::string& out_path) {
  const vx::SkeletonModel model = g.skeleton();
  const std::vector<std::string> labels = model.annotation_labels();
  const vx::VoxelGridSpec grid = g.grid();
  const vx::PoseTargetCodec codec = g.codec();

  vx::Network pose = g.pose_net(static_cast<int>(labels.size()));
  pose.load(pose_weights);
  vx::Network refine = g.refine_net();
  if (!refine_weights.empty()) refine.load(refine_weights);

  const auto samples = load_samples(manifest, false);
  std::vector<vx::JointSet> predictions;
  for (const LoadedSample& s : samples) {
    predictions.push_back(vx::run_pipeline(s.depth, s.intrinsics, grid,
                                           refine_weights.empty() ? nullptr : &refine, pose,
                                           codec, labels));
  }
  vx::write_text_file(out_path, vx::joints_to_csv(predictions));
  std::cout << "predicted " << predictions.size() << " frames to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& out_path,
             const std::string& table_path) {
  const auto pred = vx::joints_from_csv(vx::read_text_file(pred_path));
  const auto gt = vx::joints_from_csv(vx::read_text_file(gt_path));
  if (pred.size() != gt.size())
    throw vx::DimensionMismatch("eval: " + std::to_string(pred.size()) + " predicted vs " +
                                std::to_string(gt.size()) + " ground-truth frames");
  std::vector<vx::FrameErrors> frames;
  frames.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    frames.push_back(vx::frame_errors(pred[i], gt[i]));
  const vx::EvalSummary summary = vx::summarize(frames);
  const vx::EvalCsv csv = vx::emit_csv(summary);
  vx::write_text_file(out_path, csv.curve);
  if (!table_path.empty()) vx::write_text_file(table_path, csv.table);
  std::cout << std::setprecision(6) << "frames: " << frames.size() << "\n"
            << "mean joint error (mm): " << summary.overall_mean << "\n"
            << "good frames at 20/40/50 mm: " << summary.fraction_at(20.0) << " / "
            << summary.fraction_at(40.0) << " / " << summary.fraction_at(50.0) << "\n";
  return 0;
}

int cmd_ik_fit(const GlobalOpts& g, const std::string& joints_path, const std::string& out_path,
               const std::string& residual_path) {
  const vx::SkeletonModel model = g.skeleton();
  const auto frames = vx::joints_from_csv(vx::read_text_file(joints_path));
  if (frames.empty()) throw vx::EmptyDataset("ik-fit: no frames in " + joints_path);

  vx::PsoConfig pso;
  pso.swarm = static_cast<int>(g.cfg.get_int("pso_swarm", pso.swarm));
  pso.iterations = static_cast<int>(g.cfg.get_int("pso_iterations", pso.iterations));

  std::vector<vx::JointSet> fitted;
  std::vector<double> residuals;
  double total = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    pso.seed = g.seed + i;
    const vx::IkResult res = vx::ik_solve(model, frames[i], pso);
    fitted.push_back(vx::forward_kinematics(model, res.pose));
    residuals.push_back(res.residual);
    total += res.residual;
  }
  vx::write_text_file(out_path, vx::joints_to_csv(fitted));
  if (!residual_path.empty()) {
    std::string text = "frame,residual_mm\n";
    for (std::size_t i = 0; i < residuals.size(); ++i)
      text += std::to_string(i) + "," + vx::detail::format_shortest(residuals[i]) + "\n";
    vx::write_text_file(residual_path, text);
  }
  std::cout << std::setprecision(6) << "fitted " << frames.size()
            << " frames, mean residual (mm): " << total / static_cast<double>(frames.size())
            << "\n";
  return 0;
}

int cmd_bvh_export(const GlobalOpts& g, const std::string& in_path, int count, double scale,
                   const std::string& out_path) {
  if (!in_path.empty()) {
    vx::BvhParseResult parsed = vx::parse_bvh(vx::read_text_file(in_path));
    vx::BvhDocument doc =
        scale != 1.0 ? vx::rescale_bones(parsed.document, scale) : parsed.document;
    vx::write_text_file(out_path, vx::bvh_to_text(doc));
    std::cout << "re-exported " << parsed.poses.size() << " frames to " << out_path << "\n";
    return 0;
  }
  if (count <= 0) throw vx::InvalidSpec("bvh-export: need --in or a positive --count");
  vx::SkeletonModel model = g.skeleton();
  if (scale != 1.0) model = vx::scaled(model, scale);
  vx::Rng rng(g.seed);
  std::vector<vx::HandPose> poses;
  for (int i = 0; i < count; ++i) poses.push_back(vx::random_pose(model, rng));
  vx::write_text_file(out_path, vx::bvh_to_text(vx::pose_to_bvh(model, poses)));
  std::cout << "exported " << count << " random poses to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxhand: depth-to-hand-pose pipeline tools"};
  app.require_subcommand(1);
  app.fallthrough();  // accept global flags after the subcommand name
  app.footer(kConfigKeys);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed shared by all stages");
  app.add_option("--config", g.config_path, "run configuration file");
  app.add_flag("--toy", g.toy, "small-preset mode for quick desk runs");

  std::string manifest, out_dir, out_path, loss_path, pose_weights, refine_weights;
  std::string pred_path, gt_path, table_path, joints_path, residual_path, in_path;
  int count = 0, pose_count = 10;
  double scale = 1.0;
  bool corrupt = false;

  CLI::App* voxelize = app.add_subcommand("voxelize", "depth samples to TSDF volumes");
  voxelize->add_option("--manifest", manifest, "dataset manifest")->required();
  voxelize->add_option("--out-dir", out_dir, "output directory")->required();

  CLI::App* synth = app.add_subcommand("synth", "render a synthetic capsule-hand dataset");
  synth->add_option("--count", count, "number of samples")->required();
  synth->add_option("--poses", pose_count, "size of the random pose pool");
  synth->add_flag("--corrupt", corrupt, "punch holes and keep the clean copies");
  synth->add_option("--out-dir", out_dir, "output directory")->required();

  CLI::App* train_pose = app.add_subcommand("train-pose", "train the pose regression net");
  train_pose->add_option("--manifest", manifest, "dataset manifest")->required();
  train_pose->add_option("--out", out_path, "weights output path")->required();
  train_pose->add_option("--loss", loss_path, "per-epoch loss CSV path");

  CLI::App* train_refine = app.add_subcommand("train-refine", "train the TSDF refinement net");
  train_refine->add_option("--manifest", manifest, "dataset manifest (needs clean= records)")
      ->required();
  train_refine->add_option("--out", out_path, "weights output path")->required();
  train_refine->add_option("--loss", loss_path, "per-epoch loss CSV path");

  CLI::App* predict = app.add_subcommand("predict", "depth samples to joint predictions");
  predict->add_option("--manifest", manifest, "dataset manifest")->required();
  predict->add_option("--pose-net", pose_weights, "pose net weights")->required();
  predict->add_option("--refine-net", refine_weights, "refine net weights (omit to bypass)");
  predict->add_option("--out", out_path, "predictions CSV path")->required();

  CLI::App* eval = app.add_subcommand("eval", "compare predictions against ground truth");
  eval->add_option("--pred", pred_path, "predicted joints CSV")->required();
  eval->add_option("--gt", gt_path, "ground-truth joints CSV")->required();
  eval->add_option("--out", out_path, "good-frames curve CSV path")->required();
  eval->add_option("--table", table_path, "reporting-thresholds table CSV path");

  CLI::App* ik_fit = app.add_subcommand("ik-fit", "fit skeleton poses to annotated joints");
  ik_fit->add_option("--joints", joints_path, "target joints CSV")->required();
  ik_fit->add_option("--out", out_path, "fitted joints CSV path")->required();
  ik_fit->add_option("--residuals", residual_path, "per-frame residual CSV path");

  CLI::App* bvh_export = app.add_subcommand("bvh-export", "write poses as a BVH animation");
  bvh_export->add_option("--in", in_path, "BVH file to re-export");
  bvh_export->add_option("--count", count, "random pose count when no --in is given");
  bvh_export->add_option("--scale", scale, "uniform bone rescale factor");
  bvh_export->add_option("--out", out_path, "BVH output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    g.load();
    if (*voxelize) return cmd_voxelize(g, manifest, out_dir);
    if (*synth) return cmd_synth(g, count, pose_count, corrupt, out_dir);
    if (*train_pose) return cmd_train_pose(g, manifest, out_path, loss_path);
    if (*train_refine) return cmd_train_refine(g, manifest, out_path, loss_path);
    if (*predict) return cmd_predict(g, manifest, pose_weights, refine_weights, out_path);
    if (*eval) return cmd_eval(pred_path, gt_path, out_path, table_path);
    if (*ik_fit) return cmd_ik_fit(g, joints_path, out_path, residual_path);
    if (*bvh_export) return cmd_bvh_export(g, in_path, count, scale, out_path);
  } catch (const vx::EmptyEvaluation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
