#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hsifuse/checkpoint.hpp"
#include "hsifuse/io.hpp"
#include "hsifuse/metrics.hpp"
#include "hsifuse/model.hpp"

namespace hsifuse {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Run configuration. Lines of `key = value`, '#' starts a comment.
/// A fixed seed makes the whole pipeline (dataset, init, shuffling,
/// training, reports) bitwise reproducible.
struct ExperimentConfig {
  int scale = 4;
  int epochs = 4;
  double lr = 1e-3;
  double weight_decay = 5e-5;
  std::uint64_t seed = 0;

  // dataset: synthetic scene parameters, or a directory of scene files
  int bands = 8;
  int scene_size = 128;
  int train_scenes = 20;
  int test_scenes = 5;
  double max_disp = 6.0;
  std::string dataset_dir;

  std::string out_dir = "out";
  double alpha_hsi = 1.0;
  double alpha_ref = 1.0;
  int hr_pretrain_epochs = 0;
  bool flow_pretrain = false;
  int flow_pretrain_steps = 300;
  double flow_pretrain_lr = 1e-3;
  std::string srf_csv;

  NetworkShape net;

  void validate() const {
    require(scale == 4 || scale == 8 || scale == 16, "config: scale must be 4, 8 or 16");
    require(lr > 0.0, "config: lr must be positive");
    require(weight_decay >= 0.0, "config: weight_decay must be nonnegative");
    require(epochs >= 0, "config: epochs must be nonnegative");
    require(bands >= 1, "config: bands must be >= 1");
    require(scene_size >= 32 && scene_size % (8 * scale) == 0,
            "config: scene_size must be >= 32 and divisible by 8*scale");
    require(train_scenes >= 1 && test_scenes >= 1, "config: scene counts must be >= 1");
    require(max_disp >= 0.0 && max_disp <= 10.0, "config: max_disp must be in [0,10]");
  }
};

namespace detail {

inline std::array<int, 3> parse_int3(const std::string& v, const std::string& key) {
  std::array<int, 3> out{};
  std::stringstream ss(v);
  std::string cell;
  int i = 0;
  while (std::getline(ss, cell, ',')) {
    require(i < 3, "config: " + key + " takes exactly 3 values");
    out[static_cast<std::size_t>(i++)] = std::stoi(cell);
  }
  require(i == 3, "config: " + key + " takes exactly 3 values");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractViolation("config: " + key + " must be a boolean");
}

}  // namespace detail

inline ExperimentConfig parse_config_text(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (eq == std::string::npos) {
      require(trim(line).empty(), "config: line " + std::to_string(lineno) + " is not key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    require(!key.empty(), "config: empty key at line " + std::to_string(lineno));

    if (key == "scale") cfg.scale = std::stoi(val);
    else if (key == "epochs") cfg.epochs = std::stoi(val);
    else if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "bands") cfg.bands = std::stoi(val);
    else if (key == "scene_size") cfg.scene_size = std::stoi(val);
    else if (key == "train_scenes") cfg.train_scenes = std::stoi(val);
    else if (key == "test_scenes") cfg.test_scenes = std::stoi(val);
    else if (key == "max_disp") cfg.max_disp = std::stod(val);
    else if (key == "dataset_dir") cfg.dataset_dir = val;
    else if (key == "out_dir") cfg.out_dir = val;
    else if (key == "alpha_hsi") cfg.alpha_hsi = std::stod(val);
    else if (key == "alpha_ref") cfg.alpha_ref = std::stod(val);
    else if (key == "hr_pretrain_epochs") cfg.hr_pretrain_epochs = std::stoi(val);
    else if (key == "flow_pretrain") cfg.flow_pretrain = detail::parse_bool(val, key);
    else if (key == "flow_pretrain_steps") cfg.flow_pretrain_steps = std::stoi(val);
    else if (key == "flow_pretrain_lr") cfg.flow_pretrain_lr = std::stod(val);
    else if (key == "srf_csv") cfg.srf_csv = val;
    else if (key == "rgb_channels") cfg.net.rgb_channels = std::stoi(val);
    else if (key == "hsi_channels") cfg.net.hsi_channels = std::stoi(val);
    else if (key == "flow_channels") cfg.net.flow_channels = detail::parse_int3(val, key);
    else if (key == "flow_head_width") cfg.net.flow_head_width = std::stoi(val);
    else if (key == "attn_flow_channels") cfg.net.attn_flow_channels = std::stoi(val);
    else if (key == "attn_reduced_channels") cfg.net.attn_reduced_channels = std::stoi(val);
    else if (key == "attn_width") cfg.net.attn_width = std::stoi(val);
    else if (key == "decoder_channels") cfg.net.decoder_channels = detail::parse_int3(val, key);
    else throw ContractViolation("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::open_failed, "config: cannot open " + path);
  return parse_config_text(is);
}

/// Output paths resolve under $HSIFUSE_OUT when it is set and out_dir is
/// relative.
inline std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::path p(cfg.out_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("HSIFUSE_OUT")) p = std::filesystem::path(root) / p;
  }
  std::filesystem::create_directories(p);
  return p;
}

inline Srf config_srf(const ExperimentConfig& cfg) {
  return cfg.srf_csv.empty() ? default_srf(cfg.bands) : load_srf_csv(cfg.srf_csv);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct DatasetItem {
  std::string id;
  HsiCube h_hr;
  HsiCube h_lr;
  RgbImage r_ref;
  FlowField gt_flow;
};

struct Dataset {
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> test;
  std::string manifest;  // csv: id,role
};

namespace detail {

inline DatasetItem make_item(const ScenePair& pair, const Srf& srf, int scale,
                             const std::string& id) {
  DatasetItem item;
  item.id = id;
  item.h_hr = pair.hr_cube;
  item.r_ref = histogram_match(srf_project(pair.ref_cube, srf), srf_project(pair.hr_cube, srf));
  item.h_lr = degrade(pair.hr_cube, scale);
  item.gt_flow = pair.gt_flow;
  return item;
}

}  // namespace detail

/// Builds the train/test splits. Synthetic scenes come from per-item seeds
/// derived from the config seed; a directory provides scene pairs as
/// scene_%03d_hr.hsic / scene_%03d_ref.hsic (+ optional _flow.flow).
inline Dataset build_dataset(const ExperimentConfig& cfg, const Srf& srf) {
  cfg.validate();
  const int total = cfg.train_scenes + cfg.test_scenes;
  std::vector<ScenePair> pairs(static_cast<std::size_t>(total));

  if (cfg.dataset_dir.empty()) {
    const Rng base(cfg.seed);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < total; ++k) {
      pairs[static_cast<std::size_t>(k)] =
          synth_scene(base.fork(1000 + static_cast<std::uint64_t>(k)).next_u64(), cfg.bands,
                      cfg.scene_size, cfg.scene_size, cfg.max_disp);
    }
  } else {
    namespace fs = std::filesystem;
    if (!fs::is_directory(cfg.dataset_dir)) {
      throw IoError(IoError::Kind::open_failed,
                    "build_dataset: dataset directory missing: " + cfg.dataset_dir);
    }
    for (int k = 0; k < total; ++k) {
      char hr_name[64], ref_name[64], flow_name[64];
      std::snprintf(hr_name, sizeof(hr_name), "scene_%03d_hr.hsic", k);
      std::snprintf(ref_name, sizeof(ref_name), "scene_%03d_ref.hsic", k);
      std::snprintf(flow_name, sizeof(flow_name), "scene_%03d_flow.flow", k);
      const auto hr_path = fs::path(cfg.dataset_dir) / hr_name;
      if (!fs::exists(hr_path)) {
        throw IoError(IoError::Kind::open_failed,
                      "build_dataset: expected " + std::to_string(total) + " scenes, missing " +
                          hr_path.string());
      }
      auto& p = pairs[static_cast<std::size_t>(k)];
      p.hr_cube = read_cube(hr_path.string());
      p.ref_cube = read_cube((fs::path(cfg.dataset_dir) / ref_name).string());
      const auto flow_path = fs::path(cfg.dataset_dir) / flow_name;
      p.gt_flow = fs::exists(flow_path) ? read_flow(flow_path.string())
                                        : FlowField(p.hr_cube.height, p.hr_cube.width);
    }
  }

  // seeded split
  std::vector<int> order(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng = Rng(cfg.seed).fork(2);
  for (int i = total - 1; i > 0; --i) {
    const int j = split_rng.uniform_int(i + 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  Dataset ds;
  std::vector<std::string> role(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const int k = order[static_cast<std::size_t>(i)];
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", k);
    auto item = detail::make_item(pairs[static_cast<std::size_t>(k)], srf, cfg.scale, id);
    if (i < cfg.train_scenes) {
      role[static_cast<std::size_t>(k)] = "train";
      ds.train.push_back(std::move(item));
    } else {
      role[static_cast<std::size_t>(k)] = "test";
      ds.test.push_back(std::move(item));
    }
  }
  std::ostringstream manifest;
  manifest << "id,role\n";
  for (int k = 0; k < total; ++k) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", k);
    manifest << id << "," << role[static_cast<std::size_t>(k)] << "\n";
  }
  ds.manifest = manifest.str();
  return ds;
}

// ---------------------------------------------------------------------------
// Flow pretraining (stands in for an externally pretrained flow network)
// ---------------------------------------------------------------------------

/// Supervised pretraining of both flow estimators on synthetic uniform
/// translations sampled from the given images.
template <typename T>
inline void pretrain_flow(HsifnNet<T>& net, const std::vector<RgbImage>& images,
                          std::uint64_t seed, int steps, double lr, double max_shift = 5.0,
                          int crop = 64) {
  require(!images.empty(), "pretrain_flow: needs at least one image");
  ParamSet<T> flow_params;
  // shared view onto the estimator parameters; updates hit the network
  for (auto& [name, t] : net.params().items()) {
    if (name.rfind("flow1.", 0) == 0 || name.rfind("flow2.", 0) == 0) {
      flow_params.add(name, t);
    }
  }
  AdamWOptions<T> opts;
  opts.lr = static_cast<T>(lr);
  opts.weight_decay = T(0);
  AdamW<T> opt(flow_params, opts);
  Rng rng = Rng(seed).fork(3);

  for (int step = 0; step < steps; ++step) {
    const auto& img = images[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(images.size())))];
    const int side = std::min({crop, img.height, img.width});
    const int y0 = rng.uniform_int(img.height - side + 1);
    const int x0 = rng.uniform_int(img.width - side + 1);
    const double tx = rng.uniform(-max_shift, max_shift);
    const double ty = rng.uniform(-max_shift, max_shift);

    Tensor<T> anchor = Tensor<T>::zeros({3, side, side});
    Tensor<T> src = Tensor<T>::zeros({3, side, side});
    auto& av = anchor.values_mut();
    auto& sv = src.values_mut();
    const std::size_t plane = img.plane();
    for (int c = 0; c < 3; ++c) {
      const float* p = img.data.data() + static_cast<std::size_t>(c) * plane;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const std::size_t i = (static_cast<std::size_t>(c) * side + y) * side + x;
          av[i] = static_cast<T>(p[static_cast<std::size_t>(y0 + y) * img.width + (x0 + x)]);
          // src shifted so that warp(src, (tx,ty)) realigns it with anchor
          sv[i] = static_cast<T>(detail::bilinear_clamped(p, img.height, img.width,
                                                          x0 + x - tx, y0 + y - ty));
        }
      }
    }
    // uniform ground truth at each pyramid scale (level-native units)
    auto uniform_flow = [&](int res, double fx, double fy) {
      Tensor<T> f = Tensor<T>::zeros({2, res, res});
      for (int i = 0; i < res * res; ++i) {
        f.values_mut()[static_cast<std::size_t>(i)] = static_cast<T>(fx);
        f.values_mut()[static_cast<std::size_t>(res) * res + i] = static_cast<T>(fy);
      }
      return f;
    };
    const auto gt_full = uniform_flow(side, tx, ty);
    const auto gt_half = uniform_flow(side / 2, tx / 2, ty / 2);
    const auto gt_quarter = uniform_flow(side / 4, tx / 4, ty / 4);
    const auto gt_eighth = uniform_flow(side / 8, tx / 8, ty / 8);

    // supervision at every level gives each refinement head direct credit
    auto level_loss = [&](const FlowEstimator<T>& est) {
      const auto levels = est.estimate_levels(anchor, src);
      return add(add(smooth_l1(levels.eighth, gt_eighth), smooth_l1(levels.quarter, gt_quarter)),
                 add(smooth_l1(levels.half, gt_half), smooth_l1(levels.full, gt_full)));
    };
    flow_params.zero_grads();
    auto loss = add(level_loss(net.flow1()), level_loss(net.flow2()));
    backward(loss);
    opt.step();
  }
}

/// Mean endpoint error of an estimator over random held-out uniform
/// translations (full-frame mean).
template <typename T>
inline double flow_translation_epe(const FlowEstimator<T>& est, const std::vector<RgbImage>& images,
                                   std::uint64_t seed, int trials, double max_shift = 4.0,
                                   int crop = 64) {
  Rng rng = Rng(seed).fork(7);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto& img = images[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(images.size())))];
    const int side = std::min({crop, img.height, img.width});
    const int y0 = rng.uniform_int(img.height - side + 1);
    const int x0 = rng.uniform_int(img.width - side + 1);
    const double tx = rng.uniform(-max_shift, max_shift);
    const double ty = rng.uniform(-max_shift, max_shift);
    Tensor<T> anchor = Tensor<T>::zeros({3, side, side});
    Tensor<T> src = Tensor<T>::zeros({3, side, side});
    const std::size_t plane = img.plane();
    for (int c = 0; c < 3; ++c) {
      const float* p = img.data.data() + static_cast<std::size_t>(c) * plane;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const std::size_t i = (static_cast<std::size_t>(c) * side + y) * side + x;
          anchor.values_mut()[i] =
              static_cast<T>(p[static_cast<std::size_t>(y0 + y) * img.width + (x0 + x)]);
          src.values_mut()[i] = static_cast<T>(
              detail::bilinear_clamped(p, img.height, img.width, x0 + x - tx, y0 + y - ty));
        }
      }
    }
    const auto flow = est.estimate(anchor, src);
    const std::size_t fp = static_cast<std::size_t>(side) * side;
    double epe = 0.0;
    for (std::size_t i = 0; i < fp; ++i) {
      const double dx = static_cast<double>(flow.values()[i]) - tx;
      const double dy = static_cast<double>(flow.values()[fp + i]) - ty;
      epe += std::sqrt(dx * dx + dy * dy);
    }
    total += epe / static_cast<double>(fp);
  }
  return total / trials;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOutput {
  std::string checkpoint_path;
  std::string loss_curve_path;
  std::vector<float> losses;  // one per step
};

/// Batch-size-1 training with seeded per-epoch shuffling, optional
/// HR-pretraining warmup epochs and optional flow pretraining. Writes a
/// checkpoint per epoch plus a final one with optimizer state, and the loss
/// curve as CSV.
template <typename T>
inline TrainOutput train_loop(const ExperimentConfig& cfg, const Dataset& ds, HsifnNet<T>& net,
                              const AblationFlags& flags = {}, const std::string& tag = "model") {
  const auto out_dir = resolve_out_dir(cfg);
  net.alpha_hsi = static_cast<T>(cfg.alpha_hsi);
  net.alpha_ref = static_cast<T>(cfg.alpha_ref);

  if (cfg.flow_pretrain && flags.align && flags.reference) {
    std::vector<RgbImage> imgs;
    for (const auto& item : ds.train) imgs.push_back(srf_project(item.h_hr, net.srf()));
    pretrain_flow(net, imgs, cfg.seed, cfg.flow_pretrain_steps, cfg.flow_pretrain_lr);
  }

  AdamWOptions<T> opts;
  opts.lr = static_cast<T>(cfg.lr);
  opts.weight_decay = static_cast<T>(cfg.weight_decay);
  AdamW<T> opt(net.params(), opts);
  Rng order_rng = Rng(cfg.seed).fork(4);

  TrainOutput out;
  out.loss_curve_path = (out_dir / (tag + "_loss.csv")).string();
  std::ofstream curve(out.loss_curve_path);
  curve << "epoch,step,item,loss\n";

  std::vector<int> order(ds.train.size());
  long step = 0;
  const int total_epochs = cfg.hr_pretrain_epochs + cfg.epochs;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool hr_phase = epoch < cfg.hr_pretrain_epochs;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = order_rng.uniform_int(i + 1);
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (int idx : order) {
      const auto& item = ds.train[static_cast<std::size_t>(idx)];
      // HR warmup swaps the upsampled LR input for the HR cube itself
      const HsiCube up = hr_phase ? item.h_hr : bicubic_resize(item.h_lr, cfg.scale);
      const RgbImage r_hsi = srf_project(up, net.srf());
      const auto target = cube_to_tensor<T>(item.h_hr);

      net.params().zero_grads();
      const auto result = net.forward(cube_to_tensor<T>(up), rgb_to_tensor<T>(item.r_ref),
                                      rgb_to_tensor<T>(r_hsi), flags);
      const auto loss = smooth_l1(result.sr, target);
      const double loss_value = static_cast<double>(loss.value());
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                 ", item " + item.id);
      }
      backward(loss);
      try {
        opt.step();
      } catch (const NonFiniteGradient& e) {
        throw std::runtime_error("train: step " + std::to_string(step) + ", item " + item.id +
                                 ": " + e.what());
      }
      out.losses.push_back(static_cast<float>(loss_value));
      curve << epoch << "," << step << "," << item.id << "," << std::setprecision(9)
            << static_cast<float>(loss_value) << "\n";
      ++step;
    }
    CheckpointMeta meta{static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(cfg.scale),
                        static_cast<std::uint32_t>(cfg.bands)};
    char name[64];
    std::snprintf(name, sizeof(name), "%s_epoch_%03d.hsfn", tag.c_str(), epoch);
    save_checkpoint((out_dir / name).string(), net.params(), meta);
  }
  CheckpointMeta meta{static_cast<std::uint32_t>(total_epochs),
                      static_cast<std::uint32_t>(cfg.scale), static_cast<std::uint32_t>(cfg.bands)};
  out.checkpoint_path = (out_dir / (tag + ".hsfn")).string();
  save_checkpoint(out.checkpoint_path, net.params(), meta, &opt);
  curve.close();
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string id;
  double psnr = 0, ssim = 0, sam = 0;
  double psnr_bicubic = 0, ssim_bicubic = 0, sam_bicubic = 0;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  EvalRow mean;
  std::string report_path;
  std::string band_report_path;
};

namespace detail {

inline void write_eval_row(std::ostream& os, const EvalRow& r) {
  os << r.id << "," << std::setprecision(10) << r.psnr << "," << r.ssim << "," << r.sam << ","
     << r.psnr_bicubic << "," << r.ssim_bicubic << "," << r.sam_bicubic << "\n";
}

}  // namespace detail

/// Deterministic test-set evaluation: per-item and mean PSNR/SSIM/SAM for
/// the model and the bicubic baseline, per-band curves, and PPM visual
/// triplets (reference, bicubic, output).
template <typename T>
inline EvalSummary evaluate_loop(const ExperimentConfig& cfg, const Dataset& ds,
                                 const HsifnNet<T>& net, const AblationFlags& flags = {},
                                 const std::string& tag = "model", bool write_visuals = true) {
  const auto out_dir = resolve_out_dir(cfg);
  EvalSummary summary;
  std::vector<double> band_psnr(static_cast<std::size_t>(cfg.bands), 0.0);
  std::vector<double> band_ssim(static_cast<std::size_t>(cfg.bands), 0.0);

  for (const auto& item : ds.test) {
    const HsiCube sr = hsifn_forward(item.h_lr, item.r_ref, net, cfg.scale, flags);
    const HsiCube bic = bicubic_resize(item.h_lr, cfg.scale);
    EvalRow row;
    row.id = item.id;
    row.psnr = psnr(sr, item.h_hr);
    row.ssim = ssim(sr, item.h_hr);
    row.sam = sam(sr, item.h_hr);
    row.psnr_bicubic = psnr(bic, item.h_hr);
    row.ssim_bicubic = ssim(bic, item.h_hr);
    row.sam_bicubic = sam(bic, item.h_hr);
    summary.rows.push_back(row);

    const auto pb = psnr_per_band(sr, item.h_hr);
    const auto sb = ssim_per_band(sr, item.h_hr);
    for (int b = 0; b < cfg.bands; ++b) {
      band_psnr[static_cast<std::size_t>(b)] += pb[static_cast<std::size_t>(b)];
      band_ssim[static_cast<std::size_t>(b)] += sb[static_cast<std::size_t>(b)];
    }
    if (write_visuals) {
      export_ppm(item.r_ref, (out_dir / (item.id + "_ref.ppm")).string());
      export_ppm(srf_project(bic, net.srf()), (out_dir / (item.id + "_bicubic.ppm")).string());
      export_ppm(srf_project(sr, net.srf()), (out_dir / (item.id + "_out.ppm")).string());
    }
  }

  summary.mean.id = "mean";
  for (const auto& r : summary.rows) {
    summary.mean.psnr += r.psnr;
    summary.mean.ssim += r.ssim;
    summary.mean.sam += r.sam;
    summary.mean.psnr_bicubic += r.psnr_bicubic;
    summary.mean.ssim_bicubic += r.ssim_bicubic;
    summary.mean.sam_bicubic += r.sam_bicubic;
  }
  const double n = static_cast<double>(summary.rows.size());
  summary.mean.psnr /= n;
  summary.mean.ssim /= n;
  summary.mean.sam /= n;
  summary.mean.psnr_bicubic /= n;
  summary.mean.ssim_bicubic /= n;
  summary.mean.sam_bicubic /= n;

  summary.report_path = (out_dir / (tag + "_report.csv")).string();
  std::ofstream report(summary.report_path);
  report << "id,psnr,ssim,sam,psnr_bicubic,ssim_bicubic,sam_bicubic\n";
  for (const auto& r : summary.rows) detail::write_eval_row(report, r);
  detail::write_eval_row(report, summary.mean);

  summary.band_report_path = (out_dir / (tag + "_bands.csv")).string();
  std::ofstream bands(summary.band_report_path);
  bands << "band,psnr,ssim\n";
  for (int b = 0; b < cfg.bands; ++b) {
    bands << b << "," << std::setprecision(10) << band_psnr[static_cast<std::size_t>(b)] / n << ","
          << band_ssim[static_cast<std::size_t>(b)] / n << "\n";
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

inline AblationFlags ablation_flags(const std::string& variant) {
  if (variant == "full") return {true, true, true};
  if (variant == "no_align") return {false, true, true};
  if (variant == "no_attention") return {true, false, true};
  if (variant == "sisr_only") return {true, true, false};
  throw ContractViolation("ablate: unknown variant '" + variant + "'");
}

struct AblateResult {
  std::vector<std::pair<std::string, EvalRow>> rows;  // variant -> mean metrics
  std::string report_path;
};

/// Trains and evaluates each variant from the same seed and dataset.
/// no_align zeroes all flows, no_attention fixes W == 1, sisr_only zeroes
/// the reference features.
template <typename T>
inline AblateResult ablate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                           const Dataset& ds) {
  const auto out_dir = resolve_out_dir(cfg);
  const Srf srf = config_srf(cfg);
  AblateResult result;
  for (const auto& variant : variants) {
    const auto flags = ablation_flags(variant);
    HsifnNet<T> net(cfg.net, srf, cfg.seed);
    train_loop(cfg, ds, net, flags, variant);
    const auto summary = evaluate_loop(cfg, ds, net, flags, variant, false);
    result.rows.emplace_back(variant, summary.mean);
  }
  result.report_path = (out_dir / "ablation.csv").string();
  std::ofstream os(result.report_path);
  os << "variant,psnr,ssim,sam,psnr_bicubic,ssim_bicubic,sam_bicubic\n";
  for (const auto& [variant, row] : result.rows) {
    os << variant << "," << std::setprecision(10) << row.psnr << "," << row.ssim << "," << row.sam
       << "," << row.psnr_bicubic << "," << row.ssim_bicubic << "," << row.sam_bicubic << "\n";
  }
  return result;
}

}  // namespace hsifuse
