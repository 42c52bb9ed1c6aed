// hsifuse: synthetic-scene generation, degradation, registration, training,
// evaluation, ablation and metrics for reference-guided hyperspectral
// super-resolution. All randomness flows from --seed; outputs resolve under
// $HSIFUSE_OUT when set.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsifuse/checkpoint.hpp"
#include "hsifuse/io.hpp"
#include "hsifuse/metrics.hpp"
#include "hsifuse/model.hpp"
#include "hsifuse/pipeline.hpp"
#include "hsifuse/registration.hpp"

namespace hf = hsifuse;
namespace fs = std::filesystem;

namespace {

hf::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  hf::ExperimentConfig cfg = path.empty() ? hf::ExperimentConfig{} : hf::parse_config_file(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

// register accepts HSIC or PPM inputs; cubes are rendered to RGB first.
hf::RgbImage load_rgb_any(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") return hf::read_ppm(path);
  const auto cube = hf::read_cube(path);
  return hf::srf_project(cube, hf::default_srf(cube.bands));
}

int cmd_simulate(const hf::ExperimentConfig& cfg) {
  const auto out_dir = hf::resolve_out_dir(cfg);
  const int total = cfg.train_scenes + cfg.test_scenes;
  const hf::Rng base(cfg.seed);
  for (int k = 0; k < total; ++k) {
    const auto pair =
        hf::synth_scene(base.fork(1000 + static_cast<std::uint64_t>(k)).next_u64(), cfg.bands,
                        cfg.scene_size, cfg.scene_size, cfg.max_disp);
    char name[64];
    std::snprintf(name, sizeof(name), "scene_%03d_hr.hsic", k);
    hf::write_cube(pair.hr_cube, (out_dir / name).string());
    std::snprintf(name, sizeof(name), "scene_%03d_ref.hsic", k);
    hf::write_cube(pair.ref_cube, (out_dir / name).string());
    std::snprintf(name, sizeof(name), "scene_%03d_flow.flow", k);
    hf::write_flow(pair.gt_flow, (out_dir / name).string());
  }
  const auto srf = hf::config_srf(cfg);
  const auto ds = hf::build_dataset(cfg, srf);
  std::ofstream manifest(out_dir / "manifest.csv");
  manifest << ds.manifest;
  std::cout << "wrote " << total << " scenes to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const hf::ExperimentConfig& cfg, const std::string& variant) {
  const auto srf = hf::config_srf(cfg);
  const auto ds = hf::build_dataset(cfg, srf);
  const auto out_dir = hf::resolve_out_dir(cfg);
  std::ofstream manifest(out_dir / "manifest.csv");
  manifest << ds.manifest;
  manifest.close();

  hf::HsifnNet<float> net(cfg.net, srf, cfg.seed);
  const auto flags = hf::ablation_flags(variant);
  const auto out = hf::train_loop(cfg, ds, net, flags, variant);
  std::cout << "checkpoint: " << out.checkpoint_path << "\n";
  std::cout << "loss_curve: " << out.loss_curve_path << "\n";
  if (!out.losses.empty()) {
    std::cout << "final_loss: " << out.losses.back() << "\n";
  }
  return 0;
}

int cmd_evaluate(const hf::ExperimentConfig& cfg, const std::string& checkpoint,
                 const std::string& variant) {
  const auto srf = hf::config_srf(cfg);
  const auto ds = hf::build_dataset(cfg, srf);
  hf::HsifnNet<float> net(cfg.net, srf, cfg.seed);
  hf::load_checkpoint(checkpoint, net.params());
  const auto summary = hf::evaluate_loop(cfg, ds, net, hf::ablation_flags(variant), variant);
  std::cout << "report: " << summary.report_path << "\n";
  std::cout << "mean_psnr: " << summary.mean.psnr << " (bicubic " << summary.mean.psnr_bicubic
            << ")\n";
  std::cout << "mean_ssim: " << summary.mean.ssim << "\n";
  std::cout << "mean_sam: " << summary.mean.sam << "\n";
  return 0;
}

int cmd_ablate(const hf::ExperimentConfig& cfg, const std::string& variants_csv) {
  std::vector<std::string> variants;
  std::stringstream ss(variants_csv);
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (!v.empty()) variants.push_back(v);
  }
  const auto srf = hf::config_srf(cfg);
  const auto ds = hf::build_dataset(cfg, srf);
  const auto result = hf::ablate<float>(cfg, variants, ds);
  std::cout << "report: " << result.report_path << "\n";
  for (const auto& [name, row] : result.rows) {
    std::cout << name << ": psnr " << row.psnr << ", ssim " << row.ssim << ", sam " << row.sam
              << "\n";
  }
  return 0;
}

int cmd_infer(const hf::ExperimentConfig& cfg, const std::string& checkpoint,
              const std::string& input, const std::string& ref, const std::string& output,
              const std::string& preview) {
  const auto lr = hf::read_cube(input);
  const auto ref_img = hf::read_ppm(ref);
  hf::Srf srf = cfg.srf_csv.empty() ? hf::default_srf(lr.bands) : hf::load_srf_csv(cfg.srf_csv);
  hf::HsifnNet<float> net(cfg.net, srf, cfg.seed);
  hf::load_checkpoint(checkpoint, net.params());
  const auto sr = hf::hsifn_forward(lr, ref_img, net, cfg.scale);
  hf::write_cube(sr, output);
  if (!preview.empty()) hf::export_ppm(hf::srf_project(sr, srf), preview);
  std::cout << "wrote " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unaligned hyperspectral image fusion toolkit"};
  app.require_subcommand(1);

  std::string config_path, variant = "full";
  std::optional<std::uint64_t> seed;

  auto add_config = [&](CLI::App* cmd, bool required = false) {
    auto* opt = cmd->add_option("--config", config_path, "key = value configuration file");
    if (required) opt->required();
    cmd->add_option("--seed", seed, "override the configured seed");
  };

  auto* sim = app.add_subcommand("simulate", "generate synthetic unaligned scene pairs");
  add_config(sim);

  auto* deg = app.add_subcommand("degrade", "Gaussian blur + decimation of a cube");
  std::string deg_in, deg_out;
  int deg_scale = 4, blur_size = 8;
  double blur_sigma = 3.0;
  deg->add_option("--input", deg_in, "input HSIC cube")->required();
  deg->add_option("--output", deg_out, "output HSIC cube")->required();
  deg->add_option("--scale", deg_scale, "decimation factor (4, 8 or 16)");
  deg->add_option("--blur-size", blur_size, "Gaussian window size");
  deg->add_option("--blur-sigma", blur_sigma, "Gaussian sigma");

  auto* reg = app.add_subcommand("register", "coarse affine registration of two images");
  std::string reg_src, reg_dst, reg_prefix = "registered";
  int reg_iters = 1000;
  double reg_tol = 2.0;
  std::uint64_t reg_seed = 0;
  reg->add_option("--source", reg_src, "source image (HSIC or PPM)")->required();
  reg->add_option("--target", reg_dst, "target image (HSIC or PPM)")->required();
  reg->add_option("--output-prefix", reg_prefix, "prefix for affine CSV and warped PPM");
  reg->add_option("--iters", reg_iters, "RANSAC iterations");
  reg->add_option("--tol", reg_tol, "RANSAC inlier tolerance in pixels");
  reg->add_option("--seed", reg_seed, "RANSAC seed");

  auto* train = app.add_subcommand("train", "train the fusion network");
  add_config(train, true);
  train->add_option("--variant", variant, "full | no_align | no_attention | sisr_only");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  std::string ckpt_path;
  add_config(eval, true);
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--variant", variant, "variant wiring used at inference");

  auto* abl = app.add_subcommand("ablate", "train and compare ablation variants");
  std::string variants_csv = "full,no_attention,no_align,sisr_only";
  add_config(abl, true);
  abl->add_option("--variants", variants_csv, "comma-separated variant list");

  auto* inf = app.add_subcommand("infer", "super-resolve one cube with a reference image");
  std::string inf_in, inf_ref, inf_out, inf_preview;
  add_config(inf);
  inf->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inf->add_option("--input", inf_in, "LR HSIC cube")->required();
  inf->add_option("--ref", inf_ref, "HR reference PPM")->required();
  inf->add_option("--output", inf_out, "output HSIC path")->required();
  inf->add_option("--preview", inf_preview, "optional RGB preview PPM");

  auto* met = app.add_subcommand("metrics", "PSNR/SSIM/SAM between two cubes");
  std::string met_a, met_b, met_id = "pair";
  met->add_option("--a", met_a, "first HSIC cube")->required();
  met->add_option("--b", met_b, "second HSIC cube")->required();
  met->add_option("--id", met_id, "row identifier");

  auto* viz = app.add_subcommand("flow-viz", "render a flow field with the flow color wheel");
  std::string viz_in, viz_out;
  double viz_max = -1.0;
  viz->add_option("--input", viz_in, "FLOW file")->required();
  viz->add_option("--output", viz_out, "output PPM")->required();
  viz->add_option("--max-mag", viz_max, "normalization magnitude (default: field max)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(load_config(config_path, seed));
    if (deg->parsed()) {
      const auto cube = hf::read_cube(deg_in);
      hf::write_cube(hf::degrade(cube, deg_scale, blur_size, blur_sigma), deg_out);
      std::cout << "wrote " << deg_out << "\n";
      return 0;
    }
    if (reg->parsed()) {
      const auto src = load_rgb_any(reg_src);
      const auto dst = load_rgb_any(reg_dst);
      const auto res = hf::register_images(src, dst, 200, reg_iters, reg_tol, hf::Rng(reg_seed));
      const auto& m = res.model;
      std::ofstream csv(reg_prefix + "_affine.csv");
      char line[256];
      std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g", m.a, m.b, m.tx,
                    m.c, m.d, m.ty);
      csv << line << "\n";
      hf::export_ppm(hf::warp_affine(src, m), reg_prefix + "_warped.ppm");
      std::cout << line << "\n";
      std::cout << "inliers: " << res.inlier_count << "\n";
      return 0;
    }
    if (train->parsed()) return cmd_train(load_config(config_path, seed), variant);
    if (eval->parsed()) return cmd_evaluate(load_config(config_path, seed), ckpt_path, variant);
    if (abl->parsed()) return cmd_ablate(load_config(config_path, seed), variants_csv);
    if (inf->parsed()) {
      return cmd_infer(load_config(config_path, seed), ckpt_path, inf_in, inf_ref, inf_out,
                       inf_preview);
    }
    if (met->parsed()) {
      const auto a = hf::read_cube(met_a);
      const auto b = hf::read_cube(met_b);
      std::cout << "id,psnr,ssim,sam\n";
      std::cout << met_id << "," << std::setprecision(10) << hf::psnr(a, b) << ","
                << hf::ssim(a, b) << "," << hf::sam(a, b) << "\n";
      return 0;
    }
    if (viz->parsed()) {
      hf::export_ppm(hf::flow_to_color(hf::read_flow(viz_in), static_cast<float>(viz_max)),
                     viz_out);
      std::cout << "wrote " << viz_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
