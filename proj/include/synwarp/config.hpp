#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "synwarp/common.hpp"

namespace synwarp {

// Flat run configuration. Every field has a default; unknown JSON keys are an
// error so typos cannot silently fall back to defaults.
struct Config {
  // model geometry
  int keypoints = 21;
  int image_size = 64;        // square; feature/latent grids are image_size/4
  int feature_channels = 4;   // C of the appearance volume
  int feature_depth = 2;      // D of the appearance volume (1 in 2D mode)
  int keypoint_dim = 3;       // 2 => depth collapsed, z-coordinates zeroed
  int ck = 16;                // keypoint-latent channels
  int cv = 32;                // texture-latent channels
  int cf = 32;                // fused-feature channels
  int dense_hidden = 32;      // dense-motion net hidden width
  int mask_hidden = 16;       // confidence-mask net hidden width
  int app_hidden = 16;        // appearance-encoder hidden width
  int mot_hidden = 24;        // motion-encoder trunk width
  int dec_c1 = 32;            // decoder stage channels
  int dec_c2 = 16;
  int max_refs = 4;
  double sigma2 = 0.01;
  std::string motion_mode = "oracle";  // or "learned"
  std::string fusion = "cgf";          // cgf | concat | sum | sum-mask

  // training
  int epochs = 15;
  int warmup_epochs = -1;  // -1 => epochs/5
  int batch_size = 4;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lambda_rec = 1.0;
  double lambda_p = 1.0;
  double lambda_g = 0.0;
  bool gan = false;
  int pyramid_levels = 3;
  int refs_count = 1;
  double holdout_frac = 0.1;
  std::uint64_t seed = 1234;
  int threads = 1;

  int feature_hw() const { return image_size / 4; }
  int latent_hw() const { return image_size / 4; }
  int heatmap_size() const { return image_size; }  // grid fed to the keypoint encoder
  int warmup() const { return warmup_epochs >= 0 ? warmup_epochs : std::max(1, epochs / 5); }

  void validate() const {
    check_arg(keypoints >= 1, "keypoints must be >= 1");
    check_arg(image_size >= 8 && image_size % 4 == 0, "image_size must be a multiple of 4, >= 8");
    check_arg(feature_channels >= 1 && feature_depth >= 1, "feature dims must be >= 1");
    check_arg(keypoint_dim == 2 || keypoint_dim == 3, "keypoint_dim must be 2 or 3");
    check_arg(keypoint_dim == 3 || feature_depth == 1, "2D mode requires feature_depth == 1");
    check_arg(cf == cv, "cf must equal cv (fusion operates on matching channel counts)");
    check_arg(fusion == "cgf" || fusion == "concat" || fusion == "sum" || fusion == "sum-mask",
              "unknown fusion variant: " + fusion);
    check_arg(motion_mode == "oracle" || motion_mode == "learned",
              "motion_mode must be oracle or learned");
    check_arg(sigma2 > 0.0, "sigma2 must be positive");
    check_arg(epochs >= 1 && batch_size >= 1, "epochs and batch_size must be >= 1");
    check_arg(warmup_epochs <= epochs, "warmup_epochs cannot exceed epochs");
    check_arg(refs_count >= 1 && refs_count <= max_refs, "refs_count must be in [1, max_refs]");
    check_arg(lambda_rec >= 0 && lambda_p >= 0 && lambda_g >= 0, "loss weights must be >= 0");
    check_arg(lambda_rec + lambda_p + lambda_g > 0, "at least one loss weight must be positive");
    check_arg(pyramid_levels >= 1, "pyramid_levels must be >= 1");
    check_arg(holdout_frac >= 0.0 && holdout_frac < 1.0, "holdout_frac must be in [0,1)");
    check_arg(threads >= 1, "threads must be >= 1");
  }

  static Config from_json(const nlohmann::json& j) {
    Config c;
    static const std::set<std::string> known = {
        "keypoints",     "image_size",  "feature_channels", "feature_depth", "keypoint_dim",
        "ck",            "cv",          "cf",               "dense_hidden",  "mask_hidden",
        "app_hidden",    "mot_hidden",  "dec_c1",           "dec_c2",        "max_refs",
        "sigma2",        "motion_mode", "fusion",           "epochs",        "warmup_epochs",
        "batch_size",    "lr",          "beta1",            "beta2",         "eps",
        "lambda_rec",    "lambda_p",    "lambda_g",         "gan",           "pyramid_levels",
        "refs_count",    "holdout_frac", "seed",            "threads"};
    check_arg(j.is_object(), "config root must be a JSON object");
    for (const auto& [key, _] : j.items())
      check_arg(known.count(key) > 0, "unknown config field: " + key);
    auto geti = [&](const char* k, int d) { return j.value(k, d); };
    auto getd = [&](const char* k, double d) { return j.value(k, d); };
    c.keypoints = geti("keypoints", c.keypoints);
    c.image_size = geti("image_size", c.image_size);
    c.feature_channels = geti("feature_channels", c.feature_channels);
    c.feature_depth = geti("feature_depth", c.feature_depth);
    c.keypoint_dim = geti("keypoint_dim", c.keypoint_dim);
    if (c.keypoint_dim == 2 && !j.contains("feature_depth")) c.feature_depth = 1;
    c.ck = geti("ck", c.ck);
    c.cv = geti("cv", c.cv);
    c.cf = geti("cf", c.cf);
    c.dense_hidden = geti("dense_hidden", c.dense_hidden);
    c.mask_hidden = geti("mask_hidden", c.mask_hidden);
    c.app_hidden = geti("app_hidden", c.app_hidden);
    c.mot_hidden = geti("mot_hidden", c.mot_hidden);
    c.dec_c1 = geti("dec_c1", c.dec_c1);
    c.dec_c2 = geti("dec_c2", c.dec_c2);
    c.max_refs = geti("max_refs", c.max_refs);
    c.sigma2 = getd("sigma2", c.sigma2);
    c.motion_mode = j.value("motion_mode", c.motion_mode);
    c.fusion = j.value("fusion", c.fusion);
    c.epochs = geti("epochs", c.epochs);
    c.warmup_epochs = geti("warmup_epochs", c.warmup_epochs);
    c.batch_size = geti("batch_size", c.batch_size);
    c.lr = getd("lr", c.lr);
    c.beta1 = getd("beta1", c.beta1);
    c.beta2 = getd("beta2", c.beta2);
    c.eps = getd("eps", c.eps);
    c.lambda_rec = getd("lambda_rec", c.lambda_rec);
    c.lambda_p = getd("lambda_p", c.lambda_p);
    c.lambda_g = getd("lambda_g", c.lambda_g);
    c.gan = j.value("gan", c.gan);
    c.pyramid_levels = geti("pyramid_levels", c.pyramid_levels);
    c.refs_count = geti("refs_count", c.refs_count);
    c.holdout_frac = getd("holdout_frac", c.holdout_frac);
    c.seed = j.value("seed", c.seed);
    c.threads = geti("threads", c.threads);
    c.validate();
    return c;
  }

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("config parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"keypoints", keypoints},
                          {"image_size", image_size},
                          {"feature_channels", feature_channels},
                          {"feature_depth", feature_depth},
                          {"keypoint_dim", keypoint_dim},
                          {"ck", ck},
                          {"cv", cv},
                          {"cf", cf},
                          {"dense_hidden", dense_hidden},
                          {"mask_hidden", mask_hidden},
                          {"app_hidden", app_hidden},
                          {"mot_hidden", mot_hidden},
                          {"dec_c1", dec_c1},
                          {"dec_c2", dec_c2},
                          {"max_refs", max_refs},
                          {"sigma2", sigma2},
                          {"motion_mode", motion_mode},
                          {"fusion", fusion},
                          {"epochs", epochs},
                          {"warmup_epochs", warmup_epochs},
                          {"batch_size", batch_size},
                          {"lr", lr},
                          {"beta1", beta1},
                          {"beta2", beta2},
                          {"eps", eps},
                          {"lambda_rec", lambda_rec},
                          {"lambda_p", lambda_p},
                          {"lambda_g", lambda_g},
                          {"gan", gan},
                          {"pyramid_levels", pyramid_levels},
                          {"refs_count", refs_count},
                          {"holdout_frac", holdout_frac},
                          {"seed", seed},
                          {"threads", threads}};
  }

  // FNV-1a over the canonical serialized form; stored in checkpoints so a
  // resumed evaluation can detect a mismatched configuration.
  std::uint64_t hash() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

}  // namespace synwarp
