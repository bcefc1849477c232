#pragma once

#include <cctype>
#include <iomanip>
#include <sstream>

#include "synwarp/eval.hpp"
#include "synwarp/train.hpp"

// Single-axis ablation sweeps: each axis spawns one variant per value (axes
// are unioned, not crossed), every variant trains and evaluates under the
// same seed and data, and the results land in a fixed-width table plus a
// JSON report.

namespace synwarp {

struct AblationVariant {
  std::string name;
  Config cfg;
};

namespace ablate_detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace ablate_detail

// Axis specs look like "fusion=cgf,concat,sum,sum-mask"; several specs may be
// given (or joined with ';'). Axes: fusion, keypoint-dim (2D/3D), R (1/2).
inline std::vector<AblationVariant> expand_ablation(const Config& base,
                                                    const std::vector<std::string>& axis_specs) {
  std::vector<AblationVariant> variants;
  for (const std::string& joined : axis_specs) {
    for (const std::string& spec : ablate_detail::split(joined, ';')) {
      if (spec.empty()) continue;
      const auto eq = spec.find('=');
      check_arg(eq != std::string::npos, "ablation axis must look like name=v1,v2: " + spec);
      const std::string axis = spec.substr(0, eq);
      const std::vector<std::string> values = ablate_detail::split(spec.substr(eq + 1), ',');
      check_arg(!values.empty() && !values.front().empty(),
                "ablation axis needs at least one value: " + spec);
      for (const std::string& v : values) {
        Config cfg = base;
        if (axis == "fusion") {
          check_arg(v == "cgf" || v == "sum" || v == "sum-mask" || v == "concat",
                    "unknown fusion variant: " + v);
          cfg.fusion = v;
        } else if (axis == "keypoint-dim") {
          if (v == "2D" || v == "2d") {
            cfg.keypoint_dim = 2;
            cfg.feature_depth = 1;
          } else if (v == "3D" || v == "3d") {
            cfg.keypoint_dim = 3;
          } else {
            throw std::invalid_argument("keypoint-dim must be 2D or 3D: " + v);
          }
        } else if (axis == "R") {
          const int r = std::stoi(v);
          check_arg(r >= 1 && r <= cfg.max_refs, "R out of range: " + v);
          cfg.refs_count = r;
        } else {
          throw std::invalid_argument("unknown ablation axis: " + axis);
        }
        cfg.validate();
        variants.push_back({axis + "=" + v, cfg});
      }
    }
  }
  check_arg(!variants.empty(), "no ablation variants requested");
  return variants;
}

struct AblationRow {
  std::string name;
  double psnr = 0, ssim = 0, l1 = 0;
};

struct AblationOutcome {
  std::vector<AblationRow> rows;
  SeqMetrics baseline;  // copy-source; model independent
  nlohmann::json report;
  std::string table;
};

inline AblationOutcome run_ablation(const Config& base, const std::filesystem::path& data_dir,
                                    const std::vector<std::string>& axis_specs,
                                    const std::filesystem::path& work_dir,
                                    std::ostream* progress = nullptr) {
  const std::vector<AblationVariant> variants = expand_ablation(base, axis_specs);
  std::filesystem::create_directories(work_dir);
  AblationOutcome out;
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationVariant& var : variants) {
    if (progress) (*progress) << "[ablate] " << var.name << "\n";
    const std::filesystem::path ckpt =
        work_dir / ("ablate_" + ablate_detail::sanitize(var.name) + ".swnb");
    train(var.cfg, data_dir, ckpt, progress);
    const Checkpoint ck = load_checkpoint(ckpt);
    const SelfEvalOutcome ev = self_reenact_eval(ck, data_dir, var.cfg.refs_count);
    AblationRow row{var.name, ev.overall.psnr, ev.overall.ssim, ev.overall.l1};
    out.rows.push_back(row);
    out.baseline = ev.baseline;
    rows.push_back({{"name", row.name},
                    {"lpips", "n/a"},
                    {"psnr", eval_detail::metric_json(row.psnr)},
                    {"ssim", eval_detail::metric_json(row.ssim)},
                    {"l1", eval_detail::metric_json(row.l1)},
                    {"temporal", eval_detail::metric_json(ev.overall.temporal)}});
  }
  out.report = nlohmann::json{{"config", base.to_json()},
                              {"rows", rows},
                              {"baseline", eval_detail::row_json(out.baseline, false)}};

  std::ostringstream tab;
  tab << std::left << std::setw(22) << "variant" << std::right << std::setw(8) << "lpips"
      << std::setw(10) << "psnr" << std::setw(10) << "ssim" << std::setw(10) << "l1" << "\n";
  tab << std::string(60, '-') << "\n";
  auto line = [&tab](const std::string& name, const std::string& lpips, double p, double s,
                     double l) {
    tab << std::left << std::setw(22) << name << std::right << std::setw(8) << lpips
        << std::setw(10) << std::fixed << std::setprecision(3) << p << std::setw(10)
        << std::setprecision(4) << s << std::setw(10) << std::setprecision(4) << l << "\n";
  };
  for (const AblationRow& r : out.rows) line(r.name, "n/a", r.psnr, r.ssim, r.l1);
  line("copy-source", "n/a", out.baseline.psnr, out.baseline.ssim, out.baseline.l1);
  out.table = tab.str();
  return out;
}

}  // namespace synwarp
