#pragma once

#include <chrono>

#include "synwarp/metrics.hpp"
#include "synwarp/model.hpp"
#include "synwarp/synth.hpp"
#include "synwarp/train.hpp"

// Self- and cross-reenactment evaluation over the held-out tail of a dataset,
// with the copy-source baseline and JSON reports.

namespace synwarp {

struct SeqMetrics {
  std::string name;
  std::vector<double> frame_psnr, frame_ssim, frame_l1;
  double psnr = 0, ssim = 0, l1 = 0, temporal = 0;
};

namespace eval_detail {

inline double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline nlohmann::json metric_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

inline nlohmann::json row_json(const SeqMetrics& m, bool with_frames) {
  nlohmann::json row{{"name", m.name},
                     {"psnr", metric_json(m.psnr)},
                     {"ssim", metric_json(m.ssim)},
                     {"l1", metric_json(m.l1)},
                     {"temporal", metric_json(m.temporal)}};
  if (with_frames) {
    nlohmann::json frames = nlohmann::json::array();
    for (size_t i = 0; i < m.frame_l1.size(); ++i)
      frames.push_back({{"psnr", metric_json(m.frame_psnr[i])},
                        {"ssim", metric_json(m.frame_ssim[i])},
                        {"l1", metric_json(m.frame_l1[i])}});
    row["frames"] = frames;
  }
  return row;
}

}  // namespace eval_detail

struct SelfEvalOutcome {
  std::vector<SeqMetrics> rows;  // one per evaluated sequence
  SeqMetrics overall;            // mean over all frames
  SeqMetrics baseline;           // copy-source predictor
  nlohmann::json report;
};

// Frame 0 is the source; every later frame is driving and ground truth.
inline SelfEvalOutcome self_reenact_eval(const Checkpoint& ck,
                                         const std::filesystem::path& data_dir, int refs) {
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetSplit split = split_counts(data_dir, ck.cfg.holdout_frac);
  SelfEvalOutcome out;
  out.overall.name = "overall";
  out.baseline.name = "copy-source";
  std::vector<double> seq_temporal, base_temporal;

  for (int id = split.train; id < split.total; ++id) {
    const SequenceRecord rec = read_sequence(data_dir, id);
    const int T = static_cast<int>(rec.frames.size());
    check_arg(T >= 2, "self_reenact_eval: sequences need at least 2 frames");
    SeqMetrics m;
    m.name = "seq_" + synth_detail::zero_pad(id);
    std::vector<Tensor> preds, gts, copies;
    for (int t = 1; t < T; ++t) {
      Tape tape;
      const Sample s = make_sample(rec, 0, t, refs);
      PipelineOut<float> po = run_inference(tape, ck.params, ck.cfg, s);
      preds.push_back(po.image->val);
      gts.push_back(rec.frames[static_cast<size_t>(t)]);
      copies.push_back(rec.frames[0]);
      m.frame_psnr.push_back(psnr(preds.back(), gts.back()));
      m.frame_ssim.push_back(ssim(preds.back(), gts.back()));
      m.frame_l1.push_back(l1_metric(preds.back(), gts.back()));
      out.baseline.frame_psnr.push_back(psnr(rec.frames[0], gts.back()));
      out.baseline.frame_ssim.push_back(ssim(rec.frames[0], gts.back()));
      out.baseline.frame_l1.push_back(l1_metric(rec.frames[0], gts.back()));
    }
    m.psnr = eval_detail::mean(m.frame_psnr);
    m.ssim = eval_detail::mean(m.frame_ssim);
    m.l1 = eval_detail::mean(m.frame_l1);
    m.temporal = preds.size() >= 2 ? temporal_consistency(preds, gts) : 0.0;
    seq_temporal.push_back(m.temporal);
    base_temporal.push_back(copies.size() >= 2 ? temporal_consistency(copies, gts) : 0.0);
    out.overall.frame_psnr.insert(out.overall.frame_psnr.end(), m.frame_psnr.begin(), m.frame_psnr.end());
    out.overall.frame_ssim.insert(out.overall.frame_ssim.end(), m.frame_ssim.begin(), m.frame_ssim.end());
    out.overall.frame_l1.insert(out.overall.frame_l1.end(), m.frame_l1.begin(), m.frame_l1.end());
    out.rows.push_back(std::move(m));
  }
  check_arg(!out.rows.empty(), "self_reenact_eval: no held-out sequences to evaluate");

  out.overall.psnr = eval_detail::mean(out.overall.frame_psnr);
  out.overall.ssim = eval_detail::mean(out.overall.frame_ssim);
  out.overall.l1 = eval_detail::mean(out.overall.frame_l1);
  out.overall.temporal = eval_detail::mean(seq_temporal);
  out.baseline.psnr = eval_detail::mean(out.baseline.frame_psnr);
  out.baseline.ssim = eval_detail::mean(out.baseline.frame_ssim);
  out.baseline.l1 = eval_detail::mean(out.baseline.frame_l1);
  out.baseline.temporal = eval_detail::mean(base_temporal);

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : out.rows) rows.push_back(eval_detail::row_json(r, true));
  rows.push_back(eval_detail::row_json(out.overall, false));
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report = nlohmann::json{{"config", ck.cfg.to_json()},
                              {"mode", "self"},
                              {"rows", rows},
                              {"baseline", eval_detail::row_json(out.baseline, false)},
                              {"wall_clock_sec", wall}};
  return out;
}

// ---- cross-reenactment: motion-transfer keypoint proxy, no pixel truth ----

// Drive `source_rec`'s identity with `driving_rec`'s motion; score the L1 gap
// between the driving ground-truth 2D keypoint projections and the keypoints
// the (frozen) motion encoder reads back from the generated frames.
inline double cross_pair_keypoint_gap(const Checkpoint& ck, const SequenceRecord& source_rec,
                                      const SequenceRecord& driving_rec, int refs) {
  const Config& cfg = ck.cfg;
  const int T = static_cast<int>(driving_rec.frames.size());
  double acc = 0.0;
  long count = 0;
  for (int t = 0; t < T; ++t) {
    Sample s = make_sample(source_rec, 0, 0, refs);
    s.driving = driving_rec.frames[static_cast<size_t>(t)];
    s.pd = driving_rec.params[static_cast<size_t>(t)];
    Tape tape;
    PipelineOut<float> po = run_inference(tape, ck.params, cfg, s);

    auto [xc_g, p_g] = encode_motion_plain(ck.params, cfg, po.image->val);
    Tensor extracted = transform_keypoints(xc_g, p_g);
    Tensor truth = transform_keypoints(source_rec.xc, s.pd);
    if (cfg.keypoint_dim == 2) {
      zero_z(extracted);
      zero_z(truth);
    }
    for (int k = 0; k < cfg.keypoints; ++k)
      for (int j = 0; j < 2; ++j) {
        acc += std::fabs(static_cast<double>(extracted[k * 3 + j]) - truth[k * 3 + j]);
        ++count;
      }
  }
  return acc / static_cast<double>(count);
}

struct CrossEvalOutcome {
  std::vector<std::pair<std::string, double>> rows;  // pair name -> keypoint gap
  nlohmann::json report;
};

// Pairs of distinct held-out sequence ids; disjoint consecutive pairs by default.
inline std::vector<std::pair<int, int>> default_cross_pairs(const DatasetSplit& split) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = split.train; a + 1 < split.total; a += 2) pairs.emplace_back(a, a + 1);
  return pairs;
}

inline CrossEvalOutcome cross_reenact_eval(const Checkpoint& ck,
                                           const std::filesystem::path& data_dir,
                                           std::vector<std::pair<int, int>> pairs, int refs) {
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetSplit split = split_counts(data_dir, ck.cfg.holdout_frac);
  if (pairs.empty()) pairs = default_cross_pairs(split);
  check_arg(!pairs.empty(), "cross_reenact_eval: need at least 2 held-out sequences");
  CrossEvalOutcome out;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [a, b] : pairs) {
    check_arg(a != b, "cross_reenact_eval: pair ids must differ");
    const SequenceRecord ra = read_sequence(data_dir, a), rb = read_sequence(data_dir, b);
    const double gap = cross_pair_keypoint_gap(ck, ra, rb, refs);
    const std::string name =
        "seq_" + synth_detail::zero_pad(a) + "->seq_" + synth_detail::zero_pad(b);
    out.rows.emplace_back(name, gap);
    rows.push_back({{"name", name},
                    {"psnr", "n/a"},
                    {"ssim", "n/a"},
                    {"l1", gap},
                    {"temporal", "n/a"}});
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report = nlohmann::json{{"config", ck.cfg.to_json()},
                              {"mode", "cross"},
                              {"rows", rows},
                              {"baseline", nullptr},
                              {"wall_clock_sec", wall}};
  return out;
}

}  // namespace synwarp
