#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "synwarp/synwarp.hpp"

namespace {

using namespace synwarp;

struct FrameRef {
  std::filesystem::path root;
  int seq = -1;
  int frame = -1;
};

int parse_tagged_index(const std::string& name, const std::string& prefix,
                       const std::string& suffix) {
  if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
      name.substr(name.size() - suffix.size()) != suffix)
    throw IoError("expected a path component like " + prefix + "NNNN" + suffix + ", got: " + name);
  return std::stoi(name.substr(prefix.size(), name.size() - prefix.size() - suffix.size()));
}

// ROOT/seq_NNNN/frame_MMMM.ppm -> dataset root, sequence id, frame index.
FrameRef parse_frame_path(const std::filesystem::path& p) {
  FrameRef r;
  r.frame = parse_tagged_index(p.filename().string(), "frame_", ".ppm");
  r.seq = parse_tagged_index(p.parent_path().filename().string(), "seq_", "");
  r.root = p.parent_path().parent_path();
  return r;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string frame_name(const std::string& stem, int i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return stem + buf + ext;
}

void write_report(const std::filesystem::path& path, const nlohmann::json& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open report file: " + path.string());
  out << report.dump(2) << "\n";
}

int run_gen_data(const std::string& out, int seqs, int frames, int size, int keypoints,
                 std::uint64_t seed) {
  SceneSpec spec;
  spec.size = size;
  spec.keypoints = keypoints;
  gen_dataset(out, seqs, frames, spec, seed);
  std::cout << "wrote " << seqs << " sequences x " << frames << " frames (" << size << "x" << size
            << ", " << keypoints << " keypoints) to " << out << "\n";
  return 0;
}

int run_train(const std::string& config, const std::string& data, const std::string& out) {
  const Config cfg = Config::from_file(config);
  const TrainResult res = train(cfg, data, out, &std::cout);
  std::cout << "trained " << res.epochs.size() << " epochs; checkpoint: " << out << "\n";
  return 0;
}

int run_animate(const std::string& ckpt_path, const std::string& source,
                const std::string& driving, const std::string& refs, const std::string& out,
                const std::string& fusion, bool dump_flow, bool dump_mask) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  if (!fusion.empty()) {
    ck.cfg.fusion = fusion;
    ck.cfg.validate();
  }
  const std::filesystem::path ddir(driving);
  const int dseq = parse_tagged_index(ddir.filename().string(), "seq_", "");
  const SequenceRecord drec = read_sequence(ddir.parent_path(), dseq);
  const int T = static_cast<int>(drec.frames.size());

  Sample s;
  s.source = read_ppm(source);
  const std::vector<std::string> ref_paths = split_commas(refs);
  check_arg(!ref_paths.empty(), "animate: at least one reference image required");
  for (const std::string& rp : ref_paths) s.ref_images.push_back(read_ppm(rp));

  const bool oracle = ck.cfg.motion_mode == "oracle";
  if (oracle) {
    const FrameRef sref = parse_frame_path(source);
    const SequenceRecord srec = read_sequence(sref.root, sref.seq);
    s.xc = srec.xc;
    s.ps = srec.params.at(static_cast<size_t>(sref.frame));
    for (const std::string& rp : ref_paths) {
      const FrameRef rr = parse_frame_path(rp);
      const SequenceRecord rrec = read_sequence(rr.root, rr.seq);
      s.pr.push_back(rrec.params.at(static_cast<size_t>(rr.frame)));
    }
  }

  const std::filesystem::path odir(out);
  std::filesystem::create_directories(odir);
  for (int t = 0; t < T; ++t) {
    s.driving = drec.frames[static_cast<size_t>(t)];
    if (oracle) s.pd = drec.params[static_cast<size_t>(t)];
    Tape tape;
    const PipelineOut<float> po = run_inference(tape, ck.params, ck.cfg, s);
    write_ppm(odir / frame_name("frame_", t, ".ppm"), po.image->val);
    if (dump_flow) {
      Bundle fb;
      fb.f32["flow"] = po.flow->val;
      fb.f32["masks"] = po.flow_masks->val;
      fb.save(odir / frame_name("flow_", t, ".swnb"));
    }
    if (dump_mask) {
      Bundle mb;
      mb.f32["mask"] = po.mask->val;
      mb.save(odir / frame_name("mask_", t, ".swnb"));
      const Tensor& m = po.mask->val;
      Tensor rgb({3, m.dim(1), m.dim(2)});
      for (int c = 0; c < 3; ++c)
        for (long i = 0; i < m.numel(); ++i) rgb[c * m.numel() + i] = m[i];
      write_ppm(odir / frame_name("mask_", t, ".ppm"), rgb);
    }
  }
  std::cout << "wrote " << T << " frames to " << out << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data, const std::string& mode,
             int refs_count, const std::string& report) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  nlohmann::json rep;
  if (mode == "self") {
    const SelfEvalOutcome ev = self_reenact_eval(ck, data, refs_count);
    rep = ev.report;
    std::cout << "self-reenactment over " << ev.rows.size() << " held-out sequences\n"
              << "  model  psnr=" << ev.overall.psnr << " ssim=" << ev.overall.ssim
              << " l1=" << ev.overall.l1 << " temporal=" << ev.overall.temporal << "\n"
              << "  copy-source baseline psnr=" << ev.baseline.psnr
              << " ssim=" << ev.baseline.ssim << " l1=" << ev.baseline.l1 << "\n";
  } else if (mode == "cross") {
    const CrossEvalOutcome ev = cross_reenact_eval(ck, data, {}, refs_count);
    double acc = 0;
    for (const auto& [name, gap] : ev.rows) {
      std::cout << "  " << name << " keypoint-gap=" << gap << "\n";
      acc += gap;
    }
    std::cout << "cross-reenactment mean keypoint-gap="
              << acc / static_cast<double>(ev.rows.size()) << " over " << ev.rows.size()
              << " pairs\n";
    rep = ev.report;
  } else {
    throw std::invalid_argument("eval mode must be self or cross: " + mode);
  }
  write_report(report, rep);
  std::cout << "report: " << report << "\n";
  return 0;
}

int run_ablate_cmd(const std::string& config, const std::string& data,
                   const std::vector<std::string>& axes, const std::string& report) {
  const Config cfg = Config::from_file(config);
  const std::filesystem::path rpath(report);
  const std::filesystem::path work =
      rpath.has_parent_path() ? rpath.parent_path() : std::filesystem::path(".");
  const AblationOutcome out = run_ablation(cfg, data, axes, work, &std::cout);
  std::cout << out.table;
  write_report(rpath, out.report);
  std::cout << "report: " << report << "\n";
  return 0;
}

int run_gradcheck_cmd(const std::string& op, const std::string& precision, double tol) {
  check_arg(precision == "f32" || precision == "f64",
            "precision must be f32 or f64: " + precision);
  const GradCheckSummary sum = run_gradcheck(op, precision == "f64", tol, 20, &std::cout);
  std::cout << (sum.all_pass ? "all gradients verified" : "gradient check FAILED") << " ("
            << sum.results.size() << " checks, " << sum.wall_sec << "s)\n";
  return sum.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keypoint-driven portrait animation: dense flow warping with "
               "reference-attention correction and confidence-guided fusion"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "render a synthetic avatar dataset");
  std::string g_out;
  int g_seqs = 8, g_frames = 20, g_size = 64, g_kp = 21;
  std::uint64_t g_seed = 1234;
  gen->add_option("--out", g_out, "output dataset directory")->required();
  gen->add_option("--seqs", g_seqs, "number of sequences")->required();
  gen->add_option("--frames", g_frames, "frames per sequence")->required();
  gen->add_option("--size", g_size, "frame side length");
  gen->add_option("--keypoints", g_kp, "keypoints per avatar");
  gen->add_option("--seed", g_seed, "dataset seed");

  auto* tr = app.add_subcommand("train", "train a model");
  std::string t_config, t_data, t_out;
  tr->add_option("--config", t_config, "JSON config file")->required();
  tr->add_option("--data", t_data, "dataset directory")->required();
  tr->add_option("--out", t_out, "checkpoint output path")->required();

  auto* an = app.add_subcommand("animate", "drive a source image with a driving sequence");
  std::string a_ckpt, a_source, a_driving, a_refs, a_out, a_fusion;
  bool a_dump_flow = false, a_dump_mask = false;
  an->add_option("--ckpt", a_ckpt, "checkpoint file")->required();
  an->add_option("--source", a_source, "source image (PPM)")->required();
  an->add_option("--driving", a_driving, "driving sequence directory")->required();
  an->add_option("--refs", a_refs, "comma-separated reference images")->required();
  an->add_option("--out", a_out, "output frame directory")->required();
  an->add_option("--fusion", a_fusion, "override fusion variant");
  an->add_flag("--dump-flow", a_dump_flow, "dump flow fields and candidate masks");
  an->add_flag("--dump-mask", a_dump_mask, "dump confidence masks");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out sequences");
  std::string e_ckpt, e_data, e_mode = "self", e_report;
  int e_refs = 1;
  ev->add_option("--ckpt", e_ckpt, "checkpoint file")->required();
  ev->add_option("--data", e_data, "dataset directory")->required();
  ev->add_option("--mode", e_mode, "self or cross");
  ev->add_option("--refs-count", e_refs, "references per sample");
  ev->add_option("--report", e_report, "JSON report output path")->required();

  auto* ab = app.add_subcommand("ablate", "train and evaluate config variants");
  std::string b_config, b_data, b_report;
  std::vector<std::string> b_axes;
  ab->add_option("--config", b_config, "JSON config file")->required();
  ab->add_option("--data", b_data, "dataset directory")->required();
  ab->add_option("--axes", b_axes, "axis spec, e.g. fusion=cgf,concat,sum,sum-mask")->required();
  ab->add_option("--report", b_report, "JSON report output path")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string c_op, c_precision = "f32";
  double c_tol = -1.0;
  gc->add_option("--op", c_op, "check a single kernel (or 'pipeline')");
  gc->add_option("--precision", c_precision, "f32 or f64");
  gc->add_option("--tol", c_tol, "tolerance override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen_data(g_out, g_seqs, g_frames, g_size, g_kp, g_seed);
    if (*tr) return run_train(t_config, t_data, t_out);
    if (*an)
      return run_animate(a_ckpt, a_source, a_driving, a_refs, a_out, a_fusion, a_dump_flow,
                         a_dump_mask);
    if (*ev) return run_eval(e_ckpt, e_data, e_mode, e_refs, e_report);
    if (*ab) return run_ablate_cmd(b_config, b_data, b_axes, b_report);
    if (*gc) return run_gradcheck_cmd(c_op, c_precision, c_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
