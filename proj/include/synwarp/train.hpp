#pragma once

#include <atomic>
#include <functional>
#include <numeric>
#include <thread>

#include "synwarp/model.hpp"
#include "synwarp/synth.hpp"

// Two-phase training: a warm-up that trains only the attention stream and
// decoder (explicit stream bypassed, equivalent to forcing the confidence
// mask to zero), then joint adaptation of everything.

namespace synwarp {

inline bool name_starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

inline std::function<bool(const std::string&)> phase_trainable(bool warmup) {
  if (warmup)
    return [](const std::string& n) {
      return name_starts_with(n, "rac.") || name_starts_with(n, "dec.");
    };
  return [](const std::string& n) { return !name_starts_with(n, "disc."); };
}

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double total = 0, rec = 0, perc = 0, adv = 0, disc = 0;
};

struct TrainResult {
  ParamMap<float> params;
  AdamState opt;
  std::vector<EpochLog> epochs;
  std::vector<std::string> log_lines;  // one JSON object per epoch
};

// Train/eval split: the held-out tail of the directory is never read here.
struct DatasetSplit {
  int total = 0, train = 0, holdout = 0;
};

inline DatasetSplit split_counts(const std::filesystem::path& dir, double holdout_frac) {
  DatasetSplit s;
  s.total = count_sequences(dir);
  check_arg(s.total >= 1, "dataset is empty: " + dir.string());
  s.holdout = static_cast<int>(std::lround(holdout_frac * s.total));
  if (holdout_frac > 0.0 && s.holdout == 0 && s.total > 1) s.holdout = 1;
  s.train = s.total - s.holdout;
  check_arg(s.train >= 1, "no training sequences left after holdout split");
  return s;
}

namespace train_detail {

struct StepPlan {
  int seq = 0, src = 0, drv = 0;
};

struct SampleGrads {
  std::map<std::string, Tensor> grads;
  double total = 0, rec = 0, perc = 0, adv = 0;
  Tensor prediction;  // kept for the optional discriminator step
};

template <typename Trainable>
SampleGrads run_sample(const Config& cfg, const ParamMap<float>& params, const Sample& sample,
                       bool warmup, const Trainable& trainable) {
  Tape tape;
  BoundParams<float> bp(tape, params, trainable);
  PipelineOut<float> out = forward_pipeline(tape, bp, cfg, sample, warmup);
  ValueT<float>* target = tape.constant(sample.driving);
  TotalLoss<float> loss = total_loss(tape, bp, cfg, out.image, target);
  tape.backward(loss.total);
  SampleGrads sg;
  sg.total = loss.total->val[0];
  sg.rec = loss.rec ? loss.rec->val[0] : 0.0;
  sg.perc = loss.perc ? loss.perc->val[0] : 0.0;
  sg.adv = loss.adv ? loss.adv->val[0] : 0.0;
  sg.prediction = out.image->val;
  for (const auto& [name, g] : bp.gradients()) sg.grads[name] = *g;
  return sg;
}

inline double disc_step(const Config& cfg, ParamMap<float>& params, AdamState& opt,
                        const std::vector<const Tensor*>& reals,
                        const std::vector<const Tensor*>& fakes) {
  std::map<std::string, Tensor> acc;
  double mean_loss = 0.0;
  for (size_t i = 0; i < reals.size(); ++i) {
    Tape tape;
    BoundParams<float> bp(tape, params,
                          [](const std::string& n) { return name_starts_with(n, "disc."); });
    ValueT<float>* loss =
        discriminator_adv_loss(tape, bp, cfg, tape.constant(*reals[i]), tape.constant(*fakes[i]));
    tape.backward(loss);
    mean_loss += loss->val[0];
    for (const auto& [name, g] : bp.gradients()) {
      auto it = acc.find(name);
      if (it == acc.end())
        acc[name] = *g;
      else
        for (long j = 0; j < g->numel(); ++j) it->second[j] += (*g)[j];
    }
  }
  const float inv = 1.0f / static_cast<float>(reals.size());
  std::map<std::string, const Tensor*> avg;
  for (auto& [name, g] : acc) {
    for (long j = 0; j < g.numel(); ++j) g[j] *= inv;
    avg[name] = &g;
  }
  adam_step(params, avg, opt, cfg);
  return mean_loss / static_cast<double>(reals.size());
}

}  // namespace train_detail

inline TrainResult train(const Config& cfg, const std::filesystem::path& data_dir,
                         const std::filesystem::path& ckpt_out,
                         std::ostream* progress = nullptr) {
  cfg.validate();
  const DatasetSplit split = split_counts(data_dir, cfg.holdout_frac);
  std::vector<SequenceRecord> seqs;
  seqs.reserve(static_cast<size_t>(split.train));
  for (int i = 0; i < split.train; ++i) seqs.push_back(read_sequence(data_dir, i));
  for (const auto& s : seqs)
    check_arg(s.xc.dim(0) == cfg.keypoints, "dataset keypoint count does not match config");

  TrainResult res;
  res.params = init_model_params<float>(cfg);
  const std::filesystem::path log_path = ckpt_out.string() + ".log.jsonl";
  std::ofstream log_file(log_path, std::ios::trunc);
  if (!log_file) throw IoError("cannot open metrics log: " + log_path.string());

  Rng root(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool warmup = epoch < cfg.warmup();
    auto trainable = phase_trainable(warmup);

    // Plan every step up front with a serial RNG so thread count cannot
    // change what gets sampled.
    Rng erng = root.fork(1000 + static_cast<std::uint64_t>(epoch));
    std::vector<int> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(erng.next_below(static_cast<std::uint64_t>(i)))]);
    std::vector<train_detail::StepPlan> plan;
    for (int seq_idx : order) {
      const int T = static_cast<int>(seqs[static_cast<size_t>(seq_idx)].frames.size());
      train_detail::StepPlan sp;
      sp.seq = seq_idx;
      sp.src = static_cast<int>(erng.next_below(static_cast<std::uint64_t>(T)));
      sp.drv = static_cast<int>(erng.next_below(static_cast<std::uint64_t>(T - 1)));
      if (sp.drv >= sp.src) ++sp.drv;
      plan.push_back(sp);
    }

    EpochLog el;
    el.epoch = epoch;
    el.phase = warmup ? "warmup" : "joint";
    long steps = 0;
    for (size_t base = 0; base < plan.size(); base += static_cast<size_t>(cfg.batch_size)) {
      const size_t count = std::min(static_cast<size_t>(cfg.batch_size), plan.size() - base);
      std::vector<Sample> samples;
      for (size_t i = 0; i < count; ++i) {
        const auto& sp = plan[base + i];
        samples.push_back(make_sample(seqs[static_cast<size_t>(sp.seq)], sp.src, sp.drv, cfg.refs_count));
      }
      std::vector<train_detail::SampleGrads> results(count);
      if (cfg.threads <= 1 || count == 1) {
        for (size_t i = 0; i < count; ++i)
          results[i] = train_detail::run_sample(cfg, res.params, samples[i], warmup, trainable);
      } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int t = 0; t < std::min<int>(cfg.threads, static_cast<int>(count)); ++t)
          pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
              results[i] = train_detail::run_sample(cfg, res.params, samples[i], warmup, trainable);
          });
        for (auto& th : pool) th.join();
      }

      // Fixed-order reduction keeps multi-threaded runs bit-identical to serial.
      std::map<std::string, Tensor> acc;
      for (size_t i = 0; i < count; ++i) {
        if (!std::isfinite(results[i].total)) throw TrainingDivergence("total loss");
        el.total += results[i].total;
        el.rec += results[i].rec;
        el.perc += results[i].perc;
        el.adv += results[i].adv;
        ++steps;
        for (auto& [name, g] : results[i].grads) {
          auto it = acc.find(name);
          if (it == acc.end())
            acc[name] = std::move(g);
          else
            for (long j = 0; j < it->second.numel(); ++j) it->second[j] += g[j];
        }
      }
      const float inv = 1.0f / static_cast<float>(count);
      std::map<std::string, const Tensor*> avg;
      for (auto& [name, g] : acc) {
        for (long j = 0; j < g.numel(); ++j) g[j] *= inv;
        avg[name] = &g;
      }
      adam_step(res.params, avg, res.opt, cfg);

      if (cfg.gan && cfg.lambda_g > 0 && !warmup) {
        std::vector<const Tensor*> reals, fakes;
        for (size_t i = 0; i < count; ++i) {
          reals.push_back(&samples[i].driving);
          fakes.push_back(&results[i].prediction);
        }
        el.disc += train_detail::disc_step(cfg, res.params, res.opt, reals, fakes) *
                   static_cast<double>(count);
      }
    }

    const double inv_steps = steps > 0 ? 1.0 / static_cast<double>(steps) : 0.0;
    el.total *= inv_steps;
    el.rec *= inv_steps;
    el.perc *= inv_steps;
    el.adv *= inv_steps;
    el.disc *= inv_steps;
    res.epochs.push_back(el);

    nlohmann::json line{{"epoch", el.epoch}, {"phase", el.phase},   {"loss", el.total},
                        {"rec", el.rec},     {"perc", el.perc},     {"adv", el.adv},
                        {"disc", el.disc}};
    res.log_lines.push_back(line.dump());
    log_file << res.log_lines.back() << "\n";
    log_file.flush();
    if (progress) (*progress) << res.log_lines.back() << std::endl;

    save_checkpoint(ckpt_out, cfg, res.params, res.opt);
  }
  return res;
}

}  // namespace synwarp
