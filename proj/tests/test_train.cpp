#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "synwarp/eval.hpp"
#include "synwarp/gradcheck.hpp"
#include "synwarp/train.hpp"

using namespace synwarp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Tiny but trainable setup: 3 sequences of 4 frames at the micro geometry.
struct TrainFixture {
  fs::path data = fresh_dir("synwarp_train_data");
  Config cfg = micro_config();

  TrainFixture() {
    SceneSpec spec;
    spec.keypoints = cfg.keypoints;
    spec.size = cfg.image_size;
    gen_dataset(data, 3, 4, spec, 444);
  }
  ~TrainFixture() { fs::remove_all(data); }
};

}  // namespace

TEST(Train, WarmupLeavesExplicitFlowParametersUntouched) {
  TrainFixture fx;
  fx.cfg.epochs = 1;
  fx.cfg.warmup_epochs = 1;
  const fs::path out = fx.data / "warm.swnb";
  const TrainResult res = train(fx.cfg, fx.data, out);
  ASSERT_EQ(res.epochs.size(), 1u);
  EXPECT_EQ(res.epochs[0].phase, "warmup");

  const ParamMap<float> fresh = init_model_params<float>(fx.cfg);
  bool any_dofw = false, any_rac_moved = false;
  for (const auto& [name, t] : res.params) {
    if (name_starts_with(name, "dofw.") || name_starts_with(name, "enc.")) {
      any_dofw = any_dofw || name_starts_with(name, "dofw.");
      EXPECT_TRUE(t.same_bits(fresh.at(name))) << name << " moved during warm-up";
    }
    if (name_starts_with(name, "rac.") && !t.same_bits(fresh.at(name))) any_rac_moved = true;
  }
  EXPECT_TRUE(any_dofw);
  EXPECT_TRUE(any_rac_moved) << "warm-up trained nothing";
}

TEST(Train, JointPhaseMovesExplicitFlowParameters) {
  TrainFixture fx;
  fx.cfg.epochs = 2;
  fx.cfg.warmup_epochs = 1;
  const fs::path out = fx.data / "joint.swnb";
  const TrainResult res = train(fx.cfg, fx.data, out);
  ASSERT_EQ(res.epochs.size(), 2u);
  EXPECT_EQ(res.epochs[1].phase, "joint");
  const ParamMap<float> fresh = init_model_params<float>(fx.cfg);
  bool moved = false;
  for (const auto& [name, t] : res.params)
    if (name_starts_with(name, "dofw.") && !t.same_bits(fresh.at(name))) moved = true;
  EXPECT_TRUE(moved);
}

TEST(Train, ZeroLearningRateChangesNothing) {
  TrainFixture fx;
  fx.cfg.epochs = 2;
  fx.cfg.warmup_epochs = 1;
  fx.cfg.lr = 0.0;
  const fs::path out = fx.data / "frozen.swnb";
  const TrainResult res = train(fx.cfg, fx.data, out);
  const ParamMap<float> fresh = init_model_params<float>(fx.cfg);
  ASSERT_EQ(res.params.size(), fresh.size());
  for (const auto& [name, t] : res.params)
    EXPECT_TRUE(t.same_bits(fresh.at(name))) << name << " moved with lr = 0";
}

TEST(Train, EpochLossDecomposesIntoLoggedTerms) {
  TrainFixture fx;
  fx.cfg.epochs = 2;
  fx.cfg.warmup_epochs = 1;
  const fs::path out = fx.data / "decomp.swnb";
  const TrainResult res = train(fx.cfg, fx.data, out);
  for (const EpochLog& el : res.epochs) {
    const double recomposed = fx.cfg.lambda_rec * el.rec + fx.cfg.lambda_p * el.perc +
                              fx.cfg.lambda_g * el.adv;
    EXPECT_NEAR(el.total, recomposed, 1e-6);
  }
}

TEST(Train, IdenticalSeedsReproduceRunByteForByte) {
  TrainFixture fx;
  fx.cfg.epochs = 2;
  fx.cfg.warmup_epochs = 1;
  const fs::path a = fx.data / "runa.swnb";
  const fs::path b = fx.data / "runb.swnb";
  const TrainResult ra = train(fx.cfg, fx.data, a);
  const TrainResult rb = train(fx.cfg, fx.data, b);
  ASSERT_EQ(ra.log_lines.size(), rb.log_lines.size());
  for (size_t i = 0; i < ra.log_lines.size(); ++i) EXPECT_EQ(ra.log_lines[i], rb.log_lines[i]);
  EXPECT_EQ(file_bytes(fs::path(a.string() + ".log.jsonl")),
            file_bytes(fs::path(b.string() + ".log.jsonl")));
  EXPECT_EQ(file_bytes(a), file_bytes(b));

  Config other = fx.cfg;
  other.seed += 1;
  const TrainResult rc = train(other, fx.data, fx.data / "runc.swnb");
  EXPECT_NE(ra.log_lines[0], rc.log_lines[0]);
}

TEST(Train, CheckpointRoundTripReproducesEvaluation) {
  TrainFixture fx;
  fx.cfg.epochs = 2;
  fx.cfg.warmup_epochs = 1;
  const fs::path out = fx.data / "ck.swnb";
  const TrainResult res = train(fx.cfg, fx.data, out);

  const Checkpoint ck = load_checkpoint(out);
  EXPECT_EQ(ck.cfg.hash(), fx.cfg.hash());
  ASSERT_EQ(ck.params.size(), res.params.size());
  for (const auto& [name, t] : res.params) EXPECT_TRUE(t.same_bits(ck.params.at(name)));
  EXPECT_EQ(ck.opt.step, res.opt.step);

  const SelfEvalOutcome e1 = self_reenact_eval(ck, fx.data, fx.cfg.refs_count);
  const SelfEvalOutcome e2 = self_reenact_eval(load_checkpoint(out), fx.data, fx.cfg.refs_count);
  ASSERT_FALSE(e1.rows.empty());
  EXPECT_EQ(e1.overall.psnr, e2.overall.psnr);
  EXPECT_EQ(e1.overall.ssim, e2.overall.ssim);
  EXPECT_EQ(e1.overall.l1, e2.overall.l1);
  EXPECT_EQ(e1.overall.temporal, e2.overall.temporal);
}

TEST(Train, CorruptedCheckpointRejected) {
  TrainFixture fx;
  fx.cfg.epochs = 1;
  const fs::path out = fx.data / "corrupt.swnb";
  train(fx.cfg, fx.data, out);
  std::string bytes = file_bytes(out);
  ASSERT_GT(bytes.size(), 8u);
  {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f << "ZZZZ" << bytes.substr(4);
  }
  EXPECT_THROW(load_checkpoint(out), IoError);
}

TEST(Train, EmptyDatasetAndKeypointMismatchRejected) {
  const fs::path empty = fresh_dir("synwarp_train_empty");
  Config cfg = micro_config();
  EXPECT_THROW(train(cfg, empty, empty / "x.swnb"), std::invalid_argument);
  fs::remove_all(empty);

  TrainFixture fx;
  fx.cfg.keypoints = fx.cfg.keypoints + 1;
  EXPECT_THROW(train(fx.cfg, fx.data, fx.data / "kp.swnb"), std::invalid_argument);
}

TEST(Train, HoldoutSplitPolicy) {
  const fs::path dir = fresh_dir("synwarp_split");
  SceneSpec spec;
  spec.keypoints = 3;
  spec.size = 16;
  gen_dataset(dir, 5, 2, spec, 1);
  DatasetSplit s = split_counts(dir, 0.2);
  EXPECT_EQ(s.total, 5);
  EXPECT_EQ(s.holdout, 1);
  EXPECT_EQ(s.train, 4);
  // A tiny fraction still reserves one sequence when more than one exists.
  s = split_counts(dir, 0.01);
  EXPECT_EQ(s.holdout, 1);
  s = split_counts(dir, 0.0);
  EXPECT_EQ(s.holdout, 0);
  EXPECT_THROW(split_counts(dir, 1.0), std::invalid_argument);
  fs::remove_all(dir);
}
