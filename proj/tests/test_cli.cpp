#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "synwarp/config.hpp"
#include "synwarp/gradcheck.hpp"
#include "synwarp/synth.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SYNWARP_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  nlohmann::json j;
  in >> j;
  return j;
}

// Shared micro workspace: dataset + config + one trained checkpoint, built
// once because CLI round trips re-use the same artifacts.
class CliWorkspace : public ::testing::Environment {
 public:
  static fs::path root() { return fs::temp_directory_path() / "synwarp_cli_ws"; }
  static fs::path data() { return root() / "data"; }
  static fs::path cfg_file() { return root() / "cfg.json"; }
  static fs::path ckpt() { return root() / "model.swnb"; }

  void SetUp() override {
    fs::remove_all(root());
    fs::create_directories(root());
    ASSERT_EQ(run("gen-data --out " + data().string() +
                  " --seqs 4 --frames 3 --size 16 --keypoints 3 --seed 9"),
              0);
    synwarp::Config cfg = synwarp::micro_config();
    cfg.epochs = 1;
    cfg.warmup_epochs = 0;
    std::ofstream(cfg_file()) << cfg.to_json().dump(2);
    ASSERT_EQ(run("train --config " + cfg_file().string() + " --data " + data().string() +
                  " --out " + ckpt().string()),
              0);
  }
  void TearDown() override { fs::remove_all(root()); }
};

const ::testing::Environment* const ws_env =
    ::testing::AddGlobalTestEnvironment(new CliWorkspace);

}  // namespace

TEST(Cli, GenDataLaysOutSequencesAndFrames) {
  EXPECT_TRUE(fs::exists(CliWorkspace::data() / "seq_0000" / "meta.swnb"));
  EXPECT_TRUE(fs::exists(CliWorkspace::data() / "seq_0003" / "frame_0002.ppm"));
  EXPECT_FALSE(fs::exists(CliWorkspace::data() / "seq_0004"));
  const synwarp::Tensor img =
      synwarp::read_ppm(CliWorkspace::data() / "seq_0000" / "frame_0000.ppm");
  EXPECT_EQ(img.shape(), synwarp::Shape({3, 16, 16}));
}

TEST(Cli, TrainWritesCheckpointAndMetricsLog) {
  EXPECT_TRUE(fs::exists(CliWorkspace::ckpt()));
  const fs::path log(CliWorkspace::ckpt().string() + ".log.jsonl");
  ASSERT_TRUE(fs::exists(log));
  std::ifstream in(log);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  const nlohmann::json entry = nlohmann::json::parse(line);
  EXPECT_TRUE(entry.contains("epoch"));
  EXPECT_TRUE(entry.contains("loss"));
  EXPECT_TRUE(entry.contains("phase"));
}

TEST(Cli, SelfEvalReportFollowsSchema) {
  const fs::path report = CliWorkspace::root() / "self.json";
  ASSERT_EQ(run("eval --ckpt " + CliWorkspace::ckpt().string() + " --data " +
                CliWorkspace::data().string() + " --mode self --refs-count 1 --report " +
                report.string()),
            0);
  const nlohmann::json rep = read_json(report);
  EXPECT_TRUE(rep.contains("config"));
  EXPECT_TRUE(rep.contains("baseline"));
  EXPECT_EQ(rep["mode"], "self");
  ASSERT_FALSE(rep["rows"].empty());
  for (const char* key : {"name", "psnr", "ssim", "l1"})
    EXPECT_TRUE(rep["rows"][0].contains(key)) << key;
}

TEST(Cli, CrossEvalUsesExplicitDistinctnessRules) {
  // The 4-sequence workspace holds out one sequence, so the default pairing
  // has nothing to pair and the command must fail loudly.
  const fs::path report = CliWorkspace::root() / "cross.json";
  EXPECT_NE(run("eval --ckpt " + CliWorkspace::ckpt().string() + " --data " +
                CliWorkspace::data().string() + " --mode cross --report " + report.string()),
            0);
}

TEST(Cli, UnknownEvalModeFails) {
  EXPECT_NE(run("eval --ckpt " + CliWorkspace::ckpt().string() + " --data " +
                CliWorkspace::data().string() + " --mode sideways --report /dev/null"),
            0);
}

TEST(Cli, AnimateRendersEveryDrivingFrameWithDumps) {
  const fs::path out = CliWorkspace::root() / "anim";
  const std::string source = (CliWorkspace::data() / "seq_0001" / "frame_0000.ppm").string();
  ASSERT_EQ(run("animate --ckpt " + CliWorkspace::ckpt().string() + " --source " + source +
                " --driving " + (CliWorkspace::data() / "seq_0000").string() + " --refs " +
                source + " --out " + out.string() + " --dump-flow --dump-mask"),
            0);
  for (int t = 0; t < 3; ++t) {
    EXPECT_TRUE(fs::exists(out / ("frame_000" + std::to_string(t) + ".ppm")));
    EXPECT_TRUE(fs::exists(out / ("flow_000" + std::to_string(t) + ".swnb")));
    EXPECT_TRUE(fs::exists(out / ("mask_000" + std::to_string(t) + ".ppm")));
  }
  const synwarp::Bundle fb = synwarp::Bundle::load(out / "flow_0000.swnb");
  EXPECT_TRUE(fb.has("flow"));
  EXPECT_TRUE(fb.has("masks"));
}

TEST(Cli, AnimateFusionOverrideValidatesVariant) {
  const std::string source = (CliWorkspace::data() / "seq_0001" / "frame_0000.ppm").string();
  const std::string base = "animate --ckpt " + CliWorkspace::ckpt().string() + " --source " +
                           source + " --driving " +
                           (CliWorkspace::data() / "seq_0000").string() + " --refs " + source +
                           " --out " + (CliWorkspace::root() / "anim2").string();
  EXPECT_EQ(run(base + " --fusion sum"), 0);
  EXPECT_NE(run(base + " --fusion maximum"), 0);
}

TEST(Cli, AblateProducesReportWithRequestedVariants) {
  const fs::path report = CliWorkspace::root() / "ablate.json";
  ASSERT_EQ(run("ablate --config " + CliWorkspace::cfg_file().string() + " --data " +
                CliWorkspace::data().string() + " --axes fusion=sum,concat --report " +
                report.string()),
            0);
  const nlohmann::json rep = read_json(report);
  ASSERT_EQ(rep["rows"].size(), 2u);
  EXPECT_EQ(rep["rows"][0]["name"], "fusion=sum");
  EXPECT_EQ(rep["rows"][0]["lpips"], "n/a");
  EXPECT_TRUE(rep.contains("baseline"));
}

TEST(Cli, GradcheckSingleOpAndFailureModes) {
  EXPECT_EQ(run("gradcheck --op relu"), 0);
  EXPECT_EQ(run("gradcheck --op conv2d --precision f64"), 0);
  EXPECT_NE(run("gradcheck --op warp_drive"), 0);
  EXPECT_NE(run("gradcheck --precision f128"), 0);
  // An impossible tolerance must fail through the exit code.
  EXPECT_NE(run("gradcheck --op conv2d --tol 1e-18"), 0);
}

TEST(Cli, BadInvocationsExitNonzero) {
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run("train --config /nonexistent.json --data /nonexistent --out /tmp/x.swnb"), 0);
  EXPECT_NE(run("eval --ckpt /nonexistent.swnb --data /nonexistent --report /dev/null"), 0);
}
