#include <gtest/gtest.h>

#include <sstream>

#include "affectcal/io.hpp"
#include "affectcal/nn/train.hpp"
#include "commands.hpp"
#include "support.hpp"

using namespace affectcal;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// One small Expr dataset plus a trained model, shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new affectcal::testing::TempDir("cli");
    const std::string d = dir_->path().string();
    ASSERT_EQ(run({"synth", "--out", d, "--videos", "6", "--frames", "500", "--dim", "8", "--segment-length", "20", "--seed", "3",
                   "--audio-agreement", "0.6", "--pretrained-confident", "0.4"})
                  .code,
              0);
    ASSERT_EQ(run({"train", "--manifest", d + "/train.json", "--out", d + "/model.json", "--epochs", "3",
                   "--hidden", "16", "--seed", "1"})
                  .code,
              0);
    ASSERT_EQ(run({"train", "--manifest", d + "/train.json", "--out", d + "/audio.json", "--epochs", "3",
                   "--hidden", "16", "--modality", "audio", "--seed", "1"})
                  .code,
              0);
    ASSERT_EQ(run({"calibrate", "--manifest", d + "/val.json", "--model", d + "/model.json", "--out",
                   d + "/bias.json"})
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }

  static affectcal::testing::TempDir* dir_;
};

affectcal::testing::TempDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST(Cli, UnknownSubcommandIsConfigError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, MissingManifestIsDataError) {
  const auto r = run({"evaluate", "--manifest", "/nonexistent/m.json", "--pred", "/nonexistent"});
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliPipeline, TaskMismatchIsConfigError) {
  const auto r = run({"train", "--task", "va", "--manifest", path("train.json"), "--out", path("x.json")});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST_F(CliPipeline, ConfigFileFlagsWin) {
  write_text_file(path("cfg.json"), "{\"epochs\": 1, \"hidden\": 8, \"seed\": 4}");
  const auto r = run({"--config", path("cfg.json"), "train", "--manifest", path("train.json"), "--out",
                      path("cfg_model.json"), "--epochs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = read_text_file(path("cfg_model.json.loss.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);  // header + epochs 0..2
  EXPECT_EQ(nn::load_model(path("cfg_model.json")).spec.hidden_dims, std::vector<std::size_t>{8});
}

TEST_F(CliPipeline, NeutralStagesEqualRawArgmax) {
  ASSERT_EQ(run({"predict", "--manifest", path("test.json"), "--model", path("model.json"), "--out",
                 path("raw")})
                .code,
            0);
  const auto gated = run({"predict", "--manifest", path("test.json"), "--model", path("model.json"), "--out",
                          path("neutral"), "--gate-p0", "1", "--smooth-T", "0"});
  ASSERT_EQ(gated.code, 0) << gated.err;
  const auto m = load_manifest(path("test.json"));
  for (const auto& e : m.entries) {
    const auto a = load_label_track(path("raw/" + e.video_id + ".csv"));
    const auto b = load_label_track(path("neutral/" + e.video_id + ".csv"));
    EXPECT_EQ(a.classes, b.classes);
    const auto gate = load_gate_mask(path("neutral/" + e.video_id + ".csv"));
    EXPECT_EQ(std::count(gate.begin(), gate.end(), 1), 0);
  }
}

TEST_F(CliPipeline, EvaluateFormats) {
  ASSERT_EQ(run({"predict", "--manifest", path("test.json"), "--model", path("model.json"), "--bias",
                 path("bias.json"), "--smooth-T", "8", "--out", path("pred")})
                .code,
            0);
  const auto json = run({"evaluate", "--manifest", path("test.json"), "--pred", path("pred")});
  ASSERT_EQ(json.code, 0) << json.err;
  EXPECT_NE(json.out.find("\"macro_f1\""), std::string::npos);
  const auto csv = run({"evaluate", "--manifest", path("test.json"), "--pred", path("pred"), "--csv"});
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 8);  // header, 6 videos, pooled
  EXPECT_NE(csv.out.find("\npooled,"), std::string::npos);
}

TEST_F(CliPipeline, AblateRowsFollowVariantOrder) {
  const auto r = run({"ablate", "--manifest", path("test.json"), "--model", path("model.json"), "--bias",
                      path("bias.json"), "--gate-p0", "0.9", "--smooth-T", "8", "--audio-model",
                      path("audio.json"), "--variants", "none,gla,filtering,smoothing,fusion", "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> names;
  std::getline(lines, line);
  EXPECT_EQ(line, "variant,macro_f1,accuracy");
  while (std::getline(lines, line)) names.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(names, (std::vector<std::string>{"none", "gla", "filtering", "smoothing", "fusion"}));
}

TEST_F(CliPipeline, FuseSweepCoversGrid) {
  const auto r = run({"fuse", "--manifest", path("val.json"), "--model", path("model.json"), "--audio-model",
                      path("audio.json"), "--sweep", "--out", path("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"best_w\""), std::string::npos);
  const std::string csv = read_text_file(path("sweep.csv"));
  EXPECT_EQ(csv.rfind("w,macro_f1,accuracy\n0,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 22);
}

TEST_F(CliPipeline, AblateVariantNeedsInputs) {
  const auto r = run({"ablate", "--manifest", path("test.json"), "--model", path("model.json"), "--variants",
                      "none,gla"});
  EXPECT_EQ(r.code, 2);
}
