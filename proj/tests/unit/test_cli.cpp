#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "sploc/cli.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

int run(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::vector<const char*> argv{"sploc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str() + e.str();
  return rc;
}

TEST(Cli, ParseErrors) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_NE(run({"localize", "--k", "2"}), 0);
  std::string text;
  EXPECT_EQ(run({"--help"}, &text), 0);
  EXPECT_NE(text.find("run-experiment"), std::string::npos);
}

TEST(Cli, BadConfigKeyIsValidationError) {
  testing::TempDir dir("cli_bad");
  EXPECT_EQ(run({"gen-data", "--out-dir", (dir / "d").string(), "--set", "data.nope=1", "--quiet"}), 2);
}

TEST(Cli, SmallPipeline) {
  testing::TempDir dir("cli");
  const std::vector<std::string> common{"--quiet",
                                        "--seed",
                                        "4",
                                        "--set",
                                        "data.dims=16,16,16",
                                        "--set",
                                        "data.scale_min=5",
                                        "--set",
                                        "data.scale_max=6",
                                        "--set",
                                        "data.max_offset=1",
                                        "--set",
                                        "diffusion.slice_size=16",
                                        "--set",
                                        "diffusion.hidden=16",
                                        "--set",
                                        "diffusion.encoder_hidden=8",
                                        "--set",
                                        "diffusion.validate_every=0"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  const std::string data = (dir / "data").string();
  ASSERT_EQ(run(with({"gen-data", "--out-dir", data, "--count", "6"})), 0);
  const std::string manifest = data + "/manifest.json";
  const std::string ckpt = (dir / "d.ckpt").string();
  ASSERT_EQ(run(with({"train-diffusion", "--data-manifest", manifest, "--steps", "10", "--out-checkpoint", ckpt,
                      "--out-log", (dir / "log.json").string()})),
            0);
  std::filesystem::create_directories(dir / "traj");
  for (const char* id : {"case_0000", "case_0001", "case_0002"}) {
    ASSERT_EQ(run(with({"localize", "--volume", data + "/volumes/" + id + ".pdv", "--checkpoint", ckpt, "--k", "2",
                        "--out-trajectory", (dir / "traj" / (std::string(id) + ".json")).string()})),
              0);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "traj" / "case_0000_slices" / "final.pgm"));
  const std::string curves = (dir / "curves.csv").string();
  ASSERT_EQ(run({"export-curves", "--trajectory", (dir / "traj" / "case_0000.json").string(), "--out-csv", curves}), 0);
  const std::string csv = testing::read_file(curves);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);

  const std::string agent = (dir / "a.ckpt").string(), flm = (dir / "f.ckpt").string();
  ASSERT_EQ(run(with({"train-summarizer", "--trajectories", (dir / "traj").string(), "--iterations", "4",
                      "--episodes", "2", "--out-agent", agent, "--out-flm", flm})),
            0);
  ASSERT_EQ(run({"summarize", "--trajectory", (dir / "traj" / "case_0001.json").string(), "--agent", agent, "--flm",
                 flm, "--out-json", (dir / "s.json").string()}),
            0);
  const auto s = nlohmann::json::parse(testing::read_file(dir / "s.json"));
  EXPECT_EQ(s.at("selected").back(), s.at("final_index"));
  ASSERT_EQ(run(with({"classify", "--volume", data + "/volumes/case_0002.pdv", "--diffusion-checkpoint", ckpt,
                      "--agent", agent, "--flm", flm, "--k", "2", "--uncertainty-k", "2", "--out-json",
                      (dir / "c.json").string()})),
            0);
  const auto c = nlohmann::json::parse(testing::read_file(dir / "c.json"));
  EXPECT_EQ(c.at("p_a").size(), 3u);
  EXPECT_NE(run(with({"classify", "--volume", data + "/volumes/case_0002.pdv", "--diffusion-checkpoint", ckpt,
                      "--agent", agent, "--flm", flm, "--uncertainty-k", "1", "--out-json",
                      (dir / "c2.json").string()})),
            0);
}

}  // namespace
}  // namespace sploc
