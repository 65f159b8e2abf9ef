// Config and scene parsing, and end-to-end CLI runs on the shipped demo scene.

#include "risplan/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace risplan;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = RISPLAN_SOURCE_DIR;
const std::string kCli = RISPLAN_CLI;

Json demo_scene_json() { return read_json_file(kSource / "data/scenes/demo.json"); }

std::string parse_error(const Json& scene) {
  try {
    scene_from_json(scene);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    return e.what();
  }
  ADD_FAILURE() << "scene was accepted";
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("risplan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const Json& config) {
  const fs::path p = dir / "config.json";
  write_text(p, config.dump());
  return p;
}

Json demo_config(const std::string& mode) {
  return {{"scene", (kSource / "data/scenes/demo.json").string()}, {"mode", mode}, {"seed", 7}, {"threads", 1}};
}

}  // namespace

TEST(SceneParsing, DemoSceneLoads) {
  const SceneSpec s = load_scene(kSource / "data/scenes/demo.json");
  EXPECT_EQ(s.buildings.size(), 4u);
  EXPECT_EQ(s.ue_areas.size(), 3u);
  ASSERT_TRUE(s.uav_area.has_value());
  EXPECT_DOUBLE_EQ(s.uav_area->height, 50.0);
  EXPECT_DOUBLE_EQ(s.ue_areas[0].height, 1.5);
}

TEST(SceneParsing, ErrorsNameTheField) {
  Json j = demo_scene_json();
  j.erase("bs");
  EXPECT_NE(parse_error(j).find("'bs'"), std::string::npos);

  j = demo_scene_json();
  j["buildings"][1]["height"] = -3.0;
  EXPECT_NE(parse_error(j).find("buildings[1]"), std::string::npos);

  j = demo_scene_json();
  j["buildings"][0]["footprint"][2] = {1.0};
  EXPECT_NE(parse_error(j).find("buildings[0].footprint[2]"), std::string::npos);

  j = demo_scene_json();
  j["ue_areas"][2]["name"] = "east";
  EXPECT_NE(parse_error(j).find("ue_areas[2].name"), std::string::npos);

  j = demo_scene_json();
  j["bs"] = {0.0, 0.0, 500.0};
  EXPECT_NE(parse_error(j).find("'bs'"), std::string::npos);

  j = demo_scene_json();
  j["ris_assignment"] = Json::array({Json::array({"east", "nowhere"})});
  EXPECT_NE(parse_error(j).find("ris_assignment[0]"), std::string::npos);
}

TEST(ConfigParsing, ErrorsNameTheField) {
  auto error_of = [](const Json& j) -> std::string {
    try {
      config_from_json(j, kSource);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_input);
      return e.what();
    }
    ADD_FAILURE() << "config was accepted";
    return {};
  };
  EXPECT_NE(error_of(Json::object()).find("'scene'"), std::string::npos);
  EXPECT_NE(error_of({{"scene", "x.json"}, {"mode", "sideways"}}).find("'mode'"), std::string::npos);
  EXPECT_NE(error_of({{"scene", "x.json"}, {"threads", "four"}}).find("'threads'"), std::string::npos);
}

TEST(ConfigParsing, RelativeScenePathResolvesAgainstConfig) {
  const RunConfig c = load_config(kSource / "data/configs/demo.json");
  EXPECT_TRUE(fs::exists(c.scene_path));
  EXPECT_EQ(c.mode, Mode::full_isac);
  EXPECT_EQ(c.seed, 7u);
}

TEST(Cli, ValidateScene) {
  EXPECT_EQ(cli("validate-scene " + (kSource / "data/scenes/demo.json").string()), 0);
  const fs::path dir = scratch("validate");
  Json bad = demo_scene_json();
  bad.erase("bounds");
  write_text(dir / "bad.json", bad.dump());
  EXPECT_EQ(cli("validate-scene " + (dir / "bad.json").string()), 4);
}

TEST(Cli, MalformedSceneWritesErrorJson) {
  const fs::path dir = scratch("malformed");
  Json bad = demo_scene_json();
  bad["buildings"][0].erase("height");
  write_text(dir / "scene.json", bad.dump());
  const fs::path cfg = write_config(dir, {{"scene", "scene.json"}});
  EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "out").string()), 4);
  const Json err = read_json_file(dir / "out/error.json");
  EXPECT_EQ(err["exit_code"], 4);
  EXPECT_NE(err["message"].get<std::string>().find("buildings[0].height"), std::string::npos);
}

TEST(Cli, CompareNeedsTwoModes) {
  const fs::path dir = scratch("compare_one");
  const fs::path cfg = write_config(dir, demo_config("full-isac"));
  EXPECT_EQ(cli("compare --config " + cfg.string() + " --mode full-isac --out " + (dir / "out").string()), 4);
  EXPECT_EQ(cli("compare --config " + cfg.string() + " --mode full-isac:0,comm-only --out " + (dir / "out").string()), 4);
}

TEST(Cli, MissingConfigIsIoError) {
  const fs::path dir = scratch("missing");
  EXPECT_EQ(cli("run --config " + (dir / "nope.json").string() + " --out " + (dir / "out").string()), 5);
}

// Two identical full runs of the demo scene.
class DemoRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const fs::path dir = scratch("demo");
    const fs::path cfg = write_config(dir, demo_config("full-isac"));
    first_ = dir / "a";
    second_ = dir / "b";
    rc_first_ = cli("run --config " + cfg.string() + " --out " + first_.string());
    rc_second_ = cli("run --config " + cfg.string() + " --out " + second_.string());
  }
  static inline fs::path first_, second_;
  static inline int rc_first_ = -1, rc_second_ = -1;
};

TEST_F(DemoRun, ExitsCleanlyWithAllArtifacts) {
  EXPECT_EQ(rc_first_, 0);
  for (const char* f : {"deployment.json", "convergence.csv", "closure.csv", "run.log", "rv_map.csv", "rv_map.json",
                        "detections.json", "positions.json", "snr_map_east.csv", "snr_map_east.json",
                        "snr_map_west.json", "snr_map_south.json", "ris_0_phases.csv"}) {
    EXPECT_TRUE(fs::exists(first_ / f)) << f;
  }
  EXPECT_FALSE(fs::exists(first_ / "error.json"));
}

TEST_F(DemoRun, DeploymentCarriesSensingFields) {
  const Json d = read_json_file(first_ / "deployment.json");
  EXPECT_EQ(d["mode"], "full-isac");
  EXPECT_TRUE(d["converged"].get<bool>());
  ASSERT_FALSE(d["ris"].empty());
  for (const auto& r : d["ris"]) {
    EXPECT_TRUE(r.contains("reference_crb"));
    EXPECT_GT(r["size"]["side_m"].get<double>(), 0.0);
  }
  EXPECT_TRUE(d["closure"].contains("worst_range_crb_excess_db"));
  EXPECT_TRUE(d.contains("uav_cells"));
}

TEST_F(DemoRun, RisServedCellsMeetThresholdInAccountingModel) {
  const double threshold = read_json_file(first_ / "deployment.json")["thresholds"]["snr_db"].get<double>();
  int ris_cells = 0;
  for (const char* area : {"east", "west", "south"}) {
    const Json m = read_json_file(first_ / (std::string("snr_map_") + area + ".json"));
    for (const auto& c : m["cells"]) {
      const std::string by = c["served_by"];
      if (by.rfind("ris-", 0) != 0) continue;
      ++ris_cells;
      EXPECT_GE(c["snr_db"].get<double>(), threshold - 1e-9) << area << " cell " << c["cell_index"];
    }
  }
  EXPECT_GT(ris_cells, 0);
}

TEST_F(DemoRun, ByteIdenticalApartFromLog) {
  EXPECT_EQ(rc_second_, rc_first_);
  for (const auto& e : fs::directory_iterator(first_)) {
    const std::string name = e.path().filename().string();
    if (name == "run.log") continue;
    ASSERT_TRUE(fs::exists(second_ / name)) << name;
    EXPECT_TRUE(slurp(e.path()) == slurp(second_ / name)) << name;
  }
}

TEST(Cli, CommOnlyHasNoSensingArtifacts) {
  const fs::path dir = scratch("comm");
  const fs::path cfg = write_config(dir, demo_config("comm-only"));
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  const Json d = read_json_file(dir / "out/deployment.json");
  EXPECT_EQ(d["mode"], "comm-only");
  for (const auto& r : d["ris"]) EXPECT_FALSE(r.contains("reference_crb"));
  EXPECT_FALSE(d["closure"].contains("worst_range_crb_excess_db"));
  EXPECT_TRUE(d.contains("sensing_feasible_full_beta"));
  for (const char* f : {"rv_map.csv", "rv_map.json", "detections.json", "positions.json"}) {
    EXPECT_FALSE(fs::exists(dir / "out" / f)) << f;
  }
}

TEST(Cli, EnvironmentOverridesMode) {
  const fs::path dir = scratch("env");
  const fs::path cfg = write_config(dir, demo_config("full-isac"));
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "out").string() + " --mode bogus"), 4);
  const std::string cmd = "RISPLAN_MODE=bogus " + kCli + " run --config " + cfg.string() + " --out " +
                          (dir / "out2").string() + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(rc), 4);
}
