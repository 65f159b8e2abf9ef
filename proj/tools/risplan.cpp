// risplan: RIS deployment planning for joint sensing and communication.

#include "risplan/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace risplan;

struct Overrides {
  std::string config;
  std::string out = "out";
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mode;
  int bits = 0;
};

RunConfig load_with_overrides(const Overrides& o) {
  RunConfig cfg = load_config(o.config);
  if (o.threads > 0) cfg.threads = o.threads;
  if (o.seed_set) cfg.seed = o.seed;
  if (!o.mode.empty()) cfg.mode = parse_mode(o.mode);
  if (o.bits > 0) cfg.bits = o.bits;
  return cfg;
}

template <typename Body>
int guarded(const std::filesystem::path& out_dir, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    write_error(out_dir, std::string(to_string(e.code())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_error(out_dir, "internal", e.what(), exit_other);
    return exit_other;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS deployment planner for integrated sensing and communication"};
  app.require_subcommand(1);
  Overrides ov;
  std::vector<std::string> modes;
  std::string scene_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config, "run configuration JSON")->required()->envname("RISPLAN_CONFIG");
    sub->add_option("--out", ov.out, "output directory")->envname("RISPLAN_OUT");
    sub->add_option("--threads", ov.threads, "worker threads")->check(CLI::PositiveNumber)->envname("RISPLAN_THREADS");
    sub->add_option_function<std::uint64_t>(
           "--seed", [&](const std::uint64_t& s) { ov.seed = s; ov.seed_set = true; }, "random seed")
        ->envname("RISPLAN_SEED");
    sub->add_option("--bits", ov.bits, "RIS phase resolution in bits")->check(CLI::Range(1, 16))->envname("RISPLAN_BITS");
  };

  CLI::App* run = app.add_subcommand("run", "plan a deployment and write all artifacts");
  add_common(run);
  run->add_option("--mode", ov.mode, "full-isac | comm-only | pathloss-baseline | passive-orientation")
      ->envname("RISPLAN_MODE");

  CLI::App* compare = app.add_subcommand("compare", "plan several modes on one scene and tabulate");
  add_common(compare);
  compare->add_option("--mode", modes, "modes to compare, each optionally suffixed ':bits'")
      ->required()
      ->expected(1, -1)
      ->delimiter(',')
      ->envname("RISPLAN_MODES");

  CLI::App* validate = app.add_subcommand("validate-scene", "parse and check a scene file");
  validate->add_option("scene", scene_path, "scene JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_invalid;
  }

  const std::filesystem::path out_dir(ov.out);
  if (*run) {
    return guarded(out_dir, [&] {
      RunLog log;
      const RunConfig cfg = load_with_overrides(ov);
      try {
        return run_command(cfg, out_dir, log);
      } catch (...) {
        try {
          write_text(out_dir / "run.log", log.text());
        } catch (...) {
        }
        throw;
      }
    });
  }
  if (*compare) {
    return guarded(out_dir, [&] {
      RunLog log;
      const RunConfig cfg = load_with_overrides(ov);
      std::filesystem::create_directories(out_dir);
      std::filesystem::remove(out_dir / "error.json");
      const auto rows = compare_modes(cfg, modes, log);
      write_comparison(out_dir, rows);
      write_text(out_dir / "run.log", log.text());
      return exit_ok;
    });
  }
  try {
    const SceneSpec spec = load_scene(scene_path, 1.5, 50.0);
    const Scene scene = spec.build();
    std::cout << "scene ok: " << scene.buildings().size() << " buildings, " << scene.ue_areas().size()
              << " UE areas" << (scene.uav_area() ? ", UAV area" : "") << '\n';
    return exit_ok;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}
