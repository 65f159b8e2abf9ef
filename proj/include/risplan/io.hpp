#pragma once

#include "risplan/optimizer.hpp"
#include "risplan/radar.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace risplan {

using Json = nlohmann::json;

namespace io_detail {

[[noreturn]] inline void bad_field(const std::string& field, const std::string& what) {
  fail(ErrorCode::invalid_input, "field '" + field + "': " + what);
}

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) bad_field(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad_field(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad_field(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad_field(path, "must be finite");
  return v;
}

inline int integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) bad_field(path, "expected an integer");
  return j.get<int>();
}

inline Vec2 vec2(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) bad_field(path, "expected [x, y]");
  return Vec2(number(j[0], path + "[0]"), number(j[1], path + "[1]"));
}

inline Vec3 vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) bad_field(path, "expected [x, y, z]");
  return Vec3(number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]"));
}

/// Reads `key` into `out` when present.
template <class T, class Reader>
void optional_field(const Json& j, const std::string& key, const std::string& path, T& out, Reader read) {
  if (!j.is_object()) bad_field(path, "expected an object");
  auto it = j.find(key);
  if (it != j.end()) out = read(*it, join(path, key));
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0.0)) bad_field(path, "must be > 0");
  return v;
}

inline Area area(const Json& j, const std::string& path, double default_height) {
  Area a;
  a.name = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : path;
  a.rect.min = vec2(member(j, "min", path), join(path, "min"));
  a.rect.max = vec2(member(j, "max", path), join(path, "max"));
  if (!(a.rect.max.array() > a.rect.min.array()).all()) bad_field(path, "max must exceed min");
  a.height = default_height;
  optional_field(j, "height", path, a.height, number);
  return a;
}

}  // namespace io_detail

/// Assignment of UE areas to RISs given in the scene file (optional).
struct SceneSpec {
  std::vector<Building> buildings;
  Vec3 bs = Vec3::Zero();
  Box3 bounds;
  std::vector<Area> ue_areas;
  std::optional<Area> uav_area;
  std::optional<double> reflection_loss_db;
  std::vector<std::vector<std::string>> ris_assignment;

  Scene build() const { return Scene(buildings, bs, bounds, ue_areas, uav_area); }
};

inline SceneSpec scene_from_json(const Json& j, double ue_height = 1.5, double uav_height = 50.0) {
  using namespace io_detail;
  if (!j.is_object()) bad_field("scene", "expected an object");
  SceneSpec s;
  const Json& buildings = member(j, "buildings", "");
  if (!buildings.is_array()) bad_field("buildings", "expected an array");
  for (std::size_t i = 0; i < buildings.size(); ++i) {
    const std::string path = "buildings[" + std::to_string(i) + "]";
    const Json& fp = member(buildings[i], "footprint", path);
    if (!fp.is_array()) bad_field(path + ".footprint", "expected an array of [x, y]");
    std::vector<Vec2> poly;
    for (std::size_t k = 0; k < fp.size(); ++k) {
      poly.push_back(vec2(fp[k], path + ".footprint[" + std::to_string(k) + "]"));
    }
    const double h = number(member(buildings[i], "height", path), path + ".height");
    try {
      s.buildings.emplace_back(poly, h);
    } catch (const Error& e) {
      bad_field(path, e.what());
    }
  }
  s.bs = vec3(member(j, "bs", ""), "bs");
  const Json& b = member(j, "bounds", "");
  s.bounds.min = vec3(member(b, "min", "bounds"), "bounds.min");
  s.bounds.max = vec3(member(b, "max", "bounds"), "bounds.max");
  if (!(s.bounds.max.array() > s.bounds.min.array()).all()) bad_field("bounds", "max must exceed min");
  if (!s.bounds.contains(s.bs)) bad_field("bs", "lies outside the scene bounds");
  const Json& areas = member(j, "ue_areas", "");
  if (!areas.is_array() || areas.empty()) bad_field("ue_areas", "expected a nonempty array");
  for (std::size_t i = 0; i < areas.size(); ++i) {
    s.ue_areas.push_back(area(areas[i], "ue_areas[" + std::to_string(i) + "]", ue_height));
  }
  for (std::size_t i = 0; i < s.ue_areas.size(); ++i) {
    for (std::size_t k = i + 1; k < s.ue_areas.size(); ++k) {
      if (s.ue_areas[i].name == s.ue_areas[k].name) {
        bad_field("ue_areas[" + std::to_string(k) + "].name", "duplicate name '" + s.ue_areas[k].name + "'");
      }
    }
  }
  if (j.contains("uav_area")) s.uav_area = area(j["uav_area"], "uav_area", uav_height);
  if (j.contains("reflection_loss_db")) {
    s.reflection_loss_db = number(j["reflection_loss_db"], "reflection_loss_db");
  }
  if (j.contains("ris_assignment")) {
    const Json& a = j["ris_assignment"];
    if (!a.is_array()) bad_field("ris_assignment", "expected an array of area-name lists");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string path = "ris_assignment[" + std::to_string(i) + "]";
      if (!a[i].is_array() || a[i].empty()) bad_field(path, "expected a nonempty array of area names");
      std::vector<std::string> names;
      for (const auto& n : a[i]) {
        if (!n.is_string()) bad_field(path, "expected area names");
        const std::string name = n.get<std::string>();
        if (std::none_of(s.ue_areas.begin(), s.ue_areas.end(), [&](const Area& x) { return x.name == name; })) {
          bad_field(path, "unknown area '" + name + "'");
        }
        names.push_back(name);
      }
      s.ris_assignment.push_back(std::move(names));
    }
  }
  try {
    (void)s.build();
  } catch (const Error& e) {
    bad_field("scene", e.what());
  }
  return s;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::invalid_input, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline SceneSpec load_scene(const std::filesystem::path& path, double ue_height = 1.5,
                            double uav_height = 50.0) {
  return scene_from_json(read_json_file(path), ue_height, uav_height);
}

struct RadarConfig {
  bool enabled = true;
  CfarConfig cfar;
  double association_gate_m = 1.0;
  double velocity_crop_mps = 10.0;
  bool add_noise = true;
  Vec3 uav_velocity = Vec3(5.0, 0.0, 0.0);
};

struct RunConfig {
  std::filesystem::path scene_path;
  Mode mode = Mode::full_isac;
  std::uint64_t seed = 1;
  int threads = 1;
  LinkBudget link;
  OfdmParams ofdm;
  PropagationConfig prop;
  QosThresholds thresholds;
  int bs_count_y = 16;
  int bs_count_z = 16;
  double bs_gain_dbi = 3.0;
  Orientation bs_orientation;
  double ue_gain_dbi = 3.0;
  double ue_height = 1.5;
  double uav_height = 50.0;
  double rcs = 0.04;
  int m_ref = 400;
  double efficiency_comm = 0.3;
  double efficiency_sense = 0.3;
  int bits = 2;
  double theta_lo_deg = -30.0;
  double theta_hi_deg = 60.0;
  double psi_half_width_deg = 60.0;
  double max_reflection_angle_deg = 75.0;
  double cell_size = 10.0;
  double uav_cell_size = 10.0;
  LinkAccessRules regions;
  int simplex_size = 0;
  NelderMeadOptions nm;
  std::vector<double> beta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double orientation_step_deg = 1.0;
  RadarConfig radar;

  /// SystemModel without waveform moments (those need the QPSK frame).
  SystemModel system_model() const {
    SystemModel m;
    m.link = link;
    m.ofdm = ofdm;
    m.prop = prop;
    m.thresholds = thresholds;
    m.bs_array.geom = UpaGeometry::half_wavelength(bs_count_y, bs_count_z, prop.wavelength());
    m.bs_array.orientation = bs_orientation;
    m.bs_array.pattern = GainPattern::isotropic(bs_gain_dbi);
    m.ue_pattern = GainPattern::isotropic(ue_gain_dbi);
    m.efficiency_comm = efficiency_comm;
    m.efficiency_sense = efficiency_sense;
    m.rcs = rcs;
    m.m_ref = m_ref;
    m.bits = bits;
    m.beta_grid = beta_grid;
    m.orientation_step = deg_to_rad(orientation_step_deg);
    m.theta_lo = deg_to_rad(theta_lo_deg);
    m.theta_hi = deg_to_rad(theta_hi_deg);
    m.psi_half_width = deg_to_rad(psi_half_width_deg);
    m.max_reflection_angle = deg_to_rad(max_reflection_angle_deg);
    return m;
  }
};

/// Parses a run config. Relative scene paths resolve against `base_dir`.
inline RunConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  using namespace io_detail;
  if (!j.is_object()) bad_field("config", "expected an object");
  RunConfig c;
  const Json& scene = member(j, "scene", "");
  if (!scene.is_string()) bad_field("scene", "expected a path string");
  c.scene_path = scene.get<std::string>();
  if (c.scene_path.is_relative()) c.scene_path = base_dir / c.scene_path;
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) bad_field("mode", "expected a string");
    try {
      c.mode = parse_mode(j["mode"].get<std::string>());
    } catch (const Error& e) {
      bad_field("mode", e.what());
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad_field("seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  optional_field(j, "threads", "", c.threads, integer);

  auto section = [&](const char* key) -> const Json* {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    if (!it->is_object()) bad_field(key, "expected an object");
    return &*it;
  };
  if (const Json* s = section("link")) {
    optional_field(*s, "tx_power_dbm", "link", c.link.tx_power_dbm, number);
    optional_field(*s, "noise_psd_dbm_hz", "link", c.link.noise_psd_dbm_hz, number);
    optional_field(*s, "snr_threshold_db", "link", c.link.snr_threshold_db, number);
  }
  if (const Json* s = section("ofdm")) {
    optional_field(*s, "carrier_hz", "ofdm", c.ofdm.carrier, number);
    optional_field(*s, "bandwidth_hz", "ofdm", c.ofdm.bandwidth, number);
    optional_field(*s, "subcarriers", "ofdm", c.ofdm.subcarriers, integer);
    optional_field(*s, "symbols", "ofdm", c.ofdm.symbols, integer);
    positive(c.ofdm.carrier, "ofdm.carrier_hz");
    positive(c.ofdm.bandwidth, "ofdm.bandwidth_hz");
    if (c.ofdm.subcarriers < 1) bad_field("ofdm.subcarriers", "must be >= 1");
    if (c.ofdm.symbols < 1) bad_field("ofdm.symbols", "must be >= 1");
  }
  c.link.bandwidth = c.ofdm.bandwidth;
  c.prop.carrier_freq = c.ofdm.carrier;
  if (const Json* s = section("thresholds")) {
    optional_field(*s, "range_crb_m2", "thresholds", c.thresholds.range_crb_max, number);
    optional_field(*s, "velocity_crb_m2s2", "thresholds", c.thresholds.velocity_crb_max, number);
    positive(c.thresholds.range_crb_max, "thresholds.range_crb_m2");
    positive(c.thresholds.velocity_crb_max, "thresholds.velocity_crb_m2s2");
  }
  c.thresholds.snr_threshold = c.link.snr_threshold();
  if (const Json* s = section("propagation")) {
    optional_field(*s, "reflection_loss_db", "propagation", c.prop.reflection_loss_db, number);
    optional_field(*s, "max_paths", "propagation", c.prop.max_paths, integer);
    optional_field(*s, "pl_max_db", "propagation", c.prop.pl_max_db, number);
    if (s->contains("ground_reflection")) {
      if (!(*s)["ground_reflection"].is_boolean()) bad_field("propagation.ground_reflection", "expected a boolean");
      c.prop.ground_reflection = (*s)["ground_reflection"].get<bool>();
    }
    if (c.prop.max_paths < 1) bad_field("propagation.max_paths", "must be >= 1");
  }
  c.regions.pl_max_db = c.prop.pl_max_db;
  if (const Json* s = section("bs_array")) {
    optional_field(*s, "count_y", "bs_array", c.bs_count_y, integer);
    optional_field(*s, "count_z", "bs_array", c.bs_count_z, integer);
    optional_field(*s, "gain_dbi", "bs_array", c.bs_gain_dbi, number);
    if (s->contains("orientation_deg")) {
      const Vec2 o = vec2((*s)["orientation_deg"], "bs_array.orientation_deg");
      c.bs_orientation = {deg_to_rad(o.x()), deg_to_rad(o.y())};
    }
    if (c.bs_count_y < 1 || c.bs_count_z < 1) bad_field("bs_array", "counts must be >= 1");
  }
  if (const Json* s = section("ue")) {
    optional_field(*s, "gain_dbi", "ue", c.ue_gain_dbi, number);
    optional_field(*s, "height_m", "ue", c.ue_height, number);
  }
  if (const Json* s = section("uav")) {
    optional_field(*s, "height_m", "uav", c.uav_height, number);
    optional_field(*s, "rcs", "uav", c.rcs, number);
    if (s->contains("velocity_mps")) c.radar.uav_velocity = vec3((*s)["velocity_mps"], "uav.velocity_mps");
    positive(c.rcs, "uav.rcs");
  }
  if (const Json* s = section("ris")) {
    optional_field(*s, "reference_cells", "ris", c.m_ref, integer);
    optional_field(*s, "efficiency_comm", "ris", c.efficiency_comm, number);
    optional_field(*s, "efficiency_sense", "ris", c.efficiency_sense, number);
    optional_field(*s, "bits", "ris", c.bits, integer);
    if (s->contains("orientation_bounds_deg")) {
      const Json& b = (*s)["orientation_bounds_deg"];
      optional_field(b, "theta_min", "ris.orientation_bounds_deg", c.theta_lo_deg, number);
      optional_field(b, "theta_max", "ris.orientation_bounds_deg", c.theta_hi_deg, number);
      optional_field(b, "psi_half_width", "ris.orientation_bounds_deg", c.psi_half_width_deg, number);
      if (c.theta_hi_deg < c.theta_lo_deg) bad_field("ris.orientation_bounds_deg", "theta_max < theta_min");
    }
    optional_field(*s, "max_reflection_angle_deg", "ris", c.max_reflection_angle_deg, number);
    if (!(c.max_reflection_angle_deg > 0.0 && c.max_reflection_angle_deg <= 90.0)) {
      bad_field("ris.max_reflection_angle_deg", "must lie in (0, 90]");
    }
    if (c.m_ref < 1) bad_field("ris.reference_cells", "must be >= 1");
    if (c.bits < 1 || c.bits > 16) bad_field("ris.bits", "must lie in [1, 16]");
    if (!(c.efficiency_comm > 0.0 && c.efficiency_comm <= 1.0)) bad_field("ris.efficiency_comm", "must lie in (0, 1]");
    if (!(c.efficiency_sense > 0.0 && c.efficiency_sense <= 1.0)) bad_field("ris.efficiency_sense", "must lie in (0, 1]");
  }
  if (const Json* s = section("grid")) {
    optional_field(*s, "cell_size_m", "grid", c.cell_size, number);
    optional_field(*s, "uav_cell_size_m", "grid", c.uav_cell_size, number);
    positive(c.cell_size, "grid.cell_size_m");
    positive(c.uav_cell_size, "grid.uav_cell_size_m");
  }
  if (const Json* s = section("regions")) {
    optional_field(*s, "patch_step_m", "regions", c.regions.patch_step, number);
    optional_field(*s, "tile_width_m", "regions", c.regions.tile_width, number);
    optional_field(*s, "mount_min_m", "regions", c.regions.mount_min, number);
    optional_field(*s, "roof_margin_m", "regions", c.regions.roof_margin, number);
    optional_field(*s, "standoff_m", "regions", c.regions.standoff, number);
    if (s->contains("merge_face_tiles")) {
      if (!(*s)["merge_face_tiles"].is_boolean()) bad_field("regions.merge_face_tiles", "expected a boolean");
      c.regions.merge_face_tiles = (*s)["merge_face_tiles"].get<bool>();
    }
    positive(c.regions.patch_step, "regions.patch_step_m");
    positive(c.regions.tile_width, "regions.tile_width_m");
  }
  if (const Json* s = section("optimizer")) {
    optional_field(*s, "simplex_size", "optimizer", c.simplex_size, integer);
    optional_field(*s, "d_min_m", "optimizer", c.nm.d_min, number);
    optional_field(*s, "max_iterations", "optimizer", c.nm.max_iterations, integer);
    optional_field(*s, "orientation_step_deg", "optimizer", c.orientation_step_deg, number);
    if (s->contains("beta_grid")) {
      const Json& g = (*s)["beta_grid"];
      if (!g.is_array() || g.empty()) bad_field("optimizer.beta_grid", "expected a nonempty array");
      c.beta_grid.clear();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string path = "optimizer.beta_grid[" + std::to_string(i) + "]";
        const double b = number(g[i], path);
        if (!(b > 0.0 && b < 1.0)) bad_field(path, "must lie in (0, 1)");
        c.beta_grid.push_back(b);
      }
    }
    positive(c.nm.d_min, "optimizer.d_min_m");
    positive(c.orientation_step_deg, "optimizer.orientation_step_deg");
    if (c.nm.max_iterations < 0) bad_field("optimizer.max_iterations", "must be >= 0");
    if (c.simplex_size < 0) bad_field("optimizer.simplex_size", "must be >= 0");
  }
  if (const Json* s = section("radar")) {
    if (s->contains("enabled")) {
      if (!(*s)["enabled"].is_boolean()) bad_field("radar.enabled", "expected a boolean");
      c.radar.enabled = (*s)["enabled"].get<bool>();
    }
    if (s->contains("noise")) {
      if (!(*s)["noise"].is_boolean()) bad_field("radar.noise", "expected a boolean");
      c.radar.add_noise = (*s)["noise"].get<bool>();
    }
    optional_field(*s, "guard_cells", "radar", c.radar.cfar.guard, integer);
    optional_field(*s, "training_cells", "radar", c.radar.cfar.training, integer);
    optional_field(*s, "false_alarm_rate", "radar", c.radar.cfar.false_alarm_rate, number);
    optional_field(*s, "association_gate_m", "radar", c.radar.association_gate_m, number);
    optional_field(*s, "velocity_crop_mps", "radar", c.radar.velocity_crop_mps, number);
    if (c.radar.cfar.guard < 0 || c.radar.cfar.training < 1) bad_field("radar", "invalid CFAR window");
    if (!(c.radar.cfar.false_alarm_rate > 0.0 && c.radar.cfar.false_alarm_rate < 1.0)) {
      bad_field("radar.false_alarm_rate", "must lie in (0, 1)");
    }
  }
  if (c.threads < 1) bad_field("threads", "must be >= 1");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

/// Writes a file atomically enough for our purposes: any stream failure is an I/O error.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::io_failure, "write failed for '" + path.string() + "'");
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

/// Shortest decimal that round-trips, matching the JSON writer.
inline std::string format_number(double v) {
  Json j = v;
  return j.dump();
}

}  // namespace risplan
