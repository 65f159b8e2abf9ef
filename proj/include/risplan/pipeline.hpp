#pragma once

#include "risplan/evaluation.hpp"
#include "risplan/io.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>

namespace risplan {

/// Collects log lines; timestamps appear only here, never in data artifacts.
class RunLog {
 public:
  explicit RunLog(bool echo = true) : echo_(echo) {}

  void info(const std::string& msg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream line;
    line << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << msg;
    lines_.push_back(line.str());
    if (echo_) std::cerr << msg << '\n';
  }

  std::string text() const {
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

 private:
  bool echo_;
  std::vector<std::string> lines_;
};

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Scene, grids, BS-only coverage and the selected RIS regions for one config.
struct Workspace {
  RunConfig config;
  SceneSpec spec;
  std::unique_ptr<Scene> scene;
  std::vector<GridSet> area_grids;
  GridSet ue_grid;
  /// For each ue_grid cell: (area index, index within that area's grid).
  std::vector<std::pair<int, int>> cell_origin;
  GridSet uav_grid;
  std::vector<double> bs_snr;
  std::vector<int> uncovered;
  std::vector<DeployableRegion> candidates;
  std::vector<DeployableRegion> regions;
  SystemModel model;
  CMat frame;
};

inline std::unique_ptr<Workspace> prepare_workspace(const RunConfig& config, RunLog& log) {
  auto ws = std::make_unique<Workspace>();
  ws->config = config;
  ws->spec = load_scene(config.scene_path, config.ue_height, config.uav_height);
  if (ws->spec.reflection_loss_db) ws->config.prop.reflection_loss_db = *ws->spec.reflection_loss_db;
  ws->scene = std::make_unique<Scene>(ws->spec.build());
  const Scene& scene = *ws->scene;
  if (senses(config.mode) && !scene.uav_area()) {
    fail(ErrorCode::invalid_input, "field 'uav_area': missing (required by mode " + to_string(config.mode) + ")");
  }

  ws->model = ws->config.system_model();
  ws->frame = qpsk_frame(ws->model.ofdm, config.seed);
  ws->model.moments = waveform_moments(ws->model.ofdm, ws->frame, ws->model.link.tx_power_w());

  const Vec2 cell(config.cell_size, config.cell_size);
  ws->ue_grid.name = "ue";
  ws->ue_grid.height = config.ue_height;
  for (std::size_t a = 0; a < scene.ue_areas().size(); ++a) {
    GridSet g = build_grids(scene, scene.ue_areas()[a], cell);
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      ws->ue_grid.cells.push_back(g.cells[i]);
      ws->cell_origin.emplace_back(static_cast<int>(a), static_cast<int>(i));
    }
    ws->area_grids.push_back(std::move(g));
  }
  if (scene.uav_area()) {
    ws->uav_grid = build_grids(scene, *scene.uav_area(), Vec2(config.uav_cell_size, config.uav_cell_size));
  }
  log.info("scene: " + std::to_string(scene.buildings().size()) + " buildings, " +
           std::to_string(ws->ue_grid.cells.size()) + " UE cells, " + std::to_string(ws->uav_grid.cells.size()) +
           " UAV cells");

  const double threshold = ws->model.thresholds.snr_threshold;
  ws->bs_snr.resize(ws->ue_grid.cells.size());
  parallel_for(ws->ue_grid.cells.size(), config.threads, [&](std::size_t i) {
    ws->bs_snr[i] = bs_only_snr(scene, ws->model, ws->ue_grid.cells[i].center);
  });
  for (std::size_t i = 0; i < ws->bs_snr.size(); ++i) {
    if (ws->bs_snr[i] < threshold) ws->uncovered.push_back(static_cast<int>(i));
  }
  log.info("BS-only coverage: " + std::to_string(ws->ue_grid.cells.size() - ws->uncovered.size()) + " of " +
           std::to_string(ws->ue_grid.cells.size()) + " cells meet the SNR threshold");
  if (ws->uncovered.empty()) return ws;

  ws->candidates = generate_candidates(scene, ws->ue_grid, ws->uncovered, ws->uav_grid, ws->config.prop,
                                       ws->config.regions);
  log.info("candidate regions: " + std::to_string(ws->candidates.size()));
  if (ws->spec.ris_assignment.empty()) {
    ws->regions = select_ris_regions(scene, ws->ue_grid, ws->uncovered, ws->candidates, ws->config.regions);
  } else {
    std::set<int> assigned;
    for (const auto& group : ws->spec.ris_assignment) {
      std::vector<int> universe;
      for (int c : ws->uncovered) {
        const auto& name = scene.ue_areas()[static_cast<std::size_t>(ws->cell_origin[static_cast<std::size_t>(c)].first)].name;
        if (std::find(group.begin(), group.end(), name) != group.end() && !assigned.count(c)) universe.push_back(c);
      }
      if (universe.empty()) continue;
      assigned.insert(universe.begin(), universe.end());
      for (auto& r : select_ris_regions(scene, ws->ue_grid, universe, ws->candidates, ws->config.regions)) {
        r.ris_index = static_cast<int>(ws->regions.size());
        ws->regions.push_back(std::move(r));
      }
    }
    std::vector<int> orphans;
    for (int c : ws->uncovered) {
      if (!assigned.count(c)) orphans.push_back(c);
    }
    if (!orphans.empty()) {
      std::string msg = "ris_assignment leaves uncovered cells unassigned:";
      for (int c : orphans) msg += " " + std::to_string(c);
      fail(ErrorCode::infeasible_coverage, msg);
    }
  }
  for (const auto& r : ws->regions) {
    log.info("RIS " + std::to_string(r.ris_index) + ": face " + std::to_string(r.patches.front().face_id) + ", " +
             std::to_string(r.patches.size()) + " patches, " + std::to_string(r.covered_cells.size()) +
             " cells, " + fixed(r.coverage_area, 1) + " m2");
  }
  return ws;
}

/// Result of one mode on a prepared workspace.
struct PlanOutcome {
  Mode mode = Mode::full_isac;
  int bits = 2;
  std::unique_ptr<DeploymentProblem> problem;
  OptimizationResult result;
  ClosureReport closure;
  /// Communication-only runs: can the sized panels meet the CRB thresholds with β_u = 1?
  std::optional<bool> sensing_feasible_full_beta;
};

/// CRB check of a communication-only deployment with all RIS power steered to the UAV.
inline bool comm_only_sensing_feasible(const Workspace& ws, const Step1Result& comm) {
  const DeploymentProblem isac = make_problem(*ws.scene, ws.model, Mode::full_isac, ws.regions, ws.ue_grid,
                                              ws.uav_grid, ws.config.regions.standoff);
  const auto& thr = isac.model.thresholds;
  for (std::size_t n = 0; n < isac.sites.size(); ++n) {
    const RisReference ref = evaluate_reference(isac, n, comm.positions[n]);
    const double scale = static_cast<double>(comm.sizes[n].cells) / isac.model.m_ref;
    const double omega = comm.omega_per_uav(0, static_cast<Eigen::Index>(n) + 1);
    for (std::size_t u = 0; u < isac.uav_centers.size(); ++u) {
      if (!ref.uav_reachable[u]) return false;
      const CrbPair crb = reference_crb_scale(ref.crb_ref[u], 1.0, omega, scale);
      if (crb.range_crb > thr.range_crb_max || crb.velocity_crb > thr.velocity_crb_max) return false;
    }
  }
  return true;
}

inline PlanOutcome plan(const Workspace& ws, Mode mode, int bits, RunLog& log) {
  require(!ws.regions.empty(), "plan: no RIS regions to optimize");
  PlanOutcome out;
  out.mode = mode;
  out.bits = bits;
  SystemModel model = ws.model;
  model.bits = bits;
  out.problem = std::make_unique<DeploymentProblem>(
      make_problem(*ws.scene, model, mode, ws.regions, ws.ue_grid, ws.uav_grid, ws.config.regions.standoff));
  out.problem->threads = ws.config.threads;
  if (senses(mode)) {
    std::string w0;
    for (double w : out.problem->omega0) w0 += " " + fixed(w, 4);
    log.info("direct-path minimum BS weight per UAV cell:" + w0);
  }
  NelderMeadOptions nm = ws.config.nm;
  nm.threads = ws.config.threads;
  out.result = optimize(*out.problem, nm, ws.config.seed, ws.config.simplex_size, ws.config.regions.patch_step);
  const Step1Result& s = out.result.step1;
  log.info(to_string(mode) + " (L=" + std::to_string(bits) + "): objective " + fixed(s.objective, 6) + " after " +
           std::to_string(out.result.iterations) + " iterations, " + std::to_string(out.result.evaluations) +
           " evaluations" + (out.result.converged ? "" : " (not converged)"));
  for (std::size_t n = 0; n < s.sizes.size(); ++n) {
    log.info("  RIS " + std::to_string(n) + ": side " + fixed(s.sizes[n].side, 3) + " m (" +
             std::to_string(s.sizes[n].cells_per_side) + "^2 cells), theta " +
             fixed(rad_to_deg(s.orientations[n].theta_r), 2) + " deg, psi " +
             fixed(rad_to_deg(s.orientations[n].psi_r), 2) + " deg, coverage " +
             fixed(100.0 * s.coverage_fraction[n], 2) + "%");
  }
  out.closure = evaluate_closure(*out.problem, s);
  const auto& c = out.closure.summary;
  log.info("closure: worst SNR margin " + fixed(c.worst_snr_margin_db, 2) + " dB; SNR gap explicit-vs-accounting min/mean/max " +
           fixed(c.snr_gap_min_db, 2) + "/" + fixed(c.snr_gap_mean_db, 2) + "/" + fixed(c.snr_gap_max_db, 2) + " dB");
  if (senses(mode)) {
    log.info("closure: worst CRB excess range " + fixed(c.worst_range_crb_excess_db, 2) + " dB, velocity " +
             fixed(c.worst_velocity_crb_excess_db, 2) + " dB; CRB gap min/mean/max " + fixed(c.crb_gap_min_db, 2) +
             "/" + fixed(c.crb_gap_mean_db, 2) + "/" + fixed(c.crb_gap_max_db, 2) + " dB");
  } else {
    out.sensing_feasible_full_beta = comm_only_sensing_feasible(ws, s);
    log.info(std::string("comm-only deployment meets the CRB thresholds with beta_u = 1: ") +
             (*out.sensing_feasible_full_beta ? "yes" : "no"));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Artifacts

inline Json deployment_json(const Workspace& ws, const PlanOutcome& o) {
  const Step1Result& s = o.result.step1;
  const bool sensing = senses(o.mode);
  Json j;
  j["mode"] = to_string(o.mode);
  j["bits"] = o.bits;
  j["seed"] = ws.config.seed;
  j["converged"] = o.result.converged;
  j["iterations"] = o.result.iterations;
  j["evaluations"] = o.result.evaluations;
  j["objective"] = s.objective;
  j["unit_cell_area_m2"] = o.problem->model.unit_area();
  Json ris = Json::array();
  for (std::size_t n = 0; n < s.sizes.size(); ++n) {
    const auto& region = o.problem->sites[n].region;
    Json r;
    r["index"] = n;
    r["position"] = to_json(s.positions[n]);
    r["orientation_deg"] = {{"theta", rad_to_deg(s.orientations[n].theta_r)},
                            {"psi", rad_to_deg(s.orientations[n].psi_r)}};
    r["size"] = {{"area_m2", s.sizes[n].area},
                 {"side_m", s.sizes[n].side},
                 {"cells_per_side", s.sizes[n].cells_per_side},
                 {"cells", s.sizes[n].cells}};
    r["coverage_area_m2"] = region.coverage_area;
    r["covered_cells"] = region.covered_cells;
    r["coverage_fraction"] = s.coverage_fraction[n];
    r["face_id"] = o.problem->sites[n].face_id;
    Json patches = Json::array();
    for (const auto& p : region.patches) patches.push_back({{"u0", p.u0}, {"u1", p.u1}, {"z0", p.z0}, {"z1", p.z1}});
    r["patches"] = patches;
    r["reference_snr_worst_db"] = linear_to_db(s.references[n].gamma_ref_worst);
    if (sensing) {
      Json crb = Json::array();
      for (const auto& c : s.references[n].crb_ref) crb.push_back({{"range_m2", c.range_crb}, {"velocity_m2s2", c.velocity_crb}});
      r["reference_crb"] = crb;
    }
    ris.push_back(r);
  }
  j["ris"] = ris;
  j["beta_per_uav"] = to_json(s.beta_per_uav);
  j["omega_per_uav"] = to_json(s.omega_per_uav);
  j["constraint_constants"] = to_json(s.c_per_uav);
  const auto& c = o.closure.summary;
  Json closure = {{"records", c.records},
                  {"worst_snr_margin_db", c.worst_snr_margin_db},
                  {"snr_gap_db", {{"min", c.snr_gap_min_db}, {"mean", c.snr_gap_mean_db}, {"max", c.snr_gap_max_db}}}};
  if (sensing) {
    closure["worst_range_crb_excess_db"] = c.worst_range_crb_excess_db;
    closure["worst_velocity_crb_excess_db"] = c.worst_velocity_crb_excess_db;
    closure["crb_gap_db"] = {{"min", c.crb_gap_min_db}, {"mean", c.crb_gap_mean_db}, {"max", c.crb_gap_max_db}};
    Json uav = Json::array();
    for (std::size_t u = 0; u < o.problem->uav_centers.size(); ++u) {
      uav.push_back({{"center", to_json(o.problem->uav_centers[u])},
                     {"omega0", o.problem->omega0[u]},
                     {"direct_reference_crb",
                      {{"range_m2", o.problem->direct_crb_ref[u].range_crb},
                       {"velocity_m2s2", o.problem->direct_crb_ref[u].velocity_crb}}}});
    }
    j["uav_cells"] = uav;
    j["thresholds"] = {{"snr_db", ws.config.link.snr_threshold_db},
                       {"range_crb_m2", ws.config.thresholds.range_crb_max},
                       {"velocity_crb_m2s2", ws.config.thresholds.velocity_crb_max}};
  } else {
    j["thresholds"] = {{"snr_db", ws.config.link.snr_threshold_db}};
    j["sensing_feasible_full_beta"] = o.sensing_feasible_full_beta.value_or(false);
  }
  j["closure"] = closure;
  return j;
}

struct SnrMapRow {
  int cell_index = 0;
  double x = 0.0, y = 0.0;
  /// Empty for cells without any usable link.
  std::optional<double> snr_db;
  std::optional<double> snr_explicit_db;
  std::string served_by;
};

/// Per-area SNR maps: RIS-served cells take the worst value over UAV cells.
inline std::vector<std::vector<SnrMapRow>> snr_maps(const Workspace& ws, const PlanOutcome* o) {
  std::map<int, double> model_min, explicit_min;
  std::map<int, int> ris_of;
  if (o) {
    for (const auto& r : o->closure.records) {
      auto [it, fresh] = model_min.emplace(r.cell, r.snr_model);
      if (!fresh) it->second = std::min(it->second, r.snr_model);
      auto [jt, fresh2] = explicit_min.emplace(r.cell, r.snr_explicit);
      if (!fresh2) jt->second = std::min(jt->second, r.snr_explicit);
      ris_of[r.cell] = r.ris;
    }
  }
  std::vector<std::vector<SnrMapRow>> maps(ws.area_grids.size());
  for (std::size_t i = 0; i < ws.ue_grid.cells.size(); ++i) {
    const auto [area, local] = ws.cell_origin[i];
    SnrMapRow row;
    row.cell_index = local;
    row.x = ws.ue_grid.cells[i].center.x();
    row.y = ws.ue_grid.cells[i].center.y();
    const int gi = static_cast<int>(i);
    if (model_min.count(gi)) {
      row.snr_db = linear_to_db(model_min[gi]);
      row.snr_explicit_db = linear_to_db(explicit_min[gi]);
      row.served_by = "ris-" + std::to_string(ris_of[gi]);
    } else {
      if (ws.bs_snr[i] > 0.0) {
        row.snr_db = linear_to_db(ws.bs_snr[i]);
        row.snr_explicit_db = row.snr_db;
      }
      const bool bs_ok = ws.bs_snr[i] >= ws.model.thresholds.snr_threshold;
      row.served_by = bs_ok ? "bs" : "none";
    }
    maps[static_cast<std::size_t>(area)].push_back(row);
  }
  return maps;
}

inline std::string file_token(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

inline void write_snr_maps(const std::filesystem::path& dir, const Workspace& ws, const PlanOutcome* o) {
  const auto maps = snr_maps(ws, o);
  for (std::size_t a = 0; a < maps.size(); ++a) {
    const std::string base = "snr_map_" + file_token(ws.scene->ue_areas()[a].name);
    std::string csv = "cell_index,x,y,snr_db,snr_explicit_db,served_by\n";
    Json cells = Json::array();
    for (const auto& r : maps[a]) {
      auto text = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
      auto value = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
      csv += std::to_string(r.cell_index) + "," + format_number(r.x) + "," + format_number(r.y) + "," +
             text(r.snr_db) + "," + text(r.snr_explicit_db) + "," + r.served_by + "\n";
      cells.push_back({{"cell_index", r.cell_index}, {"x", r.x}, {"y", r.y}, {"snr_db", value(r.snr_db)},
                       {"snr_explicit_db", value(r.snr_explicit_db)}, {"served_by", r.served_by}});
    }
    write_text(dir / (base + ".csv"), csv);
    write_text(dir / (base + ".json"),
               dump_json({{"area", ws.scene->ue_areas()[a].name},
                          {"snr_threshold_db", ws.config.link.snr_threshold_db},
                          {"cells", cells}}));
  }
}

inline void write_convergence(const std::filesystem::path& path, const OptimizationResult& r) {
  std::string csv = "iteration,best_objective";
  const std::size_t n = r.step1.sizes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string k = std::to_string(i);
    csv += ",ris" + k + "_mean_m,ris" + k + "_std_m,ris" + k + "_max_m";
  }
  csv += "\n";
  for (const auto& t : r.trace) {
    csv += std::to_string(t.iteration) + "," + format_number(t.best);
    for (std::size_t i = 0; i < n; ++i) {
      const SpreadStats s = i < t.spread.size() ? t.spread[i] : SpreadStats{};
      csv += "," + format_number(s.mean) + "," + format_number(s.stddev) + "," + format_number(s.max);
    }
    csv += "\n";
  }
  write_text(path, csv);
}

inline void write_closure_csv(const std::filesystem::path& path, const ClosureReport& c) {
  std::string csv =
      "ris,cell,uav,beta,omega,snr_model_db,snr_explicit_db,range_crb_model,range_crb_explicit,"
      "velocity_crb_model,velocity_crb_explicit\n";
  for (const auto& r : c.records) {
    csv += std::to_string(r.ris) + "," + std::to_string(r.cell) + "," + std::to_string(r.uav) + "," +
           format_number(r.beta) + "," + format_number(r.omega) + "," + format_number(linear_to_db(r.snr_model)) +
           "," + format_number(linear_to_db(r.snr_explicit)) + "," + format_number(r.range_crb_model) + "," +
           format_number(r.range_crb_explicit) + "," + format_number(r.velocity_crb_model) + "," +
           format_number(r.velocity_crb_explicit) + "\n";
  }
  write_text(path, csv);
}

/// Noise per resource element after the demodulating FFT: N0·B.
struct RadarRun {
  RadarScenario scenario;
  RangeVelocityMap map;
  DetectionReport detections;
  std::vector<int> association;
  std::optional<PositionEstimate> estimate;
  std::string estimate_error;
};

inline RadarRun run_radar(const Workspace& ws, const PlanOutcome& o, std::size_t uav_index, std::uint64_t seed) {
  const RadarConfig& rc = ws.config.radar;
  RadarRun run;
  run.scenario = radar_scenario(*o.problem, o.result.step1, uav_index, rc.uav_velocity);
  const double noise = rc.add_noise ? ws.model.link.noise_power_w() : 0.0;
  const CMat rx = synthesize_returns(ws.model.ofdm, ws.frame, run.scenario.paths, noise, seed);
  run.map = range_velocity_map(rx, ws.frame, ws.model.ofdm);
  run.detections = detect_paths(run.map, static_cast<int>(run.scenario.paths.size()), rc.cfar);
  std::vector<double> predicted;
  for (const auto& p : run.scenario.paths) predicted.push_back(p.range);
  run.association = associate_detections(run.detections.detections, predicted, rc.association_gate_m);
  std::vector<double> ranges;
  for (int idx : run.association) {
    ranges.push_back(idx >= 0 ? run.detections.detections[static_cast<std::size_t>(idx)].range_est
                              : std::numeric_limits<double>::quiet_NaN());
  }
  try {
    run.estimate = ls_position(ws.scene->bs_position(), run.scenario.ris_positions, ranges, run.scenario.uav.z());
  } catch (const Error& e) {
    run.estimate_error = e.what();
  }
  return run;
}

inline void write_radar_artifacts(const std::filesystem::path& dir, const Workspace& ws, const PlanOutcome& o,
                                  RunLog& log) {
  const auto& uav = o.problem->uav_centers;
  const Vec2 mid = ws.scene->uav_area()->rect.min + 0.5 * (ws.scene->uav_area()->rect.max - ws.scene->uav_area()->rect.min);
  std::size_t exemplary = 0;
  for (std::size_t u = 1; u < uav.size(); ++u) {
    if ((uav[u].head<2>() - mid).norm() < (uav[exemplary].head<2>() - mid).norm()) exemplary = u;
  }
  Json positions = Json::array();
  for (std::size_t u = 0; u < uav.size(); ++u) {
    const RadarRun run = run_radar(ws, o, u, ws.config.seed + 1000 + u);
    Json entry = {{"uav_cell", u}, {"true_position", to_json(uav[u])}};
    if (run.estimate) {
      entry["estimate"] = to_json(run.estimate->position);
      entry["error_m"] = (run.estimate->position - uav[u]).norm();
      entry["residual_m"] = run.estimate->residual;
    } else {
      entry["estimate"] = nullptr;
      entry["failure"] = run.estimate_error;
    }
    positions.push_back(entry);
    if (u != exemplary) continue;

    const auto& map = run.map;
    double max_range = 0.0;
    for (const auto& p : run.scenario.paths) max_range = std::max(max_range, p.range);
    const int rows = std::min<int>(static_cast<int>(map.range_axis.size()),
                                   static_cast<int>(std::ceil((max_range + 20.0) / map.range_resolution)) + 1);
    std::vector<int> cols;
    for (std::size_t c = 0; c < map.velocity_axis.size(); ++c) {
      if (std::abs(map.velocity_axis[c]) <= ws.config.radar.velocity_crop_mps + 1e-9) cols.push_back(static_cast<int>(c));
    }
    std::string csv = "range_m";
    for (int c : cols) csv += "," + format_number(map.velocity_axis[static_cast<std::size_t>(c)]);
    csv += "\n";
    Json grid = Json::array();
    for (int r = 0; r < rows; ++r) {
      csv += format_number(map.range_axis[static_cast<std::size_t>(r)]);
      Json row = Json::array();
      for (int c : cols) {
        csv += "," + format_number(map.power_db(r, c));
        row.push_back(map.power_db(r, c));
      }
      csv += "\n";
      grid.push_back(row);
    }
    write_text(dir / "rv_map.csv", csv);
    Json vaxis = Json::array();
    for (int c : cols) vaxis.push_back(map.velocity_axis[static_cast<std::size_t>(c)]);
    Json raxis = Json::array();
    for (int r = 0; r < rows; ++r) raxis.push_back(map.range_axis[static_cast<std::size_t>(r)]);
    write_text(dir / "rv_map.json",
               dump_json({{"uav_cell", u},
                          {"axes", {{"range_m", raxis}, {"velocity_mps", vaxis}}},
                          {"range_resolution_m", map.range_resolution},
                          {"velocity_resolution_mps", map.velocity_resolution},
                          {"full_shape", {map.power_db.rows(), map.power_db.cols()}},
                          {"units", "dB"},
                          {"power_db", grid}}));
    Json dets = Json::array();
    for (const auto& d : run.detections.detections) {
      dets.push_back({{"range_m", d.range_est}, {"velocity_mps", d.velocity_est}, {"power_db", d.power_db},
                      {"path_index", d.path_index_hypothesis}, {"range_bin", d.range_bin},
                      {"velocity_bin", d.velocity_bin}});
    }
    Json truth = Json::array();
    for (const auto& p : run.scenario.paths) {
      truth.push_back({{"path_index", p.index}, {"range_m", p.range}, {"velocity_mps", p.velocity},
                       {"power_db", 10.0 * std::log10(std::norm(p.coeff))}});
    }
    write_text(dir / "detections.json", dump_json({{"uav_cell", u},
                                                   {"expected", run.scenario.paths.size()},
                                                   {"partial", run.detections.partial},
                                                   {"warning", run.detections.warning},
                                                   {"detections", dets},
                                                   {"paths", truth}}));
    const auto matched = std::count_if(run.association.begin(), run.association.end(), [](int i) { return i >= 0; });
    log.info("radar: exemplary UAV cell " + std::to_string(u) + ", " + std::to_string(run.detections.detections.size()) +
             " detections" + (run.detections.partial ? " (" + run.detections.warning + ")" : "") + ", " +
             std::to_string(matched) + " of " + std::to_string(run.scenario.paths.size()) +
             " predicted paths matched");
  }
  write_text(dir / "positions.json", dump_json({{"positions", positions}}));
}

/// Exit codes shared by the CLI.
enum ExitCode { exit_ok = 0, exit_other = 1, exit_not_converged = 2, exit_infeasible = 3, exit_invalid = 4, exit_io = 5 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return exit_invalid;
    case ErrorCode::io_failure: return exit_io;
    case ErrorCode::infeasible_coverage:
    case ErrorCode::infeasible_power:
    case ErrorCode::unreachable_targets: return exit_infeasible;
    default: return exit_other;
  }
}

inline void write_error(const std::filesystem::path& dir, const std::string& code, const std::string& message, int exit_code) {
  try {
    std::filesystem::create_directories(dir);
    write_text(dir / "error.json", dump_json({{"error", code}, {"message", message}, {"exit_code", exit_code}}));
  } catch (...) {
  }
}

/// Full run: preprocessing, optimization, closure check, radar and all artifacts.
inline int run_command(const RunConfig& config, const std::filesystem::path& out_dir, RunLog& log) {
  std::filesystem::create_directories(out_dir);
  std::filesystem::remove(out_dir / "error.json");
  log.info("mode " + to_string(config.mode) + ", seed " + std::to_string(config.seed) + ", threads " +
           std::to_string(config.threads));
  auto ws = prepare_workspace(config, log);
  if (ws->regions.empty()) {
    log.info("every UE cell is covered by the BS; no RIS needed");
    write_snr_maps(out_dir, *ws, nullptr);
    write_text(out_dir / "deployment.json",
               dump_json({{"mode", to_string(config.mode)}, {"bits", config.bits}, {"seed", config.seed},
                          {"converged", true}, {"iterations", 0}, {"evaluations", 0}, {"objective", 0.0},
                          {"ris", Json::array()}}));
    write_text(out_dir / "run.log", log.text());
    return exit_ok;
  }
  const PlanOutcome o = plan(*ws, config.mode, config.bits, log);
  write_text(out_dir / "deployment.json", dump_json(deployment_json(*ws, o)));
  write_snr_maps(out_dir, *ws, &o);
  write_convergence(out_dir / "convergence.csv", o.result);
  write_closure_csv(out_dir / "closure.csv", o.closure);
  for (std::size_t n = 0; n < o.closure.exemplary_profiles.size(); ++n) {
    std::ostringstream os;
    write_phase_profile_csv(os, o.closure.exemplary_profiles[n]);
    write_text(out_dir / ("ris_" + std::to_string(n) + "_phases.csv"), os.str());
  }
  if (senses(config.mode) && config.radar.enabled) write_radar_artifacts(out_dir, *ws, o, log);
  write_text(out_dir / "run.log", log.text());
  return o.result.converged ? exit_ok : exit_not_converged;
}

/// `mode` or `mode:bits`.
inline std::pair<Mode, int> parse_mode_token(const std::string& token, int default_bits) {
  const auto colon = token.find(':');
  if (colon == std::string::npos) return {parse_mode(token), default_bits};
  const std::string bits = token.substr(colon + 1);
  int b = 0;
  try {
    std::size_t used = 0;
    b = std::stoi(bits, &used);
    if (used != bits.size()) throw std::invalid_argument(bits);
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_input, "bad bit count in mode '" + token + "'");
  }
  if (b < 1 || b > 16) fail(ErrorCode::invalid_input, "bit count in mode '" + token + "' must lie in [1, 16]");
  return {parse_mode(token.substr(0, colon)), b};
}

struct ComparisonRow {
  std::string label;
  Mode mode = Mode::full_isac;
  int bits = 2;
  bool ok = false;
  std::string error;
  double objective = 0.0;
  std::vector<RisSize> sizes;
  std::vector<double> coverage;
  std::string sensing;
  bool converged = false;
  double worst_snr_margin_db = 0.0;
};

inline std::vector<ComparisonRow> compare_modes(const RunConfig& config, const std::vector<std::string>& tokens,
                                                RunLog& log) {
  if (tokens.size() < 2) fail(ErrorCode::invalid_input, "compare needs at least two modes");
  std::vector<std::pair<Mode, int>> modes;
  for (const auto& t : tokens) modes.push_back(parse_mode_token(t, config.bits));
  RunConfig base = config;
  base.mode = Mode::full_isac;
  for (const auto& m : modes) {
    if (senses(m.first)) base.mode = m.first;
  }
  auto ws = prepare_workspace(base, log);
  if (ws->regions.empty()) fail(ErrorCode::invalid_input, "compare: the BS covers every cell; nothing to deploy");
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ComparisonRow row;
    row.label = tokens[i];
    row.mode = modes[i].first;
    row.bits = modes[i].second;
    try {
      const PlanOutcome o = plan(*ws, row.mode, row.bits, log);
      row.ok = true;
      row.objective = o.result.step1.objective;
      row.sizes = o.result.step1.sizes;
      row.coverage = o.result.step1.coverage_fraction;
      row.converged = o.result.converged;
      row.worst_snr_margin_db = o.closure.summary.worst_snr_margin_db;
      row.sensing = senses(row.mode) ? "satisfied" : "not available";
    } catch (const Error& e) {
      row.error = std::string(to_string(e.code())) + ": " + e.what();
      log.info("mode " + row.label + " failed: " + row.error);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_comparison(const std::filesystem::path& dir, const std::vector<ComparisonRow>& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n = std::max(n, r.sizes.size());
  std::string csv = "mode,bits,status,objective";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string k = std::to_string(i);
    csv += ",ris" + k + "_side_m,ris" + k + "_area_m2,ris" + k + "_coverage_pct";
  }
  csv += ",sensing\n";
  Json arr = Json::array();
  for (const auto& r : rows) {
    csv += r.label + "," + std::to_string(r.bits) + "," + (r.ok ? "ok" : "failed") + "," +
           (r.ok ? format_number(r.objective) : "");
    Json ris = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      if (r.ok && i < r.sizes.size()) {
        csv += "," + format_number(r.sizes[i].side) + "," + format_number(r.sizes[i].area) + "," +
               format_number(100.0 * r.coverage[i]);
        ris.push_back({{"side_m", r.sizes[i].side}, {"area_m2", r.sizes[i].area}, {"coverage_pct", 100.0 * r.coverage[i]}});
      } else {
        csv += ",,,";
      }
    }
    csv += "," + (r.ok ? r.sensing : std::string()) + "\n";
    Json row = {{"mode", r.label}, {"bits", r.bits}, {"status", r.ok ? "ok" : "failed"}, {"ris", ris}};
    if (r.ok) {
      row["objective"] = r.objective;
      row["sensing"] = r.sensing;
      row["converged"] = r.converged;
    } else {
      row["error"] = r.error;
    }
    arr.push_back(row);
  }
  write_text(dir / "comparison.csv", csv);
  write_text(dir / "comparison.json", dump_json({{"rows", arr}}));
}

}  // namespace risplan
