#pragma once

// Runners behind the dipnoise subcommands. Each runner computes everything
// in memory and returns the files to write; nothing touches the disk until
// the whole run has succeeded.

#include <json.hpp>

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "noisecore.hpp"
#include "oracle.hpp"

#ifndef DIPNOISE_VERSION
#define DIPNOISE_VERSION "0.0.0"
#endif

namespace dipnoise {

inline constexpr const char* kToolkitName = "dipnoise";

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunOutput {
  std::vector<OutputFile> files;
  bool verdict = true;  // false when a check ran but did not pass
};

/// Shortest round-trip decimal form ('.' separator, locale independent).
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return std::string(buf.data(), ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row_strings(header); }

  void row(const std::vector<double>& values) {
    require(values.size() == columns_, "csv row width mismatch");
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_double(v));
    row_strings(s);
  }

  std::string str() const { return out_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }
  std::size_t columns_;
  std::string out_;
};

inline json toolkit_json() { return {{"name", kToolkitName}, {"version", DIPNOISE_VERSION}}; }

inline json sidecar(const RunConfig& c, const std::string& command) {
  return {{"toolkit", toolkit_json()}, {"command", command}, {"config", resolved_json(c)}};
}

inline std::string curve_label(Axis axis, const OrientationEntry& o) {
  return std::string(to_string(axis)) + "_mu" + o.label;
}

inline NoiseModel model_for(const RunConfig& c, Axis axis, const OrientationEntry& o) {
  NoiseModel m = c.model;
  m.motion = axis;
  m.orientation = o.u;
  return m;
}

inline json crossover_json(const CrossoverReport& r) {
  json j = {{"found", r.found},
            {"sign_changes", r.sign_changes},
            {"bracket", {r.bracket_lo, r.bracket_hi}}};
  if (r.found) {
    j["l_over_d"] = r.location_over_d;
    j["l"] = r.location;
    j["residual"] = r.residual;
    j["ratio_at_l"] = r.ratio_at_location;
  }
  return j;
}

// ---------------------------------------------------------------------------

inline RunOutput run_sweep(const RunConfig& c) {
  RunOutput out;
  json side = sidecar(c, "sweep");
  side["curves"] = json::array();
  for (const auto& o : c.orientations) {
    bool y_cross = false, z_cross = false, y_run = false, z_run = false;
    for (Axis axis : c.motion_axes) {
      const NoiseModel m = model_for(c, axis, o);
      const SweepResult r = ratio_sweep(m, c.sweep.variable, c.sweep.min, c.sweep.max, c.sweep.points);
      CsvWriter csv({std::string(variable_column(c.sweep.variable)), "S_self", "S_cross", "ratio", "S_plus", "S_minus"});
      double min_ratio = 2, min_at = 0;
      for (const auto& row : r.rows) {
        const auto& n = row.noise;
        csv.row({row.variable, n.s_self, n.s_cross, n.ratio, n.s_plus, n.s_minus});
        if (n.ratio < min_ratio) {
          min_ratio = n.ratio;
          min_at = row.variable;
        }
      }
      std::vector<double> cross;
      for (const auto& row : r.rows) cross.push_back(row.noise.s_cross);
      const std::string file = c.prefix + "_" + curve_label(axis, o) + ".csv";
      out.files.push_back({file, csv.str()});
      json curve = {{"file", file},
                    {"motion_axis", std::string(to_string(axis))},
                    {"orientation", o.source},
                    {"grid_resolution", r.resolution},
                    {"min_ratio", min_ratio},
                    {"min_ratio_at", min_at},
                    {"sweep_sign_changes", count_sign_changes(cross)}};
      if (c.sweep.crossover && c.sweep.variable == SweepVariable::ion_separation) {
        const CrossoverReport rep = find_crossover(m, c.sweep.bracket_lo, c.sweep.bracket_hi, c.sweep.crossover_samples);
        curve["crossover"] = crossover_json(rep);
        if (axis == Axis::y) {
          y_run = true;
          y_cross = rep.found;
        }
        if (axis == Axis::z) {
          z_run = true;
          z_cross = rep.found;
        }
      }
      side["curves"].push_back(curve);
    }
    if (y_run && z_run) {
      side["classification"].push_back({{"orientation", o.source},
                                        {"y_crossover", y_cross},
                                        {"z_crossover", z_cross},
                                        {"class", std::string(to_string(classify_orientation(y_cross, z_cross)))}});
    }
  }
  out.files.push_back({c.prefix + ".json", side.dump(2) + "\n"});
  return out;
}

inline RunOutput run_scaling(const RunConfig& c) {
  RunOutput out;
  json side = sidecar(c, "scaling");
  const auto heights = log_space(c.scaling.d_min, c.scaling.d_max, c.scaling.points);
  std::vector<std::string> header{"d"};
  std::vector<std::vector<double>> columns;
  side["curves"] = json::array();
  for (Axis axis : c.motion_axes) {
    for (const auto& o : c.orientations) {
      const NoiseModel m = model_for(c, axis, o);
      const auto s = scaling_sweep(m, heights);
      const ScalingFit fit = scaling_exponent(heights, s, c.scaling.window);
      const std::string label = curve_label(axis, o);
      header.push_back("S_" + label);
      header.push_back("slope_" + label);
      columns.push_back(s);
      columns.push_back(fit.local_slope);
      json curve = {{"column", "S_" + label},
                    {"motion_axis", std::string(to_string(axis))},
                    {"orientation", o.source},
                    {"window", fit.window}};
      curve["break_point"] = fit.break_point ? json(*fit.break_point) : json(nullptr);
      if (c.scaling.fit_range)
        curve["fit_range_slope"] = log_slope_in_range(heights, s, c.scaling.fit_range->first, c.scaling.fit_range->second);
      side["curves"].push_back(curve);
    }
  }
  CsvWriter csv(header);
  for (std::size_t i = 0; i < heights.size(); ++i) {
    std::vector<double> row{heights[i]};
    for (const auto& col : columns) row.push_back(col[i]);
    csv.row(row);
  }
  const std::string file = c.prefix + "_scaling.csv";
  out.files.push_back({file, csv.str()});
  side["file"] = file;
  side["grid_resolution_at_d_min"] = model_resolution(c.model, heights.front());
  out.files.push_back({c.prefix + ".json", side.dump(2) + "\n"});
  return out;
}

inline RunOutput run_chain(const RunConfig& c) {
  RunOutput out;
  json side = sidecar(c, "chain");
  side["curves"] = json::array();
  const auto spacings = log_space(c.chain.spacing_min, c.chain.spacing_max, c.chain.points);
  for (Axis axis : c.motion_axes) {
    for (const auto& o : c.orientations) {
      const NoiseModel m = model_for(c, axis, o);
      const ChainResult r = chain_sweep(m, c.chain.spec, spacings);
      std::vector<std::string> header{"l"};
      json parity = json::array();
      for (std::size_t j = 0; j < r.parity.size(); ++j) {
        header.push_back("S_" + std::to_string(j + 1) + "_" + std::string(to_string(r.parity[j])));
        parity.push_back(std::string(to_string(r.parity[j])));
      }
      CsvWriter csv(header);
      for (const auto& row : r.rows) {
        std::vector<double> v{row.spacing};
        v.insert(v.end(), row.mode_noise.begin(), row.mode_noise.end());
        csv.row(v);
      }
      const std::string file = c.prefix + "_" + curve_label(axis, o) + ".csv";
      out.files.push_back({file, csv.str()});
      side["curves"].push_back({{"file", file},
                                {"motion_axis", std::string(to_string(axis))},
                                {"orientation", o.source},
                                {"mode_parity", parity}});
    }
  }
  out.files.push_back({c.prefix + ".json", side.dump(2) + "\n"});
  return out;
}

inline RunOutput run_oracle_check(const RunConfig& c) {
  RunOutput out;
  json side = sidecar(c, "oracle-check");
  std::vector<CorrelationKernel> kernels = c.oracle.kernels;
  if (kernels.empty()) kernels.push_back(c.model.kernel);
  int total = 0, within = 0;
  double max_z = 0;
  side["cases"] = json::array();
  for (const auto& k : kernels) {
    for (Axis axis : c.motion_axes) {
      for (const auto& o : c.orientations) {
        NoiseModel m = model_for(c, axis, o);
        m.kernel = k;
        const auto ions = IonConfiguration::pair(m.height, m.separation, axis, m.center_x, m.axis_z);
        const QuadratureGrid grid = model_grid(m, ions);
        NoiseOptions nopt;
        nopt.engine = PairSumEngine::direct;
        const NoiseMatrix s = noise_matrix(ions, grid, m.orientation, m.kernel, m.source, nopt);
        OracleOptions oopt;
        oopt.corrupt_g_sign = c.oracle.corrupt_g_sign;
        for (int si = 0; si < c.oracle.seed_count; ++si) {
          const std::uint64_t seed = c.oracle.seed + static_cast<std::uint64_t>(si);
          const EnsembleEstimate est = mc_ensemble_noise(ions, grid, m.orientation, m.kernel, c.oracle.samples, seed, m.source, oopt);
          const OracleComparison cmp = compare_to_oracle(s.s, est, c.oracle.threshold);
          json entries = json::array();
          for (Eigen::Index i = 0; i < s.s.rows(); ++i)
            for (Eigen::Index j = i; j < s.s.cols(); ++j)
              entries.push_back({{"i", i},
                                 {"j", j},
                                 {"s", s.s(i, j)},
                                 {"s_hat", est.s_hat(i, j)},
                                 {"stderr", est.std_error(i, j)},
                                 {"z", cmp.z(i, j)},
                                 {"pass", std::abs(cmp.z(i, j)) <= c.oracle.threshold}});
          side["cases"].push_back({{"kernel", detail::kernel_json(m.kernel)},
                                   {"motion_axis", std::string(to_string(axis))},
                                   {"orientation", o.source},
                                   {"nodes", grid.size()},
                                   {"seed", seed},
                                   {"clipped_fraction", est.clipped_fraction},
                                   {"entries", entries}});
          total += cmp.entries;
          within += cmp.within;
          max_z = std::max(max_z, cmp.max_abs_z);
        }
      }
    }
  }
  const double fraction = total ? static_cast<double>(within) / total : 0.0;
  out.verdict = fraction >= c.oracle.min_pass_fraction;
  side["verdict"] = {{"pass", out.verdict},
                     {"entries", total},
                     {"within_threshold", within},
                     {"fraction", fraction},
                     {"max_abs_z", max_z}};
  out.files.push_back({c.prefix + "_oracle.json", side.dump(2) + "\n"});
  return out;
}

/// Writes each file via a temporary name and a rename, after creating dir.
inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged;
  for (const auto& f : out.files) {
    const auto final_path = dir / f.name;
    auto tmp = final_path;
    tmp += ".tmp";
    std::ofstream os(tmp, std::ios::binary);
    os << f.content;
    os.close();
    if (!os) throw NumericalError("failed to write '" + tmp.string() + "'");
    staged.emplace_back(tmp, final_path);
  }
  for (const auto& [tmp, final_path] : staged) std::filesystem::rename(tmp, final_path);
}

inline std::filesystem::path config_dir() {
#ifdef DIPNOISE_CONFIG_DIR
  return DIPNOISE_CONFIG_DIR;
#else
  return "configs";
#endif
}

/// A path, or the name of a shipped preset (e.g. "fig1").
inline std::filesystem::path resolve_config_path(const std::string& arg) {
  std::filesystem::path p(arg);
  if (std::filesystem::exists(p)) return p;
  auto shipped = config_dir() / (arg + ".json");
  if (std::filesystem::exists(shipped)) return shipped;
  throw ConfigError("config '" + arg + "' not found (neither a file nor a shipped preset)");
}

struct PresetInfo {
  std::string name, description, path;
};

inline std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> v;
  const auto dir = config_dir();
  if (!std::filesystem::is_directory(dir)) return v;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const json j = read_json_file(e.path().string());
    v.push_back({e.path().stem().string(), j.value("description", ""), e.path().string()});
  }
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return v;
}

}  // namespace dipnoise
