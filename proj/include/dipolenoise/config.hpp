#pragma once

// Declarative run configuration (JSON). Parsing is strict: unknown keys,
// wrong types and out-of-range values raise ConfigError. resolved_json()
// writes every field including defaults, and parse_config() accepts that
// output (or a sidecar wrapping it under "config") unchanged.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "fieldkernels.hpp"
#include "geometry.hpp"
#include "noisecore.hpp"

namespace dipnoise {

using json = nlohmann::json;

struct SweepSection {
  SweepVariable variable = SweepVariable::ion_separation;
  double min = 0.1;
  double max = 10.0;
  int points = 40;
  bool crossover = true;
  double bracket_lo = kDefaultBracketLo;
  double bracket_hi = kDefaultBracketHi;
  int crossover_samples = kCrossoverSamples;
};

struct ScalingSection {
  double d_min = 0.1;
  double d_max = 10.0;
  int points = 16;
  int window = 5;
  std::optional<std::pair<double, double>> fit_range;
};

struct ChainSection {
  ChainSpec spec;
  double spacing_min = 1e-5;
  double spacing_max = 1.0;
  int points = 11;
};

struct OracleSection {
  long long samples = 20000;
  std::uint64_t seed = 1;
  int seed_count = 1;
  bool corrupt_g_sign = false;
  double threshold = 3.0;
  double min_pass_fraction = 0.95;
  std::vector<CorrelationKernel> kernels;  // empty: the top-level kernel
};

struct OrientationEntry {
  DipoleOrientation u;
  std::string label;  // "x", "y", "z" for axis-aligned input, "u0", "u1", ... otherwise
  json source;        // as written in the config
};

struct RunConfig {
  std::string name = "run";
  std::string description;
  NoiseModel model;  // motion and orientation are overridden per output
  std::vector<Axis> motion_axes{Axis::x};
  std::vector<OrientationEntry> orientations;
  SweepSection sweep;
  ScalingSection scaling;
  ChainSection chain;
  OracleSection oracle;
  std::string prefix;  // output file stem; defaults to name
};

namespace detail {

// Wraps a JSON object, records which keys were read, and rejects leftovers.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = get(key);
    if (!v) return def;
    require(v->is_number(), where(key) + " must be a number");
    const double x = v->get<double>();
    require(std::isfinite(x), where(key) + " must be finite");
    return x;
  }

  long long integer(const std::string& key, long long def) {
    const json* v = get(key);
    if (!v) return def;
    require(v->is_number_integer(), where(key) + " must be an integer");
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = get(key);
    if (!v) return def;
    require(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0),
            where(key) + " must be a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = get(key);
    if (!v) return def;
    require(v->is_boolean(), where(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = get(key);
    if (!v) return def;
    require(v->is_string(), where(key) + " must be a string");
    return v->get<std::string>();
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.count(it.key()) > 0, "unknown key " + where(it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline PlanarRegion parse_region(const json& j, const std::string& path) {
  StrictObject o(j, path);
  const std::string type = o.string("type", "");
  PlanarRegion r;
  if (type == "rectangle") {
    r.shape = Rectangle{o.number("x_min", 0), o.number("x_max", 0), o.number("z_min", 0), o.number("z_max", 0)};
  } else if (type == "disk") {
    r.shape = Disk{o.number("center_x", 0), o.number("center_z", 0), o.number("radius", 0)};
  } else if (type == "annulus") {
    r.shape = Annulus{o.number("center_x", 0), o.number("center_z", 0), o.number("r_inner", 0), o.number("r_outer", 0)};
  } else {
    throw ConfigError(path + ".type must be rectangle, disk or annulus");
  }
  r.noise_bearing = o.boolean("noise_bearing", true);
  r.label = o.string("label", "");
  o.finish();
  return r;
}

inline json region_json(const PlanarRegion& r) {
  json j = std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Rectangle>)
          return {{"type", "rectangle"}, {"x_min", s.x_min}, {"x_max", s.x_max}, {"z_min", s.z_min}, {"z_max", s.z_max}};
        else if constexpr (std::is_same_v<S, Disk>)
          return {{"type", "disk"}, {"center_x", s.center_x}, {"center_z", s.center_z}, {"radius", s.radius}};
        else
          return {{"type", "annulus"}, {"center_x", s.center_x}, {"center_z", s.center_z},
                  {"r_inner", s.r_inner}, {"r_outer", s.r_outer}};
      },
      r.shape);
  j["noise_bearing"] = r.noise_bearing;
  j["label"] = r.label;
  return j;
}

inline CorrelationKernel parse_kernel(const json& j, const std::string& path) {
  StrictObject o(j, path);
  CorrelationKernel k;
  k.kind = parse_kernel_kind(o.string("kind", "uncorrelated"));
  k.xi = o.number("xi", 0);
  k.ker0_rmin = o.number("ker0_rmin", 0);
  o.finish();
  k.validate();
  require(k.ker0_rmin >= 0, path + ".ker0_rmin must be non-negative");
  return k;
}

inline json kernel_json(const CorrelationKernel& k) {
  return {{"kind", std::string(to_string(k.kind))}, {"xi", k.xi}, {"ker0_rmin", k.ker0_rmin}};
}

inline OrientationEntry parse_orientation(const json& j, std::size_t index) {
  OrientationEntry e;
  e.source = j;
  if (j.is_string()) {
    const Axis a = parse_axis(j.get<std::string>());
    e.u = DipoleOrientation::along(a);
    e.label = std::string(to_string(a));
  } else if (j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number()) {
    e.u = DipoleOrientation::from_components(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    e.label = "u" + std::to_string(index);
  } else {
    throw ConfigError("orientations[" + std::to_string(index) + "] must be \"x\", \"y\", \"z\" or [ux, uy, uz]");
  }
  return e;
}

inline void positive(double v, const std::string& what) { require(v > 0, what + " must be positive"); }

}  // namespace detail

inline RunConfig parse_config(const json& root_in) {
  const json* root = &root_in;
  // Sidecars carry the resolved config under "config".
  if (root_in.is_object() && root_in.contains("config") && root_in.contains("toolkit")) root = &root_in.at("config");

  detail::StrictObject o(*root, "config");
  RunConfig c;
  c.name = o.string("name", c.name);
  require(!c.name.empty(), "config.name must not be empty");
  c.description = o.string("description", "");
  c.prefix = o.string("prefix", c.name);
  require(!c.prefix.empty() && c.prefix.find('/') == std::string::npos, "config.prefix must be a plain file stem");

  NoiseModel& m = c.model;
  if (const json* g = o.get("geometry")) {
    detail::StrictObject go(*g, "geometry");
    if (go.has("regions")) {
      require(!go.has("preset"), "geometry takes either preset or regions, not both");
      m.geometry.preset.reset();
      const json* regs = go.get("regions");
      require(regs->is_array(), "geometry.regions must be a list");
      for (std::size_t i = 0; i < regs->size(); ++i)
        m.geometry.regions.regions.push_back(detail::parse_region((*regs)[i], "geometry.regions[" + std::to_string(i) + "]"));
      m.geometry.regions.validate();
    } else {
      m.geometry.preset = parse_preset(go.string("preset", "plane_surrogate"));
    }
    m.geometry.scale = go.number("scale", 1.0);
    detail::positive(m.geometry.scale, "geometry.scale");
    m.geometry.scale_with_height = go.boolean("scale_with_height", false);
    if (const json* l = go.get("layout")) {
      detail::StrictObject lo(*l, "geometry.layout");
      m.geometry.layout.length = lo.number("length", m.geometry.layout.length);
      m.geometry.layout.strip_a_z_min = lo.number("strip_a_z_min", m.geometry.layout.strip_a_z_min);
      m.geometry.layout.strip_b_z_max = lo.number("strip_b_z_max", m.geometry.layout.strip_b_z_max);
      lo.finish();
      detail::positive(m.geometry.layout.length, "geometry.layout.length");
    }
    go.finish();
  }

  if (const json* ij = o.get("ions")) {
    detail::StrictObject io(*ij, "ions");
    m.height = io.number("height", 1.0);
    m.separation = io.number("separation", 1.0);
    m.center_x = io.number("center_x", 0.0);
    m.axis_z = io.number("axis_z", 0.0);
    io.finish();
  }
  detail::positive(m.height, "ions.height");
  require(m.separation >= 0, "ions.separation must be non-negative");

  if (const json* a = o.get("motion_axes")) {
    require(a->is_array() && !a->empty(), "motion_axes must be a non-empty list");
    c.motion_axes.clear();
    for (const auto& v : *a) {
      require(v.is_string(), "motion_axes entries must be strings");
      c.motion_axes.push_back(parse_axis(v.get<std::string>()));
    }
  }
  if (const json* a = o.get("orientations")) {
    require(a->is_array() && !a->empty(), "orientations must be a non-empty list");
    for (std::size_t i = 0; i < a->size(); ++i) c.orientations.push_back(detail::parse_orientation((*a)[i], i));
  } else {
    c.orientations.push_back(detail::parse_orientation(json("y"), 0));
  }
  m.orientation = c.orientations.front().u;

  m.source = parse_source_kind(o.string("source", "dipole"));
  if (const json* k = o.get("kernel")) m.kernel = detail::parse_kernel(*k, "kernel");
  m.patch_seed = o.unsigned_integer("patch_seed", 1);

  if (const json* g = o.get("grid")) {
    detail::StrictObject go(*g, "grid");
    m.grid.nodes_per_height = go.number("nodes_per_height", m.grid.nodes_per_height);
    m.grid.resolution = go.number("resolution", 0);
    m.grid.refine_factor = static_cast<int>(go.integer("refine_factor", m.grid.refine_factor));
    m.grid.refine_radius = go.number("refine_radius", m.grid.refine_radius);
    m.grid.nodes_per_xi = go.number("nodes_per_xi", 0);
    const std::string engine = go.string("engine", "automatic");
    if (engine == "automatic") m.engine = PairSumEngine::automatic;
    else if (engine == "direct") m.engine = PairSumEngine::direct;
    else if (engine == "lattice_fft") m.engine = PairSumEngine::lattice_fft;
    else throw ConfigError("grid.engine must be automatic, direct or lattice_fft");
    go.finish();
  }
  detail::positive(m.grid.nodes_per_height, "grid.nodes_per_height");
  require(m.grid.resolution >= 0, "grid.resolution must be non-negative (0 = automatic)");
  require(m.grid.refine_factor >= 1 && m.grid.refine_factor <= 8, "grid.refine_factor must be in [1, 8]");
  require(m.grid.refine_radius >= 0, "grid.refine_radius must be non-negative");
  require(m.grid.nodes_per_xi >= 0, "grid.nodes_per_xi must be non-negative");

  if (const json* s = o.get("sweep")) {
    detail::StrictObject so(*s, "sweep");
    c.sweep.variable = parse_sweep_variable(so.string("variable", "ion_separation"));
    c.sweep.min = so.number("min", c.sweep.min);
    c.sweep.max = so.number("max", c.sweep.max);
    c.sweep.points = static_cast<int>(so.integer("points", c.sweep.points));
    c.sweep.crossover = so.boolean("crossover", c.sweep.crossover);
    if (const json* b = so.get("bracket")) {
      require(b->is_array() && b->size() == 2 && (*b)[0].is_number() && (*b)[1].is_number(),
              "sweep.bracket must be [lo, hi]");
      c.sweep.bracket_lo = (*b)[0].get<double>();
      c.sweep.bracket_hi = (*b)[1].get<double>();
    }
    c.sweep.crossover_samples = static_cast<int>(so.integer("crossover_samples", c.sweep.crossover_samples));
    so.finish();
  }
  require(c.sweep.min > 0 && c.sweep.max > c.sweep.min, "sweep range must be positive and increasing");
  require(c.sweep.points >= 2, "sweep.points must be >= 2");
  require(c.sweep.bracket_lo > 0 && c.sweep.bracket_hi > c.sweep.bracket_lo, "sweep.bracket must be positive and ordered");
  require(c.sweep.crossover_samples >= 2, "sweep.crossover_samples must be >= 2");

  if (const json* s = o.get("scaling")) {
    detail::StrictObject so(*s, "scaling");
    c.scaling.d_min = so.number("d_min", c.scaling.d_min);
    c.scaling.d_max = so.number("d_max", c.scaling.d_max);
    c.scaling.points = static_cast<int>(so.integer("points", c.scaling.points));
    c.scaling.window = static_cast<int>(so.integer("window", c.scaling.window));
    if (const json* f = so.get("fit_range")) {
      if (!f->is_null()) {
        require(f->is_array() && f->size() == 2 && (*f)[0].is_number() && (*f)[1].is_number(),
                "scaling.fit_range must be [d_lo, d_hi]");
        c.scaling.fit_range = std::pair{(*f)[0].get<double>(), (*f)[1].get<double>()};
      }
    }
    so.finish();
  }
  require(c.scaling.d_min > 0 && c.scaling.d_max > c.scaling.d_min, "scaling range must be positive and increasing");
  require(c.scaling.window >= 3, "scaling.window must be >= 3");
  require(c.scaling.points >= c.scaling.window, "scaling.points must be at least the window size");

  if (const json* s = o.get("chain")) {
    detail::StrictObject so(*s, "chain");
    ChainSpec& cs = c.chain.spec;
    cs.ions = static_cast<int>(so.integer("ions", cs.ions));
    cs.model = parse_chain_model(so.string("model", "coulomb"));
    cs.trap_frequency = so.number("trap_frequency", cs.trap_frequency);
    cs.length_unit = so.number("length_unit", cs.length_unit);
    cs.mass = so.number("mass", cs.mass);
    cs.charge = so.number("charge", cs.charge);
    cs.coupling = so.number("coupling", cs.coupling);
    c.chain.spacing_min = so.number("spacing_min", c.chain.spacing_min);
    c.chain.spacing_max = so.number("spacing_max", c.chain.spacing_max);
    c.chain.points = static_cast<int>(so.integer("points", c.chain.points));
    so.finish();
  }
  require(c.chain.spec.ions >= 2, "chain.ions must be >= 2");
  detail::positive(c.chain.spec.trap_frequency, "chain.trap_frequency");
  detail::positive(c.chain.spec.length_unit, "chain.length_unit");
  detail::positive(c.chain.spec.mass, "chain.mass");
  detail::positive(c.chain.spec.charge, "chain.charge");
  require(c.chain.spec.coupling >= 0, "chain.coupling must be non-negative");
  require(c.chain.spacing_min > 0 && c.chain.spacing_max > c.chain.spacing_min,
          "chain spacing range must be positive and increasing");
  require(c.chain.points >= 2, "chain.points must be >= 2");

  if (const json* s = o.get("oracle")) {
    detail::StrictObject so(*s, "oracle");
    c.oracle.samples = so.integer("samples", c.oracle.samples);
    c.oracle.seed = so.unsigned_integer("seed", c.oracle.seed);
    c.oracle.seed_count = static_cast<int>(so.integer("seed_count", c.oracle.seed_count));
    c.oracle.corrupt_g_sign = so.boolean("corrupt_g_sign", false);
    c.oracle.threshold = so.number("threshold", c.oracle.threshold);
    c.oracle.min_pass_fraction = so.number("min_pass_fraction", c.oracle.min_pass_fraction);
    if (const json* ks = so.get("kernels")) {
      require(ks->is_array(), "oracle.kernels must be a list");
      for (std::size_t i = 0; i < ks->size(); ++i)
        c.oracle.kernels.push_back(detail::parse_kernel((*ks)[i], "oracle.kernels[" + std::to_string(i) + "]"));
    }
    so.finish();
  }
  require(c.oracle.samples >= 2, "oracle.samples must be >= 2");
  require(c.oracle.seed_count >= 1, "oracle.seed_count must be >= 1");
  detail::positive(c.oracle.threshold, "oracle.threshold");
  require(c.oracle.min_pass_fraction >= 0 && c.oracle.min_pass_fraction <= 1,
          "oracle.min_pass_fraction must be in [0, 1]");

  o.finish();
  return c;
}

inline json resolved_json(const RunConfig& c) {
  const NoiseModel& m = c.model;
  json geo;
  if (m.geometry.preset) {
    geo["preset"] = std::string(to_string(*m.geometry.preset));
    geo["layout"] = {{"length", m.geometry.layout.length},
                     {"strip_a_z_min", m.geometry.layout.strip_a_z_min},
                     {"strip_b_z_max", m.geometry.layout.strip_b_z_max}};
  } else {
    geo["regions"] = json::array();
    for (const auto& r : m.geometry.regions.regions) geo["regions"].push_back(detail::region_json(r));
  }
  geo["scale"] = m.geometry.scale;
  geo["scale_with_height"] = m.geometry.scale_with_height;

  json axes = json::array();
  for (Axis a : c.motion_axes) axes.push_back(std::string(to_string(a)));
  json orients = json::array();
  for (const auto& e : c.orientations) orients.push_back(e.source);
  json oracle_kernels = json::array();
  for (const auto& k : c.oracle.kernels) oracle_kernels.push_back(detail::kernel_json(k));

  std::string engine(to_string(m.engine));
  json fit = c.scaling.fit_range ? json::array({c.scaling.fit_range->first, c.scaling.fit_range->second}) : json(nullptr);
  return {
      {"name", c.name},
      {"description", c.description},
      {"prefix", c.prefix},
      {"geometry", geo},
      {"ions", {{"height", m.height}, {"separation", m.separation}, {"center_x", m.center_x}, {"axis_z", m.axis_z}}},
      {"motion_axes", axes},
      {"orientations", orients},
      {"source", std::string(to_string(m.source))},
      {"kernel", detail::kernel_json(m.kernel)},
      {"patch_seed", m.patch_seed},
      {"grid",
       {{"nodes_per_height", m.grid.nodes_per_height},
        {"resolution", m.grid.resolution},
        {"refine_factor", m.grid.refine_factor},
        {"refine_radius", m.grid.refine_radius},
        {"nodes_per_xi", m.grid.nodes_per_xi},
        {"engine", engine}}},
      {"sweep",
       {{"variable", std::string(to_string(c.sweep.variable))},
        {"min", c.sweep.min},
        {"max", c.sweep.max},
        {"points", c.sweep.points},
        {"crossover", c.sweep.crossover},
        {"bracket", {c.sweep.bracket_lo, c.sweep.bracket_hi}},
        {"crossover_samples", c.sweep.crossover_samples}}},
      {"scaling",
       {{"d_min", c.scaling.d_min},
        {"d_max", c.scaling.d_max},
        {"points", c.scaling.points},
        {"window", c.scaling.window},
        {"fit_range", fit}}},
      {"chain",
       {{"ions", c.chain.spec.ions},
        {"model", std::string(to_string(c.chain.spec.model))},
        {"trap_frequency", c.chain.spec.trap_frequency},
        {"length_unit", c.chain.spec.length_unit},
        {"mass", c.chain.spec.mass},
        {"charge", c.chain.spec.charge},
        {"coupling", c.chain.spec.coupling},
        {"spacing_min", c.chain.spacing_min},
        {"spacing_max", c.chain.spacing_max},
        {"points", c.chain.points}}},
      {"oracle",
       {{"samples", c.oracle.samples},
        {"seed", c.oracle.seed},
        {"seed_count", c.oracle.seed_count},
        {"corrupt_g_sign", c.oracle.corrupt_g_sign},
        {"threshold", c.oracle.threshold},
        {"min_pass_fraction", c.oracle.min_pass_fraction},
        {"kernels", oracle_kernels}}},
  };
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

}  // namespace dipnoise
