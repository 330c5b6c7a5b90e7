#include "cag/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "cag/rng.hpp"

namespace cag {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct Field {
  std::string section, key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& where, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError(where + ": not a number: '" + v + "'");
  }
}

int64_t parse_int(const std::string& where, const std::string& v) {
  try {
    std::size_t used = 0;
    const int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError(where + ": not an integer: '" + v + "'");
  }
}

#define NUM_FIELD(sec, name, member)                                                   \
  Field {                                                                              \
    sec, name,                                                                         \
        [](RunConfig& c, const std::string& v) {                                       \
          c.member = parse_double(std::string(sec) + "." + name, v);                   \
        },                                                                             \
        [](const RunConfig& c) { return fmt_double(c.member); }                        \
  }
#define INT_FIELD(sec, name, member, type)                                             \
  Field {                                                                              \
    sec, name,                                                                         \
        [](RunConfig& c, const std::string& v) {                                       \
          c.member = static_cast<type>(parse_int(std::string(sec) + "." + name, v));   \
        },                                                                             \
        [](const RunConfig& c) { return std::to_string(c.member); }                    \
  }
#define STR_FIELD(sec, name, member)                                                   \
  Field {                                                                              \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = v; },               \
        [](const RunConfig& c) { return c.member; }                                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      STR_FIELD("controller", "type", controller_type),
      STR_FIELD("controller", "weights", weights_path),
      NUM_FIELD("controller", "kp", kp),
      NUM_FIELD("controller", "ktheta", ktheta),
      INT_FIELD("controller", "latent_dim", latent_dim, std::size_t),
      NUM_FIELD("controller", "latent_lo", latent_lo),
      NUM_FIELD("controller", "latent_hi", latent_hi),
      NUM_FIELD("partition", "p_lo", p_lo),
      NUM_FIELD("partition", "p_hi", p_hi),
      NUM_FIELD("partition", "theta_lo_deg", theta_lo_deg),
      NUM_FIELD("partition", "theta_hi_deg", theta_hi_deg),
      INT_FIELD("partition", "bins_p", bins_p, int),
      INT_FIELD("partition", "bins_theta", bins_theta, int),
      NUM_FIELD("plant", "v", v),
      NUM_FIELD("plant", "L", wheelbase),
      NUM_FIELD("plant", "phi_limit_deg", phi_limit_deg),
      INT_FIELD("abstraction", "n_start", n_start, std::size_t),
      INT_FIELD("abstraction", "n_fit", n_fit, std::size_t),
      INT_FIELD("abstraction", "n_audit", n_audit, std::size_t),
      NUM_FIELD("abstraction", "horizon", horizon),
      NUM_FIELD("abstraction", "sim_substep", sim_substep),
      NUM_FIELD("abstraction", "margin", margin),
      NUM_FIELD("abstraction", "u_floor", u_floor),
      INT_FIELD("reach", "n_substeps", n_substeps, int),
      INT_FIELD("reach", "subdiv", reach_subdiv, int),
      NUM_FIELD("graph", "bf0", bf0),
      NUM_FIELD("graph", "inc", inc),
      INT_FIELD("graph", "max_retries", max_retries, int),
      INT_FIELD("graph", "strict_union", strict_union, bool),
      INT_FIELD("run", "seed", seed, uint64_t),
      STR_FIELD("run", "mode", mode),
      STR_FIELD("run", "modes", modes),
      NUM_FIELD("run", "runway_halfwidth", runway_halfwidth),
      STR_FIELD("run", "out_dir", out_dir),
  };
  return kFields;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef STR_FIELD

void apply(RunConfig* cfg, const std::string& section, const std::string& key,
           const std::string& value, const std::string& where) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) {
      f.set(*cfg, value);
      return;
    }
  }
  throw ConfigError(where + ": unknown key " + section + "." + key);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  if (controller_type != "analytic" && controller_type != "network") {
    throw ConfigError("controller.type must be analytic or network");
  }
  if (controller_type == "network" && weights_path.empty()) {
    throw ConfigError("controller.weights required for a network controller");
  }
  if (!(p_lo < p_hi) || !(theta_lo_deg < theta_hi_deg)) {
    throw ConfigError("partition domain must have positive extent");
  }
  if (bins_p < 1 || bins_theta < 1) throw ConfigError("partition bins must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("abstraction.horizon must be positive");
  if (!(sim_substep > 0.0) || sim_substep > horizon) {
    throw ConfigError("abstraction.sim_substep must lie in (0, horizon]");
  }
  if (!(margin >= 0.0) || !(u_floor >= 0.0)) {
    throw ConfigError("margin and u_floor must be nonnegative");
  }
  if (n_start < 5) throw ConfigError("abstraction.n_start must be >= 5 (corners + center)");
  if (n_fit < 8 || n_audit < 8) throw ConfigError("fit/audit sample counts too small");
  if (n_substeps < 1) throw ConfigError("reach.n_substeps must be >= 1");
  if (reach_subdiv < 1) throw ConfigError("reach.subdiv must be >= 1");
  if (!(bf0 >= 0.0)) throw ConfigError("graph.bf0 must be >= 0");
  if (!(inc > 1.0)) throw ConfigError("graph.inc must be > 1");
  if (max_retries < 0) throw ConfigError("graph.max_retries must be >= 0");
  if (latent_dim > 0 && !(latent_lo <= latent_hi)) {
    throw ConfigError("latent range is inverted");
  }
  if (!(runway_halfwidth > 0.0)) throw ConfigError("runway_halfwidth must be positive");
  if (mode != "continuous" && mode.rfind("fixed:", 0) != 0) {
    throw ConfigError("run.mode must be continuous or fixed:<freq>");
  }
  make_plant().validate();
}

Partition RunConfig::make_partition() const {
  return Partition(Box(Interval(p_lo, p_hi), Interval(theta_lo_deg * kDeg, theta_hi_deg * kDeg)),
                   bins_p, bins_theta);
}

PlantParams RunConfig::make_plant() const {
  return PlantParams{v, wheelbase, phi_limit_deg * kDeg};
}

LinearizeConfig RunConfig::make_linearize() const {
  LinearizeConfig lc;
  lc.n_start = n_start;
  lc.n_fit = n_fit;
  lc.n_audit = n_audit;
  lc.horizon = horizon;
  lc.sim_substep = sim_substep;
  lc.margin = margin;
  lc.u_floor = u_floor;
  lc.seed = seed;
  return lc;
}

CatConfig RunConfig::make_cat() const {
  CatConfig cc;
  cc.lin = make_linearize();
  cc.bf0 = bf0;
  cc.inc = inc;
  cc.max_retries = max_retries;
  cc.n_substeps = n_substeps;
  cc.reach_subdiv = reach_subdiv;
  cc.accumulate_retry_edges = strict_union;
  cc.plant = make_plant();
  if (mode == "continuous") {
    cc.mode = ActuationMode::kContinuous;
  } else {
    cc.mode = ActuationMode::kFixed;
    cc.frequency = parse_double("run.mode frequency", mode.substr(6));
  }
  return cc;
}

ControlSource RunConfig::make_controller() const {
  if (controller_type == "analytic") {
    return ControlSource(AnalyticLaw{kp, ktheta});
  }
  Network net = load_network(weights_path);
  std::optional<Box> latents;
  if (latent_dim > 0) {
    std::vector<Interval> dims(latent_dim, Interval(latent_lo, latent_hi));
    latents = Box(std::move(dims));
  }
  return ControlSource(std::move(net), std::move(latents));
}

std::string RunConfig::canonical_string() const {
  std::string cur_section;
  std::string out;
  for (const Field& f : fields()) {
    if (f.section != cur_section) {
      cur_section = f.section;
      out += "[" + cur_section + "]\n";
    }
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

uint64_t RunConfig::hash() const { return fnv64_str(canonical_string()); }

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string where = path + ":" + std::to_string(line_no);
      std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(where + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (section.empty()) throw ConfigError(where + ": key outside any [section]");
      apply(&cfg, section, key, value, where);
    }
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    const auto dot = ov.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got '" + ov + "'");
    }
    apply(&cfg, trim(ov.substr(0, dot)), trim(ov.substr(dot + 1, eq - dot - 1)),
          trim(ov.substr(eq + 1)), "--set " + ov);
  }
  cfg.validate();
  return cfg;
}

}  // namespace cag
