/*
 * config.hpp
 *
 * Flat INI-style run configuration: sections of key = value pairs, strict
 * about unknown keys, with dotted --set overrides. The canonical dump feeds
 * the config hash embedded in every artifact.
 */
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cag/controller.hpp"
#include "cag/graph.hpp"
#include "cag/partition.hpp"

namespace cag {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [controller]
  std::string controller_type = "analytic";  // analytic | network
  std::string weights_path;
  double kp = -0.74;
  double ktheta = -0.44;
  std::size_t latent_dim = 0;
  double latent_lo = -0.8;
  double latent_hi = 0.8;

  // [partition]
  double p_lo = -10.0, p_hi = 10.0;
  double theta_lo_deg = -30.0, theta_hi_deg = 30.0;
  int bins_p = 128, bins_theta = 128;

  // [plant]
  double v = 5.0, wheelbase = 5.0, phi_limit_deg = 80.0;

  // [abstraction]
  std::size_t n_start = 64, n_fit = 512, n_audit = 4096;
  double horizon = 1.0;
  double sim_substep = kDefaultSimSubstep;
  double margin = 0.10;
  double u_floor = 1e-4;

  // [reach]
  int n_substeps = kDefaultSubsteps;
  int reach_subdiv = 4;

  // [graph]
  double bf0 = 0.1, inc = 2.0;
  int max_retries = 8;
  bool strict_union = false;

  // [run]
  uint64_t seed = 1;
  std::string mode = "continuous";  // continuous | fixed:<freq>
  std::string modes = "1Hz,2Hz,10Hz,100Hz,inf,inf+U";
  double runway_halfwidth = 10.0;
  std::string out_dir = "out";

  void validate() const;

  Partition make_partition() const;
  PlantParams make_plant() const;
  LinearizeConfig make_linearize() const;
  CatConfig make_cat() const;
  ControlSource make_controller() const;

  std::string canonical_string() const;
  uint64_t hash() const;
};

/* Parse a config file; overrides are section.key=value strings applied on
 * top. Pass an empty path to start from the defaults. */
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace cag
