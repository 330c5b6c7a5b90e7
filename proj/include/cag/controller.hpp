/*
 * controller.hpp
 *
 * Steering command sources: the analytic proportional law and feed-forward
 * ReLU networks loaded from a self-describing text weight file. Networks
 * map (p, theta [, latents]) to a single raw steering command phi [rad];
 * saturation is applied downstream by the plant.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cag/geom.hpp"
#include "cag/plant.hpp"

namespace cag {

struct ControllerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : ControllerError {
  using ControllerError::ControllerError;
};
struct DimChainError : ControllerError {
  using ControllerError::ControllerError;
};
struct LatentMissing : ControllerError {
  using ControllerError::ControllerError;
};
struct LatentOutOfRange : ControllerError {
  using ControllerError::ControllerError;
};

enum class Activation { kRelu, kIdentity };

struct Layer {
  std::vector<double> weights;  // row-major, rows = out_dim, cols = in_dim
  std::vector<double> bias;
  Activation act = Activation::kIdentity;

  std::size_t out_dim() const { return bias.size(); }
  std::size_t in_dim() const { return bias.empty() ? 0 : weights.size() / bias.size(); }
};

/// Feed-forward network. The last layer must use the identity activation.
class Network {
 public:
  Network() = default;
  Network(std::size_t input_dim, std::vector<Layer> layers);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<double> eval(std::span<const double> x) const;

  /* Scalar convenience for controllers (output_dim checked == 1). */
  double eval1(std::span<const double> x) const;

  /* Allocation-free forward pass for hot loops. A Scratch instance must not
   * be shared between threads. */
  struct Scratch {
    std::vector<double> a, b;
  };
  double eval1(std::span<const double> x, Scratch& scratch) const;

  /* ReLU on/off pattern at x, one bool per hidden unit. */
  std::vector<bool> activation_pattern(std::span<const double> x) const;

  /* Collapse a network whose activations are all identity to (M, c) with
   * net(x) = M x + c, M row-major output_dim x input_dim. */
  void collapse_affine(std::vector<double>* M, std::vector<double>* c) const;

  uint64_t fingerprint() const;

 private:
  std::size_t input_dim_ = 0;
  std::vector<Layer> layers_;
};

struct AnalyticLaw {
  double kp = -0.74;
  double ktheta = -0.44;
};

/// A steering command source: analytic law or network, the network
/// optionally taking bounded latent inputs appended to the state.
class ControlSource {
 public:
  explicit ControlSource(AnalyticLaw law) : law_(law) {}
  ControlSource(Network net, std::optional<Box> latent_box);

  bool is_analytic() const { return !net_.has_value(); }
  const AnalyticLaw& law() const { return *law_; }
  const Network& network() const { return *net_; }
  bool has_latents() const { return latent_box_.has_value(); }
  const Box& latent_box() const { return *latent_box_; }
  std::size_t latent_dim() const { return latent_box_ ? latent_box_->dim() : 0; }

  /* Raw steering command. latent must be present iff the source requires
   * one, and must lie inside the declared latent box. */
  double eval(const State& s, std::span<const double> latent = {}) const;

  /* Plant-facing closure; a fixed latent point is captured when needed. */
  ControlFn as_fn(std::vector<double> latent = {}) const;

  uint64_t fingerprint() const;

 private:
  std::optional<AnalyticLaw> law_;
  std::optional<Network> net_;
  std::optional<Box> latent_box_;
};

Network load_network(const std::string& path);
void save_network(const Network& net, const std::string& path);

struct SurrogateReport {
  double max_fit_error = 0.0;  // max |net - target| over a 256x256 grid
  Network net;
};

struct SurrogateConfig {
  uint64_t seed = 20240817;
  std::vector<std::size_t> hidden_sizes = {324};
  std::size_t n_train = 32768;
  double perturbation_amplitude = 0.05;  // of 0.05*sin(p)*cos(2*theta)
  Box domain = Box(Interval(-10.0, 10.0),
                   Interval(-30.0 * 3.14159265358979323846 / 180.0,
                            30.0 * 3.14159265358979323846 / 180.0));
};

/* Deterministic desk-scale stand-in for a trained controller network:
 * random-feature ReLU hidden layers, least-squares output layer fitted to
 * the proportional law plus a fixed smooth nonlinear perturbation. */
SurrogateReport synthesize_surrogate(const SurrogateConfig& cfg);

}  // namespace cag
