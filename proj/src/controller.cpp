#include "cag/controller.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cag/rng.hpp"

namespace cag {

using nlohmann::json;

Network::Network(std::size_t input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (layers_.empty()) throw DimChainError("network must have at least one layer");
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.bias.empty() || layer.weights.size() != layer.bias.size() * in) {
      throw DimChainError("layer " + std::to_string(l) + " expects input dim " +
                          std::to_string(in) + ", weight matrix does not chain");
    }
    in = layer.out_dim();
  }
  if (layers_.back().act != Activation::kIdentity) {
    throw DimChainError("final layer activation must be identity");
  }
}

std::vector<double> Network::eval(std::span<const double> x) const {
  if (x.size() != input_dim_) throw DimChainError("input dimension mismatch in eval");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const Layer& layer : layers_) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    next.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = layer.bias[r];
      const double* w = layer.weights.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += w[c] * cur[c];
      next[r] = layer.act == Activation::kRelu ? std::max(acc, 0.0) : acc;
    }
    cur.swap(next);
  }
  return cur;
}

double Network::eval1(std::span<const double> x) const {
  if (output_dim() != 1) throw DimChainError("eval1 requires a scalar output network");
  return eval(x)[0];
}

double Network::eval1(std::span<const double> x, Scratch& s) const {
  if (output_dim() != 1) throw DimChainError("eval1 requires a scalar output network");
  s.a.assign(x.begin(), x.end());
  for (const Layer& layer : layers_) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    s.b.resize(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = layer.bias[r];
      const double* w = layer.weights.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += w[c] * s.a[c];
      s.b[r] = layer.act == Activation::kRelu ? std::max(acc, 0.0) : acc;
    }
    s.a.swap(s.b);
  }
  return s.a[0];
}

std::vector<bool> Network::activation_pattern(std::span<const double> x) const {
  if (x.size() != input_dim_) throw DimChainError("input dimension mismatch");
  std::vector<bool> pattern;
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const Layer& layer : layers_) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    next.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = layer.bias[r];
      const double* w = layer.weights.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += w[c] * cur[c];
      if (layer.act == Activation::kRelu) {
        pattern.push_back(acc > 0.0);
        acc = std::max(acc, 0.0);
      }
      next[r] = acc;
    }
    cur.swap(next);
  }
  return pattern;
}

void Network::collapse_affine(std::vector<double>* M, std::vector<double>* c) const {
  for (const Layer& layer : layers_) {
    if (layer.act != Activation::kIdentity) {
      throw DimChainError("collapse_affine requires all-identity activations");
    }
  }
  // running affine map y = A x + b
  std::size_t in = input_dim_;
  std::vector<double> A(in * in, 0.0);
  for (std::size_t i = 0; i < in; ++i) A[i * in + i] = 1.0;
  std::vector<double> b(in, 0.0);
  for (const Layer& layer : layers_) {
    const std::size_t out = layer.out_dim();
    const std::size_t mid = layer.in_dim();
    std::vector<double> A2(out * input_dim_, 0.0);
    std::vector<double> b2(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double* w = layer.weights.data() + r * mid;
      for (std::size_t k = 0; k < input_dim_; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < mid; ++j) acc += w[j] * A[j * input_dim_ + k];
        A2[r * input_dim_ + k] = acc;
      }
      double accb = layer.bias[r];
      for (std::size_t j = 0; j < mid; ++j) accb += w[j] * b[j];
      b2[r] = accb;
    }
    A.swap(A2);
    b.swap(b2);
  }
  *M = A;
  *c = b;
}

uint64_t Network::fingerprint() const {
  uint64_t h = fnv64_str("net-v1");
  const uint64_t in = input_dim_;
  h = fnv64(&in, sizeof in, h);
  for (const Layer& layer : layers_) {
    const uint64_t od = layer.out_dim();
    const int act = layer.act == Activation::kRelu ? 1 : 0;
    h = fnv64(&od, sizeof od, h);
    h = fnv64(&act, sizeof act, h);
    h = fnv64(layer.weights.data(), layer.weights.size() * sizeof(double), h);
    h = fnv64(layer.bias.data(), layer.bias.size() * sizeof(double), h);
  }
  return h;
}

ControlSource::ControlSource(Network net, std::optional<Box> latent_box)
    : net_(std::move(net)), latent_box_(std::move(latent_box)) {
  if (net_->output_dim() != 1) {
    throw DimChainError("controller network must emit a single steering command");
  }
  const std::size_t want = 2 + latent_dim();
  if (net_->input_dim() != want) {
    throw DimChainError("controller network input dim " + std::to_string(net_->input_dim()) +
                        " does not match state+latent dim " + std::to_string(want));
  }
}

double ControlSource::eval(const State& s, std::span<const double> latent) const {
  if (law_) {
    if (!latent.empty()) throw LatentOutOfRange("analytic law takes no latents");
    return law_->kp * s.p + law_->ktheta * s.theta;
  }
  if (latent_box_) {
    if (latent.size() != latent_box_->dim()) {
      throw LatentMissing("latent point of dim " + std::to_string(latent_box_->dim()) +
                          " required");
    }
    if (!latent_box_->contains_point(latent)) {
      throw LatentOutOfRange("latent point outside the declared latent box");
    }
  } else if (!latent.empty()) {
    throw LatentOutOfRange("network declares no latent inputs");
  }
  std::vector<double> x;
  x.reserve(2 + latent.size());
  x.push_back(s.p);
  x.push_back(s.theta);
  x.insert(x.end(), latent.begin(), latent.end());
  return net_->eval1(x);
}

ControlFn ControlSource::as_fn(std::vector<double> latent) const {
  if (law_) {
    const AnalyticLaw law = *law_;
    return [law](const State& s) { return law.kp * s.p + law.ktheta * s.theta; };
  }
  if (latent_box_) {
    if (latent.size() != latent_box_->dim()) {
      throw LatentMissing("latent point required to build a control closure");
    }
    if (!latent_box_->contains_point(latent)) {
      throw LatentOutOfRange("latent point outside the declared latent box");
    }
  } else if (!latent.empty()) {
    throw LatentOutOfRange("network declares no latent inputs");
  }
  // per-closure scratch: a closure must not be shared across threads
  auto scratch = std::make_shared<Network::Scratch>();
  auto buf = std::make_shared<std::vector<double>>();
  buf->reserve(2 + latent.size());
  const Network* net = &*net_;
  return [net, scratch, buf, latent = std::move(latent)](const State& s) {
    buf->clear();
    buf->push_back(s.p);
    buf->push_back(s.theta);
    buf->insert(buf->end(), latent.begin(), latent.end());
    return net->eval1(*buf, *scratch);
  };
}

uint64_t ControlSource::fingerprint() const {
  if (law_) {
    uint64_t h = fnv64_str("analytic-v1");
    h = fnv64(&law_->kp, sizeof(double), h);
    h = fnv64(&law_->ktheta, sizeof(double), h);
    return h;
  }
  uint64_t h = net_->fingerprint();
  if (latent_box_) {
    for (std::size_t d = 0; d < latent_box_->dim(); ++d) {
      const double lo = (*latent_box_)[d].lo(), hi = (*latent_box_)[d].hi();
      h = fnv64(&lo, sizeof lo, h);
      h = fnv64(&hi, sizeof hi, h);
    }
  }
  return h;
}

namespace {

void require_only_keys(const json& obj, std::initializer_list<const char*> keys,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(keys.begin(), keys.end(),
                     [&](const char* k) { return key == k; }) == keys.end()) {
      throw ParseError("unknown field \"" + key + "\" in " + where);
    }
  }
}

}  // namespace

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open weight file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("weight file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("weight file top level must be an object");
  require_only_keys(doc, {"input_dim", "output_dim", "layers"}, "weight file");
  if (!doc.contains("input_dim") || !doc.contains("output_dim") || !doc.contains("layers")) {
    throw ParseError("weight file needs input_dim, output_dim and layers");
  }
  const std::size_t input_dim = doc["input_dim"].get<std::size_t>();
  const std::size_t output_dim = doc["output_dim"].get<std::size_t>();

  std::vector<Layer> layers;
  std::size_t idx = 0;
  for (const json& jl : doc["layers"]) {
    const std::string where = "layer " + std::to_string(idx++);
    if (!jl.is_object()) throw ParseError(where + " must be an object");
    require_only_keys(jl, {"weights", "bias", "activation"}, where);
    if (!jl.contains("weights") || !jl.contains("bias") || !jl.contains("activation")) {
      throw ParseError(where + " needs weights, bias and activation");
    }
    Layer layer;
    const std::string act = jl["activation"].get<std::string>();
    if (act == "relu") {
      layer.act = Activation::kRelu;
    } else if (act == "id") {
      layer.act = Activation::kIdentity;
    } else {
      throw ParseError(where + ": unknown activation \"" + act + "\"");
    }
    layer.bias = jl["bias"].get<std::vector<double>>();
    const json& rows = jl["weights"];
    if (!rows.is_array() || rows.size() != layer.bias.size()) {
      throw ParseError(where + ": weights must have one row per bias entry");
    }
    std::size_t cols = 0;
    for (const json& row : rows) {
      if (!row.is_array()) throw ParseError(where + ": weight rows must be arrays");
      if (cols == 0) cols = row.size();
      if (row.size() != cols || cols == 0) {
        throw ParseError(where + ": ragged or empty weight matrix");
      }
      for (const json& v : row) layer.weights.push_back(v.get<double>());
    }
    layers.push_back(std::move(layer));
  }

  Network net(input_dim, std::move(layers));
  if (net.output_dim() != output_dim) {
    throw DimChainError("declared output_dim " + std::to_string(output_dim) +
                        " does not match final layer");
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  json doc;
  doc["input_dim"] = net.input_dim();
  doc["output_dim"] = net.output_dim();
  doc["layers"] = json::array();
  for (const Layer& layer : net.layers()) {
    json jl;
    jl["activation"] = layer.act == Activation::kRelu ? "relu" : "id";
    jl["bias"] = layer.bias;
    json rows = json::array();
    const std::size_t in = layer.in_dim();
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      rows.push_back(std::vector<double>(layer.weights.begin() + r * in,
                                         layer.weights.begin() + (r + 1) * in));
    }
    jl["weights"] = std::move(rows);
    doc["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) throw ControllerError("cannot write weight file " + path);
  out << doc.dump(1) << "\n";
}

namespace {

/* Cholesky solve of (G + ridge I) w = rhs, G symmetric positive semidefinite. */
std::vector<double> solve_spd(std::vector<double> G, std::vector<double> rhs, double ridge) {
  const std::size_t n = rhs.size();
  for (std::size_t i = 0; i < n; ++i) G[i * n + i] += ridge;
  // in-place Cholesky G = L L^T
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = G[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= G[i * n + k] * G[j * n + k];
      if (i == j) {
        if (sum <= 0.0) throw ControllerError("least-squares matrix not positive definite");
        G[i * n + i] = std::sqrt(sum);
      } else {
        G[i * n + j] = sum / G[j * n + j];
      }
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < n; ++i) {
    double sum = rhs[i];
    for (std::size_t k = 0; k < i; ++k) sum -= G[i * n + k] * rhs[k];
    rhs[i] = sum / G[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = rhs[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= G[k * n + ii] * rhs[k];
    rhs[ii] = sum / G[ii * n + ii];
  }
  return rhs;
}

}  // namespace

SurrogateReport synthesize_surrogate(const SurrogateConfig& cfg) {
  const std::size_t state_dim = cfg.domain.dim();
  auto target = [&](std::span<const double> x) {
    return -0.74 * x[0] - 0.44 * x[1] +
           cfg.perturbation_amplitude * std::sin(x[0]) * std::cos(2.0 * x[1]);
  };

  Rng rng(mix_seed(cfg.seed, 0xA11CE));
  std::vector<Layer> layers;
  std::size_t in = state_dim;
  for (std::size_t li = 0; li < cfg.hidden_sizes.size(); ++li) {
    const std::size_t out = cfg.hidden_sizes[li];
    Layer layer;
    layer.act = Activation::kRelu;
    layer.weights.resize(out * in);
    layer.bias.resize(out);
    if (li == 0) {
      // first 2*dim units carry the inputs exactly: ReLU(x) - ReLU(-x) = x,
      // so the least-squares layer can reproduce the linear trend directly
      const std::size_t carry = 2 * in;
      if (out <= carry) throw ControllerError("first hidden layer too small");
      for (std::size_t c = 0; c < in; ++c) {
        layer.weights[(2 * c) * in + c] = 1.0;
        layer.weights[(2 * c + 1) * in + c] = -1.0;
      }
      // remaining units: random directions with the kink placed on a point
      // inside the domain, so every unit is active over part of the space.
      // Directions are biased toward the p axis, where the perturbation has
      // almost all of its curvature.
      const double aspect = cfg.domain[0].width() / cfg.domain[1].width();
      for (std::size_t r = carry; r < out; ++r) {
        double angle;  // in aspect-normalized coordinates
        if (rng.next_unit() < 0.85) {
          angle = (rng.next_unit() - 0.5) * 0.7;
        } else {
          angle = rng.next_unit() * 3.14159265358979323846;
        }
        layer.weights[r * in + 0] = std::cos(angle);
        layer.weights[r * in + 1] = std::sin(angle) * aspect;
        double dot = 0.0;
        for (std::size_t c = 0; c < in; ++c) {
          if (c >= 2) layer.weights[r * in + c] = 0.5 * rng.normal();
          dot += layer.weights[r * in + c] * rng.uniform(cfg.domain[c].lo(), cfg.domain[c].hi());
        }
        layer.bias[r] = -dot;
      }
    } else {
      const double scale = std::sqrt(2.0 / static_cast<double>(in));
      for (double& w : layer.weights) w = scale * rng.normal();
      for (double& b : layer.bias) b = 0.1 * rng.normal();
    }
    layers.push_back(std::move(layer));
    in = out;
  }

  // placeholder output layer, fitted below
  Layer out_layer;
  out_layer.act = Activation::kIdentity;
  out_layer.weights.assign(in, 0.0);
  out_layer.bias.assign(1, 0.0);
  layers.push_back(out_layer);
  Network net(state_dim, layers);

  // features of the last hidden layer (or raw inputs when no hidden layers)
  auto features = [&](std::span<const double> x) {
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t li = 0; li + 1 < layers.size(); ++li) {
      const Layer& layer = layers[li];
      next.assign(layer.out_dim(), 0.0);
      for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        double acc = layer.bias[r];
        const double* w = layer.weights.data() + r * layer.in_dim();
        for (std::size_t c = 0; c < layer.in_dim(); ++c) acc += w[c] * cur[c];
        next[r] = std::max(acc, 0.0);
      }
      cur.swap(next);
    }
    return cur;
  };

  // least squares on [features, 1] against the target
  Rng srng(mix_seed(cfg.seed, 0x5A3C));
  const std::size_t k = in + 1;
  std::vector<double> G(k * k, 0.0);
  std::vector<double> rhs(k, 0.0);
  std::vector<double> x(state_dim);
  for (std::size_t s = 0; s < cfg.n_train; ++s) {
    for (std::size_t d = 0; d < state_dim; ++d) {
      x[d] = srng.uniform(cfg.domain[d].lo(), cfg.domain[d].hi());
    }
    std::vector<double> f = features(x);
    f.push_back(1.0);
    const double y = target(x);
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += f[i] * y;
      for (std::size_t j = 0; j <= i; ++j) G[i * k + j] += f[i] * f[j];
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) G[i * k + j] = G[j * k + i];
  }
  const std::vector<double> w = solve_spd(std::move(G), std::move(rhs), 1e-8);

  layers.back().weights.assign(w.begin(), w.end() - 1);
  layers.back().bias[0] = w.back();
  Network fitted(state_dim, layers);

  SurrogateReport report;
  report.max_fit_error = 0.0;
  const std::size_t grid = 256;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const double p = cfg.domain[0].lo() +
                       cfg.domain[0].width() * (static_cast<double>(i) + 0.5) / grid;
      const double t = cfg.domain[1].lo() +
                       cfg.domain[1].width() * (static_cast<double>(j) + 0.5) / grid;
      const double xx[2] = {p, t};
      const double err = std::fabs(fitted.eval1(xx) - target(xx));
      report.max_fit_error = std::max(report.max_fit_error, err);
    }
  }
  report.net = std::move(fitted);
  return report;
}

}  // namespace cag
