/*
 * Generate the shipped surrogate controller weight file: random-feature
 * ReLU layers with a least-squares output layer fitted to the proportional
 * law plus a fixed smooth perturbation. Deterministic under --seed.
 */
#include <cstdio>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cag/controller.hpp"

int main(int argc, char** argv) {
  CLI::App app{"surrogate controller generator"};
  std::string out_path = "aats_surrogate.json";
  cag::SurrogateConfig cfg;
  std::string hidden;
  app.add_option("--out", out_path, "output weight file");
  app.add_option("--seed", cfg.seed, "RNG seed");
  app.add_option("--hidden", hidden, "comma list of hidden layer sizes");
  app.add_option("--n-train", cfg.n_train, "training sample count");
  app.add_option("--perturbation", cfg.perturbation_amplitude,
                 "amplitude of the smooth nonlinear perturbation");
  CLI11_PARSE(app, argc, argv);

  if (!hidden.empty()) {
    cfg.hidden_sizes.clear();
    std::stringstream ss(hidden);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.hidden_sizes.push_back(std::stoul(item));
  }

  try {
    const cag::SurrogateReport rep = cag::synthesize_surrogate(cfg);
    cag::save_network(rep.net, out_path);
    std::printf("wrote %s  (max fit error %.5f rad over a 256x256 grid)\n", out_path.c_str(),
                rep.max_fit_error);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
