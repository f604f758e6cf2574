#include "eve/fusion.hpp"

#include <cmath>

#include "eve/errors.hpp"
#include "eve/rng.hpp"

namespace eve {
namespace {

void check_len(const char* name, std::size_t got, std::size_t want) {
  if (got != want)
    throw DimensionError(std::string("concat_code: ") + name + " has length " +
                         std::to_string(got) + ", manifest expects " + std::to_string(want));
}

}  // namespace

std::vector<double> concat_code(std::span<const double> alpha, std::span<const double> beta,
                                std::span<const double> gamma, std::span<const double> eta,
                                const CodeManifest& manifest) {
  check_len("alpha", alpha.size(), manifest.alpha_len());
  check_len("beta", beta.size(), manifest.beta_len());
  check_len("gamma", gamma.size(), manifest.gamma_len());
  check_len("eta", eta.size(), manifest.eta_len());

  std::vector<double> v;
  v.reserve(manifest.fused_len());
  v.insert(v.end(), alpha.begin(), alpha.end());
  v.insert(v.end(), beta.begin(), beta.end());
  v.insert(v.end(), gamma.begin(), gamma.end());
  v.insert(v.end(), eta.begin(), eta.end());
  return v;
}

FixedProjection make_projection(std::size_t input_dim, std::size_t output_dim,
                                std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1)
    throw ArgumentError("make_projection: dimensions must be >= 1");

  FixedProjection proj;
  proj.input_dim = input_dim;
  proj.output_dim = output_dim;
  proj.seed = seed;
  proj.weights.resize(input_dim * output_dim);

  const double scale = std::sqrt(6.0 / static_cast<double>(input_dim + output_dim));
  auto eng = seeded_engine(seed, input_dim, output_dim);
  for (float& w : proj.weights) w = static_cast<float>(uniform_symmetric(eng, scale));
  return proj;
}

std::vector<double> project(std::span<const double> v, const FixedProjection& proj) {
  if (v.size() != proj.input_dim)
    throw DimensionError("project: input length " + std::to_string(v.size()) +
                         " != projection input dim " + std::to_string(proj.input_dim));

  std::vector<double> upsilon(proj.output_dim);
  for (std::size_t row = 0; row < proj.output_dim; ++row) {
    const float* w = proj.weights.data() + row * proj.input_dim;
    double acc = 0.0;
    for (std::size_t col = 0; col < proj.input_dim; ++col)
      acc += static_cast<double>(w[col]) * v[col];
    upsilon[row] = std::tanh(acc);
  }
  return upsilon;
}

}  // namespace eve
