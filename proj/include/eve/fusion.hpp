#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eve {

/// Shape bookkeeping for one encoded video; fixes the expected lengths of
/// every component and therefore of v.
struct CodeManifest {
  std::size_t p = 4;
  std::size_t m = 0;  // 2D extraction-layer neurons
  std::size_t k = 0;  // 3D extraction-layer neurons
  std::size_t n_object_labels = 0;
  std::size_t n_action_labels = 0;
  std::size_t q = 5;
  std::size_t projection_dim = 2048;
  std::uint64_t seed = 0;

  std::size_t alpha_len() const { return 7 * p * m; }
  std::size_t beta_len() const { return 7 * p * k; }
  std::size_t gamma_len() const { return (2 + 2 * (q - 1)) * n_object_labels; }
  std::size_t eta_len() const { return 2 * n_action_labels; }
  std::size_t fused_len() const { return alpha_len() + beta_len() + gamma_len() + eta_len(); }
};

/// Fixed random projection, never updated during training. Weights are
/// uniform on (-s, s) with s = sqrt(6/(d+D)), drawn row-major from
/// mt19937_64 seeded by (seed, d, D); regeneration is bit-exact.
struct FixedProjection {
  std::size_t input_dim = 0;   // d
  std::size_t output_dim = 0;  // D
  std::uint64_t seed = 0;
  std::vector<float> weights;  // row-major output_dim x input_dim

  float at(std::size_t row, std::size_t col) const { return weights[row * input_dim + col]; }
};

/// v = [alpha; beta; gamma; eta]; lengths checked against the manifest.
std::vector<double> concat_code(std::span<const double> alpha, std::span<const double> beta,
                                std::span<const double> gamma, std::span<const double> eta,
                                const CodeManifest& manifest);

FixedProjection make_projection(std::size_t input_dim, std::size_t output_dim,
                                std::uint64_t seed);

/// upsilon = tanh(W v), componentwise; every entry in (-1, 1).
std::vector<double> project(std::span<const double> v, const FixedProjection& proj);

}  // namespace eve
