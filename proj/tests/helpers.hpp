#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Core>

#include "divfree/fe_space.hpp"
#include "divfree/linsolve.hpp"
#include "divfree/mesh.hpp"

namespace divfree::testing {

inline std::shared_ptr<const Mesh> make_mesh(int n, double perturb = 0.2, std::uint64_t seed = 1) {
  return std::make_shared<const Mesh>(build_structured(n, perturb, seed));
}

inline Eigen::VectorXd random_vector(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = dist(rng);
  return v;
}

/// Random element of V^div: the projection of a random functional.
inline CoefVec random_div_free(const SaddleSystem& sys, std::uint64_t seed) {
  const Eigen::VectorXd rhs = sys.mass() * random_vector(sys.space().num_dofs(), seed);
  return {sys.space().tag(), sys.project(rhs)};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("divfree_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Two-point observed order between successive refinements.
inline double observed_rate(double h0, double e0, double h1, double e1) {
  return std::log(e0 / e1) / std::log(h0 / h1);
}

}  // namespace divfree::testing
