#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fairsel/distribution.hpp"
#include "fairsel/rng.hpp"

namespace testutil {

inline fairsel::Variable feat(const std::string& name, int card = 2) {
  return {name, card, fairsel::Role::feature};
}

inline fairsel::Variable prot(const std::string& name, int card = 2) {
  return {name, card, fairsel::Role::protected_attr};
}

inline fairsel::Variable label(const std::string& name, int card = 2) {
  return {name, card, fairsel::Role::label};
}

inline fairsel::JointDistribution make_joint(std::vector<fairsel::Variable> vars,
                                             const std::vector<double>& probs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) v[static_cast<Eigen::Index>(i)] = probs[i];
  return fairsel::JointDistribution::validated(fairsel::VariableSchema(std::move(vars)),
                                               std::move(v));
}

// Dense random joint with full support, deterministic in seed.
inline fairsel::JointDistribution random_joint(std::vector<fairsel::Variable> vars,
                                               std::uint64_t seed) {
  fairsel::VariableSchema schema(std::move(vars));
  fairsel::Rng rng = fairsel::Rng::stream(seed, 0xfeed);
  Eigen::VectorXd probs =
      rng.dirichlet(1.0, static_cast<int>(schema.cell_count()));
  return fairsel::JointDistribution::validated(std::move(schema), std::move(probs));
}

inline double h2(double p) {
  auto term = [](double x) { return x <= 0.0 ? 0.0 : -x * std::log2(x); };
  return term(p) + term(1.0 - p);
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("fairsel_test_" + std::to_string(::getpid()) + "_" +
                               std::to_string(counter() + i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        counter() += i + 1;
        path = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create scratch directory");
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
