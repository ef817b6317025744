#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <string>

#include "rffdm/signal.hpp"

namespace rffdm::test {

inline double rel_l2(const ComplexSignal& got, const ComplexSignal& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < want.size(); ++n) {
    num += std::norm(got[n] - want[n]);
    den += std::norm(want[n]);
  }
  return std::sqrt(num / den);
}

inline ComplexSignal random_signal(std::size_t n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, scale * std::sqrt(0.5));
  ComplexSignal s;
  s.samples.resize(n);
  for (auto& v : s.samples) v = {d(rng), d(rng)};
  return s;
}

inline ComplexSignal tone(std::size_t n, double cycles) {
  ComplexSignal s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = std::polar(1.0, 2.0 * M_PI * cycles * static_cast<double>(i) / static_cast<double>(n));
  return s;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("rffdm_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace rffdm::test
