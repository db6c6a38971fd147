#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stratdesign/csv.hpp"
#include "stratdesign/table.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return STRATDESIGN_TEST_DATA; }
inline std::filesystem::path iris_path() { return data_dir() / "iris.csv"; }
inline stratdesign::Table iris() { return stratdesign::csv::read_file(iris_path()); }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("stratdesign_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

/// Maternal-weight-shaped study: `rows` units in three race strata with a
/// true weight change and an error-prone estimate of it.
inline stratdesign::Table weight_study(std::size_t rows = 10335, std::uint64_t seed = 2024) {
  using namespace stratdesign;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Column id{"id", {}}, race{"race", {}}, truth{"mat_weight_true", {}}, est{"mat_weight_est", {}};
  Column obese{"obesity", {}};
  const char* names[] = {"Black", "Hispanic", "White"};
  const double shift[] = {4.0, 1.0, -1.5};
  const double spread[] = {9.0, 7.0, 6.0};
  for (std::size_t i = 0; i < rows; ++i) {
    const double r = u(gen);
    const int g = r < 0.25 ? 0 : r < 0.45 ? 1 : 2;
    const double t = 25.0 + shift[g] + spread[g] * z(gen);
    const double e = t + 4.0 * z(gen);
    id.cells.emplace_back(static_cast<std::int64_t>(i + 1));
    race.cells.emplace_back(std::string(names[g]));
    truth.cells.emplace_back(round2(t));
    est.cells.emplace_back(round2(e));
    obese.cells.emplace_back(static_cast<std::int64_t>(u(gen) < 1.0 / (1.0 + std::exp(-(t - 30.0) / 5.0))));
  }
  return Table({id, race, truth, est, obese});
}

}  // namespace fixtures
