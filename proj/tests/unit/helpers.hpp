#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>

#include "synthctl/estimators.hpp"

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("synthctl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Problem straight from matrices: rows of the outcome matrices are
/// periods 2000, 2001, ...; the first t0 are pre-treatment.
inline synthctl::ScmProblem matrix_problem(const Eigen::VectorXd& y_treated, const Eigen::MatrixXd& y_donors,
                                           Eigen::Index t0, const Eigen::VectorXd& x1 = {},
                                           const Eigen::MatrixXd& x0 = {}) {
  synthctl::ScmProblem p;
  p.pool.treated = "T";
  for (Eigen::Index j = 0; j < y_donors.cols(); ++j) {
    p.pool.donors.push_back("D" + std::to_string(100 + j));
  }
  p.outcome = "y";
  p.treatment_year = 2000 + static_cast<int>(t0);
  for (Eigen::Index t = 0; t < y_donors.rows(); ++t) {
    (t < t0 ? p.pre_periods : p.post_periods).push_back(2000 + static_cast<int>(t));
  }
  p.treated_outcome = y_treated;
  p.donor_outcomes = y_donors;
  p.treated_covariates = x1;
  p.donor_covariates = x0;
  for (Eigen::Index k = 0; k < x1.size(); ++k) p.covariate_keys.push_back("c" + std::to_string(k));
  return p;
}

inline Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

/// Random point on the unit simplex (normalized exponentials).
inline Eigen::VectorXd random_simplex(std::mt19937_64& rng, Eigen::Index n) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = e(rng);
  return w / w.sum();
}

}  // namespace testing
