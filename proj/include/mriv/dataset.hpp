#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mriv {

/// Observational sample for the binary-instrument setting: covariates X,
/// instrument Z, treatment A, outcome Y, plus the oracle CATE when the data
/// came from a simulator.
struct Dataset {
  Eigen::MatrixXd covariates;  // n x p
  Eigen::VectorXd instrument;  // entries in {0,1}
  Eigen::VectorXd treatment;   // entries in {0,1}
  Eigen::VectorXd outcome;
  std::optional<Eigen::VectorXd> oracle_cate;

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }

  /// Rows with the given instrument arm.
  std::vector<Eigen::Index> arm_indices(int z) const;

  /// Subset by row indices, preserving order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct DataSplit {
  std::vector<Eigen::Index> train_indices;
  std::vector<Eigen::Index> test_indices;
};

/// Checks all Dataset invariants; returns the first violation as text, or
/// nullopt when the dataset is valid.
std::optional<std::string> validate(const Dataset& d);

/// Throws std::invalid_argument when validate(d) reports a violation.
void require_valid(const Dataset& d);

/// Loads a dataset from a CSV file with header x_1,...,x_p,z,a,y[,tau].
/// When has_oracle is set the tau column must be present. Errors carry the
/// offending row index.
Dataset load_dataset(const std::string& path, bool has_oracle = false);

/// Writes a dataset in the canonical CSV schema (tau column included when
/// oracle_cate is set). Round-trips numeric content at full precision.
void save_dataset(const Dataset& d, const std::string& path);

/// Deterministic train/test split. |test| = round(n * test_fraction); the
/// draw is retried (up to 100 times) until the train part keeps both
/// instrument arms, after which it throws.
DataSplit split_train_test(const Dataset& d, double test_fraction, std::uint64_t seed);

}  // namespace mriv
