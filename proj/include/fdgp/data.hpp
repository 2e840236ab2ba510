#ifndef FDGP_DATA_HPP
#define FDGP_DATA_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fdgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Seeded generator. One per worker; never shared across threads.
using Rng = std::mt19937_64;

/// Regression table: n×p inputs and n targets.
struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::vector<std::string> names;  // feature column labels, may be empty

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }

  /// Throws std::invalid_argument on row mismatch or non-finite entries.
  void validate() const;

  /// Rows selected by `rows`, in that order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target column, by header name or zero-based position.
using ColumnSelector = std::variant<std::string, Eigen::Index>;

/// Parses a comma-separated file with a header line. Every cell must be a
/// finite number. Errors name the offending row (1-based data row) and column.
Dataset load_csv(const std::filesystem::path& path, const ColumnSelector& target);

/// Writes `d` with columns names..., target_name using round-trip precision.
void save_csv(const std::filesystem::path& path, const Dataset& d,
              const std::string& target_name = "y");

/// Inverse transform recorded by standardize().
struct Scaler {
  VectorXd mean;
  VectorXd scale;  // strictly positive; 1 for constant columns
  std::vector<bool> constant;
  double y_mean = 0.0;
  double y_scale = 1.0;

  MatrixXd transform(const MatrixXd& X) const;
  MatrixXd inverse_transform(const MatrixXd& Z) const;
  VectorXd transform_targets(const VectorXd& y) const;
  VectorXd inverse_transform_targets(const VectorXd& t) const;
};

/// Zero mean, unit population deviation per non-constant column and target.
std::pair<Dataset, Scaler> standardize(const Dataset& d);

/// Uniform random row partition; the train part has round(fraction·n) rows.
std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// Row indices (0-based) of the train and test parts chosen by split().
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, double train_fraction, std::uint64_t seed);

/// Mini-batch of 0-based row indices into a population of size n.
struct IndexBatch {
  std::vector<Eigen::Index> indices;
  Eigen::Index n = 0;

  std::size_t size() const { return indices.size(); }
};

/// s indices drawn uniformly with replacement from {0, …, n−1}.
IndexBatch sample_batch(Eigen::Index n, std::size_t s, Rng& rng);

/// Without-replacement batches: reshuffles {0, …, n−1} each epoch and hands
/// out consecutive chunks of size s (the last chunk of an epoch may be short).
class EpochSampler {
 public:
  EpochSampler(Eigen::Index n, std::size_t s);
  IndexBatch next(Rng& rng);

 private:
  Eigen::Index n_;
  std::size_t s_;
  std::vector<Eigen::Index> perm_;
  std::size_t cursor_;
};

}  // namespace fdgp

#endif  // FDGP_DATA_HPP
