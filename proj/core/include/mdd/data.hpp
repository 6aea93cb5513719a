#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mdd {

/// Regression dataset with dense storage: one row per sample.
struct Dataset {
  Eigen::MatrixXd features;  // N x d
  Eigen::VectorXd targets;   // N

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  [[nodiscard]] bool empty() const { return features.rows() == 0; }

  /// Rows `indices` of this dataset, in the given order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
};

/// Disjoint assignment of sample indices to shards.
struct Partition {
  std::vector<std::vector<std::size_t>> shards;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t num_shards() const { return shards.size(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses LIBSVM text ("label idx:val ..."; 1-based strictly increasing
/// indices). Blank lines are skipped; d is the largest index seen.
[[nodiscard]] Dataset parse_libsvm(std::istream& in);
[[nodiscard]] Dataset parse_libsvm(std::string_view text);

/// Writes nonzero entries only, with round-trip precision.
void write_libsvm(const Dataset& ds, std::ostream& out);

/// Flat binary cache: "MDD1", N and d as little-endian int64, row-major
/// float64 features, then targets.
void write_cache(const Dataset& ds, std::ostream& out);
[[nodiscard]] Dataset read_cache(std::istream& in);

/// Loads either a binary cache (detected by magic) or LIBSVM text.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path);

/// Uniform random permutation of 0..n-1, reproducible for a given seed
/// regardless of the standard library in use.
[[nodiscard]] std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Random permutation followed by round-robin dealing; shard sizes
/// differ by at most one.
[[nodiscard]] Partition partition(std::size_t num_samples, std::size_t m, std::uint64_t seed);
[[nodiscard]] inline Partition partition(const Dataset& ds, std::size_t m, std::uint64_t seed) {
  return partition(ds.size(), m, seed);
}

struct TrainTestIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// round(train_fraction * N) samples go to train, the rest to test.
[[nodiscard]] TrainTestIndices split_indices(std::size_t num_samples, double train_fraction,
                                             std::uint64_t seed);
[[nodiscard]] std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                                           std::uint64_t seed);

/// Column statistics used by standardize. The standard deviation uses the
/// population (divide-by-N) convention.
struct StandardizeStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  static constexpr std::string_view kConvention = "population";
};

struct Standardized {
  Dataset train;
  Dataset test;
  StandardizeStats stats;
};

/// Centers every column of `train` and scales it to unit variance where the
/// variance is positive; `test` is transformed with the train statistics.
[[nodiscard]] Standardized standardize(const Dataset& train, const Dataset& test);

}  // namespace mdd
