#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/baselines.hpp"

namespace mdd {

/// On-disk model. JSON layout:
///
///   {"kind": "<method>", "lambda": x, "gamma": x?, "sigma": x?,
///    "shards": [{"w": [...]}]                      (linear kinds)
///    "shards": [{"anchors": [[...]...], "coeffs": [...]}]  (kernel kinds)}
///
/// Predictions average uniformly over shards in both cases.
struct SavedModel {
  std::string kind;
  double lambda = 0.0;
  std::optional<double> gamma;
  std::optional<double> sigma;
  std::vector<Eigen::VectorXd> linear_shards;
  ShardedKernelModel kernel_model;

  [[nodiscard]] bool is_kernel() const { return sigma.has_value(); }
  [[nodiscard]] LinearModel linear_average() const;
};

[[nodiscard]] bool is_kernel_kind(const std::string& kind);

void write_model(const SavedModel& model, std::ostream& out);
[[nodiscard]] SavedModel read_model(std::istream& in);

void save_model(const SavedModel& model, const std::filesystem::path& path);
[[nodiscard]] SavedModel load_model(const std::filesystem::path& path);

}  // namespace mdd
