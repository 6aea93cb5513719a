#include "mdd/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace mdd {

namespace {

constexpr char kCacheMagic[4] = {'M', 'D', 'D', '1'};

struct SparseRow {
  double label = 0.0;
  std::vector<std::pair<std::size_t, double>> entries;  // 0-based column
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

double parse_real(std::string_view token, std::size_t line, const char* what) {
  double value = 0.0;
  // from_chars rejects a leading '+', LIBSVM writers occasionally emit one.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line, std::string("non-finite ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

SparseRow parse_line(std::string_view text, std::size_t line) {
  SparseRow row;
  std::size_t pos = 0;
  bool have_label = false;
  std::size_t last_index = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    std::string_view token = text.substr(pos, end - pos);
    pos = end;

    if (!have_label) {
      row.label = parse_real(token, line, "label");
      have_label = true;
      continue;
    }
    auto colon = token.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == token.size()) {
      throw ParseError(line, "malformed feature token '" + std::string(token) + "'");
    }
    std::string_view idx_text = token.substr(0, colon);
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
    if (ec != std::errc{} || ptr != idx_text.data() + idx_text.size()) {
      throw ParseError(line, "malformed feature index '" + std::string(idx_text) + "'");
    }
    if (index < 1) throw ParseError(line, "feature index must be >= 1");
    if (index <= last_index) {
      throw ParseError(line, "feature indices must be strictly increasing (" +
                                 std::to_string(index) + " after " + std::to_string(last_index) + ")");
    }
    last_index = index;
    row.entries.emplace_back(index - 1, parse_real(token.substr(colon + 1), line, "feature value"));
  }
  return row;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated dataset cache");
  return value;
}

// Unbiased draw in [0, bound) by rejection on the raw 64-bit stream.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.targets.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(indices[r]);
    if (src >= features.rows()) throw std::out_of_range("Dataset::subset: index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(src);
    out.targets(static_cast<Eigen::Index>(r)) = targets(src);
  }
  return out;
}

Dataset parse_libsvm(std::istream& in) {
  std::vector<SparseRow> rows;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](char c) { return is_space(c); })) continue;
    SparseRow row = parse_line(line, line_no);
    if (!row.entries.empty()) dim = std::max(dim, row.entries.back().first + 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty LIBSVM input");

  Dataset ds;
  ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  ds.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    ds.targets(ri) = rows[r].label;
    for (const auto& [col, value] : rows[r].entries) {
      ds.features(ri, static_cast<Eigen::Index>(col)) = value;
    }
  }
  return ds;
}

Dataset parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    out << ds.targets(r);
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      const double v = ds.features(r, c);
      if (v != 0.0) out << ' ' << (c + 1) << ':' << v;
    }
    out << '\n';
  }
  out.precision(old_precision);
}

void write_cache(const Dataset& ds, std::ostream& out) {
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_le<std::int64_t>(out, static_cast<std::int64_t>(ds.size()));
  write_le<std::int64_t>(out, static_cast<std::int64_t>(ds.dim()));
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) write_le<double>(out, ds.features(r, c));
  }
  for (Eigen::Index r = 0; r < ds.targets.size(); ++r) write_le<double>(out, ds.targets(r));
}

Dataset read_cache(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not an MDD1 dataset cache");
  }
  const auto n = read_le<std::int64_t>(in);
  const auto d = read_le<std::int64_t>(in);
  if (n < 0 || d < 0) throw std::runtime_error("corrupt dataset cache header");
  Dataset ds;
  ds.features.resize(n, d);
  ds.targets.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) ds.features(r, c) = read_le<double>(in);
  }
  for (Eigen::Index r = 0; r < n; ++r) ds.targets(r) = read_le<double>(in);
  if (!ds.features.allFinite() || !ds.targets.allFinite()) {
    throw std::runtime_error("dataset cache contains non-finite values");
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  const bool is_cache = in.gcount() == 4 && std::memcmp(magic, kCacheMagic, sizeof(magic)) == 0;
  in.clear();
  in.seekg(0);
  return is_cache ? read_cache(in) : parse_libsvm(in);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(draw_below(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Partition partition(std::size_t num_samples, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("partition: shard count must be positive");
  if (m > num_samples) {
    throw std::invalid_argument("partition: shard count " + std::to_string(m) +
                                " exceeds sample count " + std::to_string(num_samples));
  }
  Partition part;
  part.seed = seed;
  part.shards.resize(m);
  const auto perm = seeded_permutation(num_samples, seed);
  for (std::size_t k = 0; k < perm.size(); ++k) part.shards[k % m].push_back(perm[k]);
  return part;
}

TrainTestIndices split_indices(std::size_t num_samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_train_test: train fraction must lie in (0, 1)");
  }
  if (num_samples < 2) throw std::invalid_argument("split_train_test: need at least two samples");
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(num_samples)));
  n_train = std::clamp<std::size_t>(n_train, 1, num_samples - 1);

  const auto perm = seeded_permutation(num_samples, seed);
  TrainTestIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  const auto idx = split_indices(ds.size(), train_fraction, seed);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

Standardized standardize(const Dataset& train, const Dataset& test) {
  if (train.empty()) throw std::invalid_argument("standardize: empty training set");
  if (!test.empty() && test.dim() != train.dim()) {
    throw std::invalid_argument("standardize: train/test feature dimensions differ");
  }
  const auto n = static_cast<double>(train.size());
  Standardized out{train, test, {}};
  out.stats.mean = train.features.colwise().mean().transpose();
  out.stats.stddev.resize(train.features.cols());
  for (Eigen::Index c = 0; c < train.features.cols(); ++c) {
    const double var = (train.features.col(c).array() - out.stats.mean(c)).square().sum() / n;
    out.stats.stddev(c) = std::sqrt(var);
  }
  auto apply = [&](Eigen::MatrixXd& x) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      x.col(c).array() -= out.stats.mean(c);
      // zero-variance columns are only centered
      if (out.stats.stddev(c) > 0.0) x.col(c) /= out.stats.stddev(c);
    }
  };
  apply(out.train.features);
  apply(out.test.features);
  return out;
}

}  // namespace mdd
