#include "mdd/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mdd {

namespace {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

bool is_kernel_kind(const std::string& kind) {
  return kind == "krr" || kind == "kdrr" || kind == "mdd-rkhs";
}

LinearModel SavedModel::linear_average() const {
  if (is_kernel()) throw std::invalid_argument("model '" + kind + "' is a kernel model");
  return {average_in_order(linear_shards)};
}

void write_model(const SavedModel& model, std::ostream& out) {
  json doc;
  doc["kind"] = model.kind;
  doc["lambda"] = model.lambda;
  if (model.gamma) doc["gamma"] = *model.gamma;
  if (model.sigma) doc["sigma"] = *model.sigma;
  json shards = json::array();
  if (model.is_kernel()) {
    for (const auto& shard : model.kernel_model.shards) {
      json anchors = json::array();
      for (Eigen::Index r = 0; r < shard.anchors.rows(); ++r) {
        anchors.push_back(to_json(shard.anchors.row(r).transpose()));
      }
      shards.push_back({{"anchors", std::move(anchors)}, {"coeffs", to_json(shard.coeffs)}});
    }
  } else {
    for (const auto& w : model.linear_shards) shards.push_back({{"w", to_json(w)}});
  }
  doc["shards"] = std::move(shards);
  out << doc.dump(2) << '\n';
}

SavedModel read_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed model JSON: ") + e.what());
  }
  SavedModel model;
  try {
    model.kind = doc.at("kind").get<std::string>();
    model.lambda = doc.at("lambda").get<double>();
    if (doc.contains("gamma")) model.gamma = doc["gamma"].get<double>();
    if (doc.contains("sigma")) model.sigma = doc["sigma"].get<double>();
    const auto& shards = doc.at("shards");
    if (!shards.is_array() || shards.empty()) throw std::runtime_error("model has no shards");
    if (model.sigma) {
      model.kernel_model.kernel.sigma = *model.sigma;
      for (const auto& s : shards) {
        KernelShard shard;
        const auto& anchors = s.at("anchors");
        shard.coeffs = vector_from(s.at("coeffs"));
        const auto rows = static_cast<Eigen::Index>(anchors.size());
        const auto cols = rows > 0 ? static_cast<Eigen::Index>(anchors[0].size()) : 0;
        shard.anchors.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
          const auto row = vector_from(anchors[static_cast<std::size_t>(r)]);
          if (row.size() != cols) throw std::runtime_error("ragged anchor matrix");
          shard.anchors.row(r) = row.transpose();
        }
        if (shard.coeffs.size() != rows) throw std::runtime_error("coefficient count does not match anchors");
        model.kernel_model.shards.push_back(std::move(shard));
      }
    } else {
      for (const auto& s : shards) {
        model.linear_shards.push_back(vector_from(s.at("w")));
        if (model.linear_shards.back().size() != model.linear_shards.front().size()) {
          throw std::runtime_error("linear shards have different dimensions");
        }
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed model JSON: ") + e.what());
  }
  return model;
}

void save_model(const SavedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model '" + path.string() + "'");
  write_model(model, out);
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model '" + path.string() + "'");
  return read_model(in);
}

}  // namespace mdd
