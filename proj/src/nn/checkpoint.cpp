#include <bit>
#include <filesystem>
#include <fstream>

#include "prefplan/error.hpp"
#include "prefplan/nn/train.hpp"

namespace prefplan::nn {

static_assert(std::endian::native == std::endian::little, "checkpoints are written in host byte order");

namespace fs = std::filesystem;

void save_checkpoint(const Model& model, const nlohmann::json& config, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("IO", "neural", "cannot create " + dir + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["schema"] = kCheckpointSchema;
  manifest["endianness"] = "little";
  manifest["dtype"] = "float64";
  manifest["dims"] = model.dims().to_json();
  manifest["params"] = nlohmann::json::array();
  std::ofstream weights(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!weights) throw Error("IO", "neural", "cannot write weights in " + dir);
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    manifest["params"].push_back(
        {{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
    weights.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    offset += static_cast<std::size_t>(p.value.size());
  }
  manifest["config"] = config;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out || !weights) throw Error("IO", "neural", "cannot write checkpoint in " + dir);
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  const fs::path wpath = fs::path(dir) / "weights.bin";
  if (!fs::exists(mpath) || !fs::exists(wpath)) {
    throw Error("MISSING_CHECKPOINT", "neural", "no checkpoint in " + dir);
  }
  nlohmann::json manifest;
  try {
    std::ifstream in(mpath);
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("SCHEMA_MISMATCH", "neural", "unreadable manifest: " + std::string(e.what()));
  }
  if (manifest.value("schema", "") != kCheckpointSchema || manifest.value("dtype", "") != "float64" ||
      manifest.value("endianness", "") != "little") {
    throw Error("SCHEMA_MISMATCH", "neural", "unsupported checkpoint format in " + dir);
  }
  Checkpoint ck;
  try {
    ck.model = Model(ModelDims::from_json(manifest.at("dims")), 0);
    ck.config = manifest.value("config", nlohmann::json::object());
    const auto& entries = manifest.at("params");
    auto& params = ck.model.params();
    if (entries.size() != params.size()) throw Error("SCHEMA_MISMATCH", "neural", "parameter count differs");
    std::ifstream weights(wpath, std::ios::binary);
    weights.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(weights.tellg());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      const auto& e = entries[i];
      if (e.at("name").get<std::string>() != p.name || e.at("shape").at(0).get<Eigen::Index>() != p.value.rows() ||
          e.at("shape").at(1).get<Eigen::Index>() != p.value.cols()) {
        throw Error("SCHEMA_MISMATCH", "neural", "parameter " + std::to_string(i) + " does not match the model");
      }
      const auto offset = e.at("offset").get<std::size_t>();
      if ((offset + static_cast<std::size_t>(p.value.size())) * sizeof(double) > bytes) {
        throw Error("SCHEMA_MISMATCH", "neural", "weights.bin is truncated");
      }
      weights.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
      weights.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("SCHEMA_MISMATCH", "neural", "bad manifest: " + std::string(e.what()));
  }
  ck.model.zero_grad();
  return ck;
}

}  // namespace prefplan::nn
