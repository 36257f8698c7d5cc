#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "moff/tensor.hpp"

namespace moff {

// On-disk model container. JSON keeps the format diffable and language
// neutral; doubles survive a round trip bit-exactly because serialization
// uses shortest-round-trip formatting.
struct ModelFile {
  std::string system;  // "A", "B" or "PV"
  nlohmann::json config = nlohmann::json::object();
  std::string vocab_ref;  // path of the vocabulary file, possibly relative
  std::map<std::string, Tensor2> tensors;

  const Tensor2& tensor(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("model is missing tensor '" + name + "'");
    return it->second;
  }

  const Tensor2& tensor(const std::string& name, std::size_t rows, std::size_t cols) const {
    const Tensor2& t = tensor(name);
    if (t.rows != rows || t.cols != cols)
      throw std::runtime_error("model tensor '" + name + "' has shape " +
                               std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                               ", expected " + std::to_string(rows) + "x" +
                               std::to_string(cols));
    return t;
  }
};

inline void save_model(const std::string& path, const ModelFile& model) {
  nlohmann::json j;
  j["format"] = "moff-model";
  j["version"] = 1;
  j["system"] = model.system;
  j["config"] = model.config;
  j["vocab_ref"] = model.vocab_ref;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : model.tensors) {
    nlohmann::json entry;
    entry["shape"] = {t.rows, t.cols};
    entry["data"] = t.data;
    tensors[name] = std::move(entry);
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": not a valid model file (" + e.what() + ")");
  }
  try {
    if (j.at("format").get<std::string>() != "moff-model")
      throw std::runtime_error(path + ": unrecognized format tag");
    if (j.at("version").get<int>() != 1)
      throw std::runtime_error(path + ": unsupported version " + j.at("version").dump());
    ModelFile model;
    model.system = j.at("system").get<std::string>();
    model.config = j.value("config", nlohmann::json::object());
    model.vocab_ref = j.value("vocab_ref", std::string{});
    for (const auto& [name, entry] : j.at("tensors").items()) {
      Tensor2 t;
      t.rows = entry.at("shape").at(0).get<std::size_t>();
      t.cols = entry.at("shape").at(1).get<std::size_t>();
      entry.at("data").get_to(t.data);
      if (t.data.size() != t.rows * t.cols)
        throw std::runtime_error(path + ": tensor '" + name +
                                 "' data length does not match shape");
      if (!all_finite(t))
        throw std::runtime_error(path + ": tensor '" + name + "' contains non-finite values");
      model.tensors.emplace(name, std::move(t));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed model file (" + std::string(e.what()) + ")");
  }
}

}  // namespace moff
