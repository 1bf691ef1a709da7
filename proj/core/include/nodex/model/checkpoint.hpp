#pragma once

#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

#include "nodex/nn/core.hpp"

namespace nodex::model {

/// Named-tensor container: a JSON header (metadata, architecture config and
/// tensor index) followed by raw little-endian float64 data. Compatibility
/// on load is checked by tensor name and shape.

struct NamedTensor {
  std::string name;
  Matrix value;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const nn::ParamStore*>>& stores,
                     const std::vector<NamedTensor>& extras = {});

class Checkpoint {
public:
  static Checkpoint load(const std::filesystem::path& path);

  const nlohmann::json& meta() const { return meta_; }
  bool has_tensor(const std::string& name) const { return tensors_.count(name) > 0; }
  const Matrix& tensor(const std::string& name) const;

  /// Copies `<prefix>.<param>` tensors into the store. Throws a structured
  /// error listing every missing/mismatched tensor name and shape.
  void load_into(const std::string& prefix, nn::ParamStore& store) const;

private:
  nlohmann::json meta_;
  std::map<std::string, Matrix> tensors_;
};

}  // namespace nodex::model
