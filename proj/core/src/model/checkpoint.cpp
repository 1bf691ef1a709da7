#include "nodex/model/checkpoint.hpp"

#include <fstream>

namespace nodex::model {

using json = nlohmann::json;

namespace {
constexpr char kMagic[4] = {'N', 'D', 'X', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

void write_matrix(std::ofstream& f, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      f.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const json& meta,
                     const std::vector<std::pair<std::string, const nn::ParamStore*>>& stores,
                     const std::vector<NamedTensor>& extras) {
  json index = json::array();
  auto add_entry = [&index](const std::string& name, const Matrix& m) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  for (const auto& [prefix, store] : stores)
    for (const nn::Parameter* p : store->all()) add_entry(prefix + "." + p->name, p->value);
  for (const auto& t : extras) add_entry(t.name, t.value);

  json header;
  header["format_version"] = kFormatVersion;
  header["meta"] = meta;
  header["tensors"] = index;
  std::string header_text = header.dump();

  std::ofstream f(path, std::ios::binary);
  NODEX_REQUIRE(f.good(), "save_checkpoint: cannot open " + path.string());
  f.write(kMagic, 4);
  std::uint32_t ver = kFormatVersion;
  f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  std::uint64_t hlen = header_text.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [prefix, store] : stores)
    for (const nn::Parameter* p : store->all()) write_matrix(f, p->value);
  for (const auto& t : extras) write_matrix(f, t.value);
  NODEX_REQUIRE(f.good(), "save_checkpoint: short write to " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  NODEX_REQUIRE(f.good(), "checkpoint: cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  NODEX_REQUIRE(f.good() && std::equal(magic, magic + 4, kMagic),
                "checkpoint: bad magic in " + path.string());
  std::uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  NODEX_REQUIRE(ver == kFormatVersion, "checkpoint: unsupported version in " + path.string());
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header_text(hlen, '\0');
  f.read(header_text.data(), static_cast<std::streamsize>(hlen));
  NODEX_REQUIRE(f.good(), "checkpoint: truncated header in " + path.string());
  json header = json::parse(header_text);

  Checkpoint ckpt;
  ckpt.meta_ = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v;
        f.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(r, c) = v;
      }
    NODEX_REQUIRE(f.good(), "checkpoint: truncated tensor data in " + path.string());
    ckpt.tensors_.emplace(std::move(name), std::move(m));
  }
  return ckpt;
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  NODEX_REQUIRE(it != tensors_.end(), "checkpoint: missing tensor " + name);
  return it->second;
}

void Checkpoint::load_into(const std::string& prefix, nn::ParamStore& store) const {
  std::vector<std::string> problems;
  for (nn::Parameter* p : store.all()) {
    std::string key = prefix + "." + p->name;
    auto it = tensors_.find(key);
    if (it == tensors_.end()) {
      problems.push_back("missing tensor " + key + " (want " + std::to_string(p->value.rows()) +
                         "x" + std::to_string(p->value.cols()) + ")");
      continue;
    }
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      problems.push_back("shape mismatch for " + key + ": checkpoint " +
                         std::to_string(it->second.rows()) + "x" +
                         std::to_string(it->second.cols()) + ", model " +
                         std::to_string(p->value.rows()) + "x" +
                         std::to_string(p->value.cols()));
      continue;
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint incompatible with model:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw RuntimeFailure(msg);
  }
  for (nn::Parameter* p : store.all()) p->value = tensors_.at(prefix + "." + p->name);
}

}  // namespace nodex::model
