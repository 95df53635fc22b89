#include <bit>
#include <cstring>
#include <fstream>

#include "cfm/model.hpp"

namespace cfm {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const nlohmann::json& provenance) {
  nlohmann::ordered_json header;
  header["config"] = to_json(model.config());
  header["provenance"] = provenance;
  header["bin_edges"] = model.bins().edges();
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.params()) {
    tensors.push_back({{"name", p.name},
                       {"shape", {p.value.rows(), p.value.cols()}},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * sizeof(float);
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write checkpoint " + tmp);
    out.write(kMagic, sizeof kMagic);
    const auto len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params())
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    if (!out) throw RuntimeFailure("short write to checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read checkpoint " + path.string());
  char magic[8];
  std::uint32_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ValidationError(path.string() + ": not a checkpoint file");
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw ValidationError(path.string() + ": truncated checkpoint header");
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.provenance = header.at("provenance");
    ckpt.bin_edges = header.at("bin_edges").get<std::vector<double>>();
    const auto data_start = in.tellg();
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      Mat<float> m(rows, cols);
      in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
      if (!in) throw ValidationError(path.string() + ": truncated tensor " + t.at("name").get<std::string>());
      ckpt.params.add(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

template <class S>
Model<S> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<S> model(ckpt.config, 0);
  const auto& edges = model.bins().edges();
  require(edges.size() == ckpt.bin_edges.size(), "checkpoint bin edges do not match its configuration");
  for (std::size_t i = 0; i < edges.size(); ++i)
    require(std::abs(edges[i] - ckpt.bin_edges[i]) <= 1e-12, "checkpoint bin edges do not match its configuration");
  for (const auto& p : model.params())
    require(ckpt.params.find(p.name) >= 0, "checkpoint lacks parameter " + p.name);
  model.load_values(ckpt.params);
  return model;
}

template Model<float> model_from_checkpoint<float>(const Checkpoint&);
template Model<double> model_from_checkpoint<double>(const Checkpoint&);

}  // namespace cfm
