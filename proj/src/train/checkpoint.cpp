#include "ctcig/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ctcig::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

struct Entry {
  std::string name;
  torch::Tensor tensor;
  std::string tag;
};

std::vector<Entry> entries(nn::CtcigModel& model) {
  std::vector<Entry> out;
  for (const auto& tp : model->tagged_parameters()) out.push_back({tp.name, tp.tensor, nn::to_string(tp.tag)});
  for (const auto& b : model->named_buffers()) out.push_back({b.key(), b.value(), "buffer"});
  return out;
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw LoadError(path.string() + ": truncated header");
  return v;
}

nlohmann::json read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw LoadError(path.string() + ": bad magic (not a CTCG checkpoint)");
  const auto version = get<uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw LoadError(path.string() + ": unsupported format version " + std::to_string(version));
  const auto len = get<uint64_t>(is, path);
  if (len > (64ULL << 20)) throw LoadError(path.string() + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw LoadError(path.string() + ": truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": header is not JSON: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, nn::CtcigModel& model, const nlohmann::json& meta) {
  const auto list = entries(model);
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : list) tensors.push_back({{"name", e.name}, {"shape", e.tensor.sizes().vec()}, {"tag", e.tag}});
  nlohmann::json header = {{"config", nn::to_json(model->config())}, {"meta", meta}, {"tensors", tensors}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + tmp);
    os.write(kCheckpointMagic, 4);
    put<uint32_t>(os, kCheckpointVersion);
    put<uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : list) {
      auto data = e.tensor.detach().to(torch::kCPU, torch::kFloat).contiguous();
      os.write(reinterpret_cast<const char*>(data.data_ptr<float>()),
               static_cast<std::streamsize>(data.numel() * sizeof(float)));
    }
    if (!os) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  return read_header(is, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  const auto header = read_header(is, path);
  if (!header.contains("config") || !header.contains("tensors"))
    throw LoadError(path.string() + ": header lacks config or tensors");

  LoadedCheckpoint out;
  out.meta = header.value("meta", nlohmann::json::object());
  out.model = nn::CtcigModel(nn::model_config_from_json(header.at("config"), true));
  auto list = entries(out.model);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != list.size())
    throw LoadError(path.string() + ": checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                    std::to_string(list.size()));

  torch::NoGradGuard ng;
  for (size_t i = 0; i < list.size(); ++i) {
    const auto& h = tensors[i];
    const auto name = h.at("name").get<std::string>();
    if (name != list[i].name) throw LoadError(path.string() + ": tensor " + std::to_string(i) + " is '" + name +
                                              "', model expects '" + list[i].name + "'");
    const auto shape = h.at("shape").get<std::vector<int64_t>>();
    if (shape != list[i].tensor.sizes().vec()) throw LoadError(path.string() + ": shape mismatch for " + name);
    auto buf = torch::empty(shape, torch::kFloat);
    if (!is.read(reinterpret_cast<char*>(buf.data_ptr<float>()),
                 static_cast<std::streamsize>(buf.numel() * sizeof(float))))
      throw LoadError(path.string() + ": truncated tensor data at " + name);
    list[i].tensor.copy_(buf);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw LoadError(path.string() + ": trailing bytes after tensor data");
  return out;
}

}  // namespace ctcig::train
