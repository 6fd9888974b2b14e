#include "rephrase/numcore/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace rephrase::numcore {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw CheckpointError("truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CheckpointError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad manifest: ") + e.what());
  }
  if (m.value("format_version", -1) != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version");
  }
  std::string config = m.at("config").dump();
  if (m.value("config_hash", std::string()) != hex64(fnv1a64(config))) {
    throw CheckpointError("config hash mismatch");
  }
  return m;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const std::string& config_json) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "params.bin", std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + (dir / "params.bin").string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  auto all = params.all();
  put<std::uint64_t>(out, all.size());
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter* p : all) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Index k = 0; k < p->value.size(); ++k) put<double>(out, p->value.data()[k]);
    tensors.push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}});
  }
  if (!out) throw CheckpointError("write failed for " + (dir / "params.bin").string());

  nlohmann::json config = nlohmann::json::parse(config_json.empty() ? "{}" : config_json);
  nlohmann::json manifest = {{"format_version", kCheckpointFormatVersion},
                             {"config", config},
                             {"config_hash", hex64(fnv1a64(config.dump()))},
                             {"tensors", tensors}};
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw CheckpointError("write failed for manifest.json");
}

std::string load_checkpoint(const std::filesystem::path& dir, ParameterSet& params) {
  nlohmann::json manifest = read_manifest(dir);
  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + (dir / "params.bin").string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file");
  }
  if (get<std::uint32_t>(in) != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported tensor file version");
  }
  auto count = get<std::uint64_t>(in);
  std::map<std::string, Tensor> loaded;
  for (std::uint64_t k = 0; k < count; ++k) {
    auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("truncated checkpoint");
    auto rows = static_cast<Index>(get<std::uint64_t>(in));
    auto cols = static_cast<Index>(get<std::uint64_t>(in));
    Tensor t(rows, cols);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Real>(get<double>(in));
    loaded.emplace(std::move(name), std::move(t));
  }
  if (loaded.size() != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(loaded.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (Parameter* p : params.all()) {
    auto it = loaded.find(p->name);
    if (it == loaded.end()) throw CheckpointError("missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw CheckpointError("shape mismatch for " + p->name + ": file " + shape_string(it->second) +
                            ", model " + shape_string(p->value));
    }
  }
  for (Parameter* p : params.all()) p->value = loaded.at(p->name);
  return manifest.at("config").dump();
}

std::string read_checkpoint_config(const std::filesystem::path& dir) {
  return read_manifest(dir).at("config").dump();
}

}  // namespace rephrase::numcore
