#include "lee/model/checkpoint.hpp"

#include "lee/tensor/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lee/util/fields.hpp"

namespace lee::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::ifstream in;
  std::string path;
  void need(std::size_t n, char* dst) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint " + path + ": truncated file");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    need(4, reinterpret_cast<char*>(&v));
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    need(8, reinterpret_cast<char*>(&v));
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 26)) throw std::runtime_error("checkpoint " + path + ": implausible string length");
    std::string s(n, '\0');
    need(n, s.data());
    return s;
  }
};

CheckpointInfo read_header(Reader& r) {
  char magic[4];
  r.need(4, magic);
  if (std::memcmp(magic, "LEE1", 4) != 0) throw std::runtime_error("checkpoint " + r.path + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + r.path + ": unsupported version " + std::to_string(version));
  }
  CheckpointInfo info;
  info.config = parse_config_text(r.str());
  info.provenance = r.str();
  info.init_seed = r.u64();
  return info;
}

}  // namespace

std::string config_text(const ModelConfig& cfg) {
  std::string out;
  util::echo_fields(cfg, "model", out);
  return out;
}

ModelConfig parse_config_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos || line.rfind("model.", 0) != 0) {
      throw std::runtime_error("checkpoint config: malformed line '" + line + "'");
    }
    const std::string key = line.substr(6, eq - 6);
    if (!util::set_field(cfg, key, line.substr(eq + 3))) {
      throw std::runtime_error("checkpoint config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, std::uint64_t init_seed,
                     const std::string& provenance) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write("LEE1", 4);
  put_u32(out, kCheckpointVersion);
  put_str(out, config_text(model.config()));
  put_str(out, provenance);
  put_u64(out, init_seed);
  put_u32(out, static_cast<std::uint32_t>(model.params().size()));
  std::vector<float> buf;
  for (const auto& p : model.params()) {
    put_str(out, p.name);
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor.cols()));
    const auto& v = p.tensor.value();
    buf.resize(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(v.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r{std::ifstream(path, std::ios::binary), path.string()};
  if (!r.in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_header(r);
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info_out) {
  Reader r{std::ifstream(path, std::ios::binary), path.string()};
  if (!r.in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const CheckpointInfo info = read_header(r);
  auto model = std::make_unique<Model>(info.config, info.init_seed);
  const std::uint32_t count = r.u32();
  if (count != model->params().size()) {
    throw std::runtime_error("checkpoint " + r.path + ": holds " + std::to_string(count) + " parameters, config needs " +
                             std::to_string(model->params().size()));
  }
  std::vector<float> buf;
  for (const auto& p : model->params()) {
    const std::string name = r.str();
    const auto rows = static_cast<Index>(r.u32()), cols = static_cast<Index>(r.u32());
    if (name != p.name) throw std::runtime_error("checkpoint " + r.path + ": expected '" + p.name + "', found '" + name + "'");
    if (rows != p.tensor.rows() || cols != p.tensor.cols()) {
      throw std::runtime_error("checkpoint " + r.path + ": '" + name + "' has shape " + ("[" + std::to_string(rows) + " x " + std::to_string(cols) + "]") +
                               ", config needs " + p.tensor.shape_str());
    }
    buf.resize(static_cast<std::size_t>(rows * cols));
    r.need(buf.size() * sizeof(float), reinterpret_cast<char*>(buf.data()));
    Tensor t = p.tensor;
    for (Index i = 0; i < rows * cols; ++i) t.mutable_value().data()[i] = buf[static_cast<std::size_t>(i)];
  }
  if (r.in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint " + r.path + ": trailing bytes");
  if (info_out) *info_out = info;
  return model;
}

}  // namespace lee::model
