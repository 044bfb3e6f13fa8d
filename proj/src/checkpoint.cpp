#include "tcct/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tcct/errors.hpp"

namespace tcct {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

const StoredTensor* CheckpointFile::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(origin_ + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 24)) throw DataError(origin_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string origin_;
};

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(file.metadata.size()));
    for (const auto& [k, v] : file.metadata) {
      put_str(out, k);
      put_str(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& t : file.tensors) {
      if (shape_numel(t.shape) != t.values.size()) {
        throw ShapeError("checkpoint tensor " + t.name + " has " + std::to_string(t.values.size()) +
                         " values for shape " + shape_str(t.shape));
      }
      put_str(out, t.name);
      put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) put_u64(out, d);
      out.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[sizeof(kCheckpointMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile file;
  const std::uint32_t meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    auto k = r.str();
    auto v = r.str();
    file.metadata.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.str();
    const std::uint32_t ndim = r.u32();
    if (ndim > 8) throw DataError(path.string() + ": implausible tensor rank");
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(r.u64());
    const std::size_t n = shape_numel(t.shape);
    if (n > (std::size_t{1} << 32)) throw DataError(path.string() + ": implausible tensor size");
    t.values.resize(n);
    r.bytes(t.values.data(), n * sizeof(double));
    file.tensors.push_back(std::move(t));
  }
  return file;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     model::TcctModel& model, const std::optional<data::FeatureStats>& stats) {
  CheckpointFile file;
  file.metadata = config_entries(config);
  for (const auto& p : model.all_parameters()) {
    const auto v = p.tensor.values();
    file.tensors.push_back({p.name, p.tensor.shape(), {v.begin(), v.end()}});
  }
  for (const auto& b : model.buffers()) file.tensors.push_back({b.name, {b.values->size()}, *b.values});
  if (stats) {
    file.tensors.push_back({"data.mean", {stats->mean.size()}, stats->mean});
    file.tensors.push_back({"data.stddev", {stats->stddev.size()}, stats->stddev});
  }
  write_checkpoint_file(path, file);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto file = read_checkpoint_file(path);
  LoadedCheckpoint out;
  try {
    for (const auto& [k, v] : file.metadata) apply_setting(out.config, k, v);
    out.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  out.model = std::make_unique<model::TcctModel>(out.config.model, out.config.train.seed);

  auto fetch = [&](const std::string& name, std::size_t numel) -> const std::vector<double>& {
    const auto* t = file.find(name);
    if (!t) throw DataError(path.string() + ": checkpoint lacks tensor " + name);
    if (t->values.size() != numel) {
      throw DataError(path.string() + ": tensor " + name + " has " + std::to_string(t->values.size()) +
                      " values, model expects " + std::to_string(numel));
    }
    return t->values;
  };
  for (auto& p : out.model->all_parameters()) {
    const auto& src = fetch(p.name, p.tensor.numel());
    auto dst = p.tensor.mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (const auto& b : out.model->buffers()) *b.values = fetch(b.name, b.values->size());
  if (file.find("data.mean")) {
    const std::size_t f = out.config.features.size();
    out.stats = data::FeatureStats{fetch("data.mean", f), fetch("data.stddev", f)};
  }
  return out;
}

}  // namespace tcct
