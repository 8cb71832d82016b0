#include "ibp/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "ibp/harness/io.hpp"
#include "ibp/harness/model.hpp"

namespace ibp::harness {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host-order data and assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'B', 'P', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename U>
  void pod(U v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(U));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(std::uint32_t(s.size()));
    buf_.append(s);
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    str(name);
    pod<std::uint32_t>(std::uint32_t(t.rank()));
    for (std::size_t d : t.shape()) pod<std::uint64_t>(d);
    buf_.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(float));
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::string bytes)
      : path_(path), buf_(std::move(bytes)) {}
  template <typename U>
  U pod(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint32_t>(what);
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void bytes(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n)
      throw CheckpointError(path_.string() + ": truncated while reading " + what);
  }
  std::filesystem::path path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

std::map<std::string, Tensor<float>*> named_tensors(nn::Network<float>& net) {
  std::map<std::string, Tensor<float>*> out;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    if (!l.has_params()) continue;
    out["layer" + std::to_string(k) + ".weight"] = &l.weight;
    if (l.bias.size() > 0) out["layer" + std::to_string(k) + ".bias"] = &l.bias;
  }
  if (!net.has_embedding_layer()) out["frozen_embeddings"] = &net.frozen_embeddings;
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nn::Network<float>& net,
                     const nlohmann::json& metadata) {
  net.validate();
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(describe(net).to_string());
  w.str(metadata.dump());
  auto copy = net;
  auto tensors = named_tensors(copy);
  if (!net.has_embedding_layer() && net.frozen_embeddings.size() == 0)
    tensors.erase("frozen_embeddings");
  w.pod<std::uint32_t>(std::uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) w.tensor(name, *t);
  write_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_architecture) {
  Reader r(path, read_file(path));
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path.string() + ": not a checkpoint file");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": format version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  Checkpoint ck;
  ck.architecture = r.str("architecture");
  if (expected_architecture && *expected_architecture != ck.architecture)
    throw CheckpointError(path.string() + ": architecture '" + ck.architecture +
                          "' differs from the requested '" + *expected_architecture + "'");
  try {
    ck.metadata = nlohmann::json::parse(r.str("metadata"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(path.string() + ": bad metadata: " + e.what());
  }
  ck.net = build_network<float>(ArchSpec::parse(ck.architecture));
  auto slots = named_tensors(ck.net);
  std::map<std::string, bool> seen;
  const auto count = r.pod<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str("tensor name");
    const auto rank = r.pod<std::uint32_t>("tensor rank");
    if (rank > 8)
      throw CheckpointError(path.string() + ": tensor '" + name + "' has rank " +
                            std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = std::size_t(r.pod<std::uint64_t>("tensor shape"));
      n *= d;
    }
    auto it = slots.find(name);
    if (it == slots.end() || seen[name])
      throw CheckpointError(path.string() + ": unexpected tensor '" + name + "'");
    seen[name] = true;
    Tensor<float>& dst = *it->second;
    if (name != "frozen_embeddings" && dst.shape() != shape)
      throw CheckpointError(path.string() + ": tensor '" + name + "' has the wrong shape");
    if (name == "frozen_embeddings" && (rank != 2 || shape[1] != ck.net.input_dim))
      throw CheckpointError(path.string() + ": frozen embeddings have the wrong width");
    std::vector<float> data(n);
    r.bytes(data.data(), n * sizeof(float), "tensor data");
    dst = Tensor<float>(shape, std::move(data));
  }
  for (const auto& [name, _] : slots)
    if (!seen[name] && name != "frozen_embeddings")
      throw CheckpointError(path.string() + ": missing tensor '" + name + "'");
  if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after the last tensor");
  ck.net.validate();
  return ck;
}

}  // namespace ibp::harness
