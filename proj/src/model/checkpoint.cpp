#include "codetr/model/checkpoint.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace codetr::model {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'O', 'D', 'E', 'T', 'R', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint: record runs past end of payload");
    }
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

void write_config(Writer& w, const RewardModelConfig& c) {
  w.put<std::int32_t>(c.num_causal_layers);
  w.put<std::int32_t>(c.num_inseq_layers);
  w.put<std::int32_t>(c.num_heads);
  w.put<std::int32_t>(c.embed_dim);
  w.put<std::int32_t>(c.max_window);
  w.put<std::int32_t>(c.state_dim);
  w.put<std::int32_t>(c.action_dim);
  w.put<std::int32_t>(c.zero_qk_init ? 1 : 0);
  w.put<double>(c.dropout);
  w.put<double>(c.init_std);
}

RewardModelConfig read_config(Reader& r) {
  RewardModelConfig c;
  c.num_causal_layers = r.get<std::int32_t>();
  c.num_inseq_layers = r.get<std::int32_t>();
  c.num_heads = r.get<std::int32_t>();
  c.embed_dim = r.get<std::int32_t>();
  c.max_window = r.get<std::int32_t>();
  c.state_dim = r.get<std::int32_t>();
  c.action_dim = r.get<std::int32_t>();
  c.zero_qk_init = r.get<std::int32_t>() != 0;
  c.dropout = r.get<double>();
  c.init_std = r.get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const RewardModel& model, const std::filesystem::path& path) {
  Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::size_t length_offset = w.bytes().size();
  w.put<std::uint64_t>(0);
  write_config(w, model.config());
  w.put<std::uint64_t>(model.version());
  const auto params = model.named_parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint64_t>(d);
    for (double v : t.data()) w.put<double>(v);
  }
  auto& bytes = w.bytes();
  const std::uint64_t total = bytes.size() + sizeof(std::uint32_t);
  std::memcpy(bytes.data() + length_offset, &total, sizeof(total));
  w.put<std::uint32_t>(crc_of(bytes.data(), bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: write to " + path.string() + " failed");
}

RewardModel load_checkpoint(const std::filesystem::path& path, const std::optional<RewardModelConfig>& expected) {
  using Kind = CheckpointError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "checkpoint: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t header = kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError(Kind::BadMagic, "checkpoint: " + path.string() + " is not a reward-model checkpoint");
  }
  if (bytes.size() < header) {
    throw CheckpointError(Kind::Truncated, "checkpoint: truncated header, expected at least " +
                                               std::to_string(header) + " bytes, got " + std::to_string(bytes.size()));
  }
  Reader r(bytes);
  r.get_string(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::VersionMismatch, "checkpoint: format version " + std::to_string(version) +
                                                     ", this build reads version " +
                                                     std::to_string(kCheckpointVersion));
  }
  const auto total = r.get<std::uint64_t>();
  if (bytes.size() != total) {
    throw CheckpointError(Kind::Truncated, "checkpoint: expected " + std::to_string(total) + " bytes, got " +
                                               std::to_string(bytes.size()));
  }
  const std::size_t payload = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + payload, sizeof(stored_crc));
  if (crc_of(bytes.data(), payload) != stored_crc) {
    throw CheckpointError(Kind::Corrupt, "checkpoint: CRC mismatch in " + path.string());
  }

  const auto config = read_config(r);
  if (expected && !(*expected == config)) {
    throw CheckpointError(Kind::ConfigMismatch, "checkpoint: stored model config differs from the requested one");
  }
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::Corrupt, std::string("checkpoint: invalid stored config: ") + e.what());
  }
  const auto model_version = r.get<std::uint64_t>();

  RewardModel model(config, 0);
  auto params = model.named_parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) {
    throw CheckpointError(Kind::ConfigMismatch, "checkpoint: holds " + std::to_string(count) +
                                                    " parameter tensors, config implies " +
                                                    std::to_string(params.size()));
  }
  for (auto& [name, tensor] : params) {
    const auto name_len = r.get<std::uint32_t>();
    const auto stored_name = r.get_string(name_len);
    if (stored_name != name) {
      throw CheckpointError(Kind::ConfigMismatch, "checkpoint: expected parameter '" + name + "', found '" +
                                                      stored_name + "'");
    }
    const auto rank = r.get<std::uint32_t>();
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (shape != tensor.shape()) {
      throw CheckpointError(Kind::ConfigMismatch, "checkpoint: parameter '" + name + "' has shape " +
                                                      ad::to_string(shape) + ", expected " +
                                                      ad::to_string(tensor.shape()));
    }
    auto values = tensor.mutable_data();
    for (auto& v : values) v = r.get<double>();
  }
  if (r.position() != payload) {
    throw CheckpointError(Kind::Corrupt, "checkpoint: trailing bytes after parameter block");
  }
  model.restore_version(model_version);
  return model;
}

}  // namespace codetr::model
