#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "codetr/model/reward_model.hpp"

namespace codetr::model {

// Checkpoint layout (all integers and doubles little-endian):
//
//   magic          8 bytes  "CODETRCK"
//   version        u32      kCheckpointVersion
//   total_length   u64      byte length of the whole file, CRC included
//   config block   i32 x 8 (layers, inseq layers, heads, d, M, state_dim,
//                  action_dim, zero_qk_init) then f64 x 2 (dropout, init_std)
//   model version  u64
//   param count    u32
//   per parameter  u32 name length, name bytes, u32 rank, u64 dims..., f64 values...
//   crc32          u32      over every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, VersionMismatch, Truncated, Corrupt, ConfigMismatch };

  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const RewardModel& model, const std::filesystem::path& path);

// Returns a fully built model or throws; a failed load never yields a partial
// model. When `expected` is given the stored config must equal it.
RewardModel load_checkpoint(const std::filesystem::path& path,
                            const std::optional<RewardModelConfig>& expected = std::nullopt);

}  // namespace codetr::model
