#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rca/config.hpp"
#include "rca/memory_bank.hpp"
#include "rca/net.hpp"
#include "rca/prototypes.hpp"

namespace rca {

class Trainer;

// Everything needed to evaluate or inspect a trained model.
struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  std::optional<PrototypeSet> prototypes;
  MemoryBank bank;

  static Checkpoint from_trainer(const Trainer& trainer);
  // Prototypes the O branch should use: none when RSA is disabled.
  const PrototypeSet* active_prototypes() const {
    return config.rsa_on && prototypes ? &*prototypes : nullptr;
  }
};

// Layout (little-endian):
//   "RCAK" u32 version
//   "CONF" u32 n  n bytes of config JSON
//   "PARM" u32 tensors; per tensor: u32 rank, u32 extents[rank], f32 values
//   "PROT" u8 present [u32 L, u32 K, u32 D, i32 epoch, u8 status[L], f32 values[L*K*D]]
//   "MEMB" u32 L, u32 D; per class: u32 slots; per slot: u32 image_id, f32 values[D]
// Parameters are stored as f32, so a reload matches the original to float precision.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);  // throws DecodeError
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// One row per prototype coordinate: class,k,dim,value.
void write_prototypes_csv(const std::filesystem::path& path, const PrototypeSet& protos);

}  // namespace rca
