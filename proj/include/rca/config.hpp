#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace rca {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  double lr_backbone = 1e-3;
  double lr_heads = 1e-2;
  double lr_decay = 0.1;
  std::size_t lr_decay_epochs = 5;
  double sgd_momentum = 0.9;
  double weight_decay = 5e-4;
  double alpha1 = 0.01;  // contrast weight; forced to 0 in epoch 1
  double alpha2 = 0.4;   // auxiliary CE weight on the P branch
  double gamma = 0.99;   // memory momentum
  double nu = 0.7;       // gate threshold on sigmoid(p_l)
  double beta = 8.0;     // mixup Beta(beta, beta)
  double tau = 0.1;      // contrast temperature
  std::size_t K = 10;    // prototypes per class
  std::size_t memory_capacity = 0;  // per class; 0 = unbounded ("all" in JSON)
  std::uint64_t seed = 0;
  bool rsc_on = true;
  bool rsa_on = true;
  bool mixup_on = true;
  std::size_t feature_channels = 32;
  bool hflip = true;

  void validate() const;  // throws ConfigError

  // Learning-rate multiplier for a 1-based epoch.
  double lr_factor(std::size_t epoch) const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);

  // Compact, stable identifier of every field.
  std::string fingerprint() const;
};

}  // namespace rca
