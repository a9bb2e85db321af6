#include "rca/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <cstdio>

namespace rca {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "batch_size", "epochs", "lr_backbone", "lr_heads", "lr_decay",  "lr_decay_epochs", "sgd_momentum",
      "weight_decay", "alpha1", "alpha2",  "gamma",       "nu",       "beta",            "tau",
      "K",          "memory_capacity",     "seed",        "rsc_on",   "rsa_on",          "mixup_on",
      "feature_channels", "hflip"};
  return keys;
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_count(const nlohmann::json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  positive(lr_backbone, "lr_backbone");
  positive(lr_heads, "lr_heads");
  positive(lr_decay, "lr_decay");
  if (lr_decay_epochs == 0) throw ConfigError("lr_decay_epochs must be positive");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("sgd_momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ConfigError("alpha1/alpha2 must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  if (!(nu >= 0.0 && nu < 1.0)) throw ConfigError("nu must be in [0,1)");
  positive(beta, "beta");
  positive(tau, "tau");
  if (K == 0) throw ConfigError("K must be positive");
  if (feature_channels == 0) throw ConfigError("feature_channels must be positive");
}

double TrainConfig::lr_factor(std::size_t epoch) const {
  const std::size_t stage = epoch == 0 ? 0 : (epoch - 1) / lr_decay_epochs;
  return std::pow(lr_decay, static_cast<double>(stage));
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr_backbone"] = lr_backbone;
  j["lr_heads"] = lr_heads;
  j["lr_decay"] = lr_decay;
  j["lr_decay_epochs"] = lr_decay_epochs;
  j["sgd_momentum"] = sgd_momentum;
  j["weight_decay"] = weight_decay;
  j["alpha1"] = alpha1;
  j["alpha2"] = alpha2;
  j["gamma"] = gamma;
  j["nu"] = nu;
  j["beta"] = beta;
  j["tau"] = tau;
  j["K"] = K;
  if (memory_capacity == 0) {
    j["memory_capacity"] = "all";
  } else {
    j["memory_capacity"] = memory_capacity;
  }
  j["seed"] = seed;
  j["rsc_on"] = rsc_on;
  j["rsa_on"] = rsa_on;
  j["mixup_on"] = mixup_on;
  j["feature_channels"] = feature_channels;
  j["hflip"] = hflip;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (value.is_object() || value.is_array()) throw ConfigError("config key '" + key + "' must be a scalar");
  }
  TrainConfig c;
  read_count(j, "batch_size", c.batch_size);
  read_count(j, "epochs", c.epochs);
  read(j, "lr_backbone", c.lr_backbone);
  read(j, "lr_heads", c.lr_heads);
  read(j, "lr_decay", c.lr_decay);
  read_count(j, "lr_decay_epochs", c.lr_decay_epochs);
  read(j, "sgd_momentum", c.sgd_momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "alpha1", c.alpha1);
  read(j, "alpha2", c.alpha2);
  read(j, "gamma", c.gamma);
  read(j, "nu", c.nu);
  read(j, "beta", c.beta);
  read(j, "tau", c.tau);
  read_count(j, "K", c.K);
  if (j.contains("memory_capacity")) {
    const auto& v = j.at("memory_capacity");
    if (v.is_string() && v.get<std::string>() == "all") {
      c.memory_capacity = 0;
    } else {
      read_count(j, "memory_capacity", c.memory_capacity);
    }
  }
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    c.seed = v.get<std::uint64_t>();
  }
  read(j, "rsc_on", c.rsc_on);
  read(j, "rsa_on", c.rsa_on);
  read(j, "mixup_on", c.mixup_on);
  read_count(j, "feature_channels", c.feature_channels);
  read(j, "hflip", c.hflip);
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string TrainConfig::fingerprint() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rca
