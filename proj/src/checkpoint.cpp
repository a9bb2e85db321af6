#include "rca/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "rca/binary_io.hpp"
#include "rca/trainer.hpp"

namespace rca {

namespace {

std::size_t bank_capacity(const TrainConfig& c) {
  return c.memory_capacity == 0 ? MemoryBank::kUnbounded : c.memory_capacity;
}

MemoryBank empty_bank(const TrainConfig& c, std::size_t num_classes) {
  return MemoryBank(num_classes, c.feature_channels, c.gamma, c.nu, bank_capacity(c));
}

void write_tensor(ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

Tensor read_tensor(ByteReader& r, const Shape& expected) {
  const auto rank = r.u32("tensor rank");
  if (rank != expected.size()) throw DecodeError("checkpoint: tensor rank mismatch");
  Shape shape(rank);
  for (auto& e : shape) e = r.u32("tensor extent");
  if (shape != expected) {
    throw DecodeError("checkpoint: tensor shape " + shape_str(shape) + ", expected " + shape_str(expected));
  }
  std::vector<double> v(shape_numel(shape));
  r.need(v.size() * 4, "tensor values");
  for (auto& x : v) x = r.f32("tensor values");
  return Tensor::from(shape, std::move(v), true);
}

}  // namespace

Checkpoint Checkpoint::from_trainer(const Trainer& trainer) {
  return Checkpoint{trainer.config(), trainer.params().clone(), trainer.prototypes(), trainer.bank()};
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes("RCAK");
  w.u32(kCheckpointVersion);

  const std::string conf = ckpt.config.to_json().dump();
  w.bytes("CONF");
  w.u32(static_cast<std::uint32_t>(conf.size()));
  w.bytes(conf);

  const auto tensors = ckpt.params.all_tensors();
  w.bytes("PARM");
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) write_tensor(w, t);

  w.bytes("PROT");
  w.u8(ckpt.prototypes ? 1 : 0);
  if (ckpt.prototypes) {
    const auto& p = *ckpt.prototypes;
    w.u32(static_cast<std::uint32_t>(p.num_classes));
    w.u32(static_cast<std::uint32_t>(p.k));
    w.u32(static_cast<std::uint32_t>(p.dim));
    w.i32(p.epoch);
    for (auto s : p.status) w.u8(static_cast<std::uint8_t>(s));
    for (double v : p.values) w.f32(static_cast<float>(v));
  }

  const auto& bank = ckpt.bank;
  w.bytes("MEMB");
  w.u32(static_cast<std::uint32_t>(bank.num_classes()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  for (std::size_t l = 0; l < bank.num_classes(); ++l) {
    const auto& slots = bank.class_slots(l);
    w.u32(static_cast<std::uint32_t>(slots.size()));
    for (const auto& [id, vec] : slots) {
      w.u32(static_cast<std::uint32_t>(id));
      for (double v : vec) w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect("RCAK", "checkpoint header");
  const auto version = r.u32("checkpoint version");
  if (version != kCheckpointVersion) throw DecodeError("checkpoint: unsupported version " + std::to_string(version));

  r.expect("CONF", "config section");
  const auto n = r.u32("config length");
  r.need(n, "config body");
  std::string conf(n, '\0');
  for (auto& c : conf) c = static_cast<char>(r.u8("config body"));
  TrainConfig config;
  try {
    config = TrainConfig::from_json(nlohmann::json::parse(conf));
  } catch (const std::exception& e) {
    throw DecodeError(std::string("checkpoint: bad config: ") + e.what());
  }

  r.expect("PARM", "parameter section");
  if (r.u32("tensor count") != 4) throw DecodeError("checkpoint: expected 4 parameter tensors");
  const std::size_t D = config.feature_channels;
  ModelParams params;
  params.backbone.conv1 = read_tensor(r, {kConv1Channels, 3, 3, 3});
  params.backbone.conv2 = read_tensor(r, {D, kConv1Channels, 3, 3});
  {
    // The class count is read from the head's leading extent.
    ByteReader peek = r;
    peek.u32("tensor rank");
    const std::size_t classes = peek.u32("tensor extent");
    if (classes == 0) throw DecodeError("checkpoint: zero classes");
    params.head_p.weight = read_tensor(r, {classes, D});
    params.head_o.weight = read_tensor(r, {classes, 2 * D});
  }
  const std::size_t classes = params.num_classes();

  r.expect("PROT", "prototype section");
  std::optional<PrototypeSet> protos;
  const auto present = r.u8("prototype flag");
  if (present > 1) throw DecodeError("checkpoint: bad prototype flag");
  if (present) {
    PrototypeSet p;
    p.num_classes = r.u32("prototype classes");
    p.k = r.u32("prototype k");
    p.dim = r.u32("prototype dim");
    p.epoch = r.i32("prototype epoch");
    if (p.num_classes != classes || p.dim != D || p.k == 0) throw DecodeError("checkpoint: prototype shape mismatch");
    p.status.resize(p.num_classes);
    for (auto& s : p.status) {
      const auto raw = r.u8("prototype status");
      if (raw > 2) throw DecodeError("checkpoint: bad prototype status");
      s = static_cast<PrototypeStatus>(raw);
    }
    p.values.resize(p.num_classes * p.k * p.dim);
    r.need(p.values.size() * 4, "prototype values");
    for (auto& v : p.values) v = r.f32("prototype values");
    protos = std::move(p);
  }

  r.expect("MEMB", "memory section");
  if (r.u32("memory classes") != classes || r.u32("memory dim") != D) {
    throw DecodeError("checkpoint: memory shape mismatch");
  }
  MemoryBank bank = empty_bank(config, classes);
  for (std::size_t l = 0; l < classes; ++l) {
    const auto count = r.u32("slot count");
    for (std::uint32_t s = 0; s < count; ++s) {
      const auto id = r.u32("slot image id");
      std::vector<double> vec(D);
      r.need(D * 4, "slot values");
      for (auto& v : vec) v = r.f32("slot values");
      bank.restore_slot(l, id, std::move(vec));
    }
  }
  if (!r.at_end()) throw DecodeError("checkpoint: trailing bytes");
  return Checkpoint{std::move(config), std::move(params), std::move(protos), std::move(bank)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

void write_prototypes_csv(const std::filesystem::path& path, const PrototypeSet& protos) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "class,k,dim,value\n";
  char buf[32];
  for (std::size_t l = 0; l < protos.num_classes; ++l) {
    for (std::size_t j = 0; j < protos.k; ++j) {
      const auto p = protos.prototype(l, j);
      for (std::size_t d = 0; d < protos.dim; ++d) {
        std::snprintf(buf, sizeof buf, "%.9g", p[d]);
        out << l << ',' << j << ',' << d << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace rca
