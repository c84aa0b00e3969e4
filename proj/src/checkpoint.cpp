#include "ecgcl/checkpoint.hpp"

#include <stdexcept>

#include "ecgcl/io.hpp"

namespace ecgcl {

namespace {

constexpr std::string_view kTensorMagic = "ECGTNS01";
constexpr std::string_view kOptimPrefix = "optim.";

}  // namespace

std::string encode_tensors(const StateDict& tensors) {
  io::ByteWriter w;
  w.str(kTensorMagic);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.f32({t.data(), static_cast<std::size_t>(t.size())});
  }
  return w.take();
}

StateDict decode_tensors(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kTensorMagic);
  const auto count = r.u32();
  StateDict out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u32());
    const auto rows = r.u32();
    const auto cols = r.u32();
    Mat<float> t(rows, cols);
    r.f32({t.data(), static_cast<std::size_t>(t.size())});
    if (!out.emplace(name, std::move(t)).second) throw std::runtime_error("duplicate tensor '" + name + "'");
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after tensor container");
  return out;
}

std::string state_hash(const StateDict& tensors) { return io::content_hash(encode_tensors(tensors)); }

std::string Checkpoint::tensor_bytes() const {
  StateDict all = model;
  for (const auto& [name, t] : optimizer) all[std::string(kOptimPrefix) + name] = t;
  return encode_tensors(all);
}

std::string Checkpoint::content_hash() const { return io::content_hash(tensor_bytes()); }

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  for (const auto& [name, t] : ckpt.model) {
    if (name.starts_with(kOptimPrefix)) throw std::invalid_argument("model tensor name clashes with optimizer prefix: " + name);
  }
  const std::string bytes = ckpt.tensor_bytes();
  nlohmann::json manifest = ckpt.manifest;
  manifest["content_hash"] = io::content_hash(bytes);
  io::write_file(dir / "tensors.bin", bytes);
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_regular_file(dir / "manifest.json") || !std::filesystem::is_regular_file(dir / "tensors.bin"))
    throw std::runtime_error("not a checkpoint directory: " + dir.string());
  const std::string bytes = io::read_file(dir / "tensors.bin");
  Checkpoint ckpt;
  ckpt.manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  const std::string recorded = ckpt.manifest.value("content_hash", "");
  if (recorded != io::content_hash(bytes))
    throw std::runtime_error("checkpoint content hash mismatch in " + dir.string());
  for (auto& [name, t] : decode_tensors(bytes)) {
    if (name.starts_with(kOptimPrefix)) {
      ckpt.optimizer.emplace(name.substr(kOptimPrefix.size()), std::move(t));
    } else {
      ckpt.model.emplace(name, std::move(t));
    }
  }
  return ckpt;
}

}  // namespace ecgcl
