#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ecgcl/model.hpp"

namespace ecgcl {

/// Serialized training state. On disk a checkpoint is a directory holding
/// tensors.bin (named float32 tensors) and manifest.json, whose
/// "content_hash" is the git-style hash of tensors.bin.
struct Checkpoint {
  StateDict model;
  StateDict optimizer;
  nlohmann::json manifest = nlohmann::json::object();

  /// Canonical tensor container bytes (model tensors, then optimizer ones
  /// under an "optim." prefix).
  std::string tensor_bytes() const;
  std::string content_hash() const;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
/// Verifies the manifest hash against the tensor file.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string encode_tensors(const StateDict& tensors);
StateDict decode_tensors(std::string_view bytes);

/// Hash of the given tensors only, e.g. the frozen classifier.
std::string state_hash(const StateDict& tensors);

}  // namespace ecgcl
