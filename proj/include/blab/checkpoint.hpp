/*
 * Copyright 2026 The bottleneck-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "blab/model.hpp"

// Binary model file:
//   8 bytes   "ABOT0001"
//   8 bytes   header length, unsigned little-endian
//   header    UTF-8 JSON {format_version, config, vocab, tensor_index}
//   data      little-endian float32 tensors; offsets are relative to here
namespace blab {

enum class CheckpointErrorKind {
  io,
  bad_magic,
  truncated,
  bad_header,
  length_mismatch,
  out_of_bounds,
  overlap,
  missing_tensor,
  unexpected_tensor,
};

const char* checkpoint_error_name(CheckpointErrorKind kind);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& detail);
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr std::string_view kCheckpointMagic = "ABOT0001";
inline constexpr int kCheckpointFormatVersion = 1;

std::string serialize_checkpoint(const Autobot& model);
Autobot parse_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const Autobot& model, const std::filesystem::path& path);
Autobot load_checkpoint(const std::filesystem::path& path);

}  // namespace blab
