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

#include <iosfwd>
#include <map>
#include <string>

#include "blab/generation.hpp"

namespace blab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `blab` tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

/// Line-oriented latent-space session over `model`:
///   enc <text> | dec | add <name> <alpha> | interp <text> <steps> | reset | quit
void explore(const Autobot& model, const std::map<std::string, SteeringVector>& vectors, std::istream& in,
             std::ostream& out);

}  // namespace blab::cli
