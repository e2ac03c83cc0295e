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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blab/graph.hpp"

namespace blab {

/// Scalar-valued function of graph inputs. Must be deterministic.
using GradFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() against central differences, always in f64. The
/// per-coordinate error is |a - c| / max(1e-8, |a| + |c|).
GradCheckResult grad_check(const GradFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5);

/// One named case of the gradient suite.
struct GradCase {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

/// Runs every primitive and composed block (bottleneck, gated cross
/// attention, encoder layer, decoder layer) for `seeds` seeds.
std::vector<GradCase> run_gradient_suite(int seeds, double tolerance = 1e-4);

}  // namespace blab
