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

#include <cstdint>
#include <span>
#include <vector>

#include "blab/graph.hpp"

namespace blab {

/// Bias-corrected Adam. Moments are allocated on the first step and are
/// matched to parameters by position, so callers must pass the same
/// parameter list in the same order on every step.
class AdamState {
 public:
  AdamState(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Applies one update using each parameter's accumulated grad. Values are
  /// rounded to `precision` after the update.
  void step(std::span<Param* const> params, double lr, Precision precision = Precision::f32);

  std::uint64_t t() const { return t_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm
/// (0 disables). Returns the norm before clipping.
double clip_grad_norm(std::span<Param* const> params, double max_norm);

/// Linear warmup from 0 to peak, then linear decay to 0 at total_steps.
struct LrSchedule {
  double peak_lr = 1e-3;
  std::uint64_t warmup_steps = 100;
  std::uint64_t total_steps = 3000;

  void validate() const;
};

/// Learning rate at `step`; steps past total_steps clamp to 0.
double lr_at(const LrSchedule& schedule, std::uint64_t step);

}  // namespace blab
