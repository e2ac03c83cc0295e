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

#include "blab/optim.hpp"

#include <cmath>
#include <string>

namespace blab {

void AdamState::step(std::span<Param* const> params, double lr, Precision precision) {
  if (lr < 0.0) throw NumericError("adam_step: negative learning rate");
  if (t_ == 0) {
    m_.clear();
    v_.clear();
    for (const Param* p : params) {
      m_.push_back(Tensor::zeros_like(p->value));
      v_.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (params.size() != m_.size()) {
    throw NumericError("adam_step: state tracks " + std::to_string(m_.size()) + " parameters, got " +
                       std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = *params[i];
    if (p.grad.shape() != p.value.shape() || m_[i].shape() != p.value.shape()) {
      throw NumericError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": value " +
                         shape_string(p.value.shape()) + ", grad " + shape_string(p.grad.shape()) +
                         ", moments " + shape_string(m_[i].shape()));
    }
  }

  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto value = p.value.values();
    auto grad = p.grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] = round_to(precision, value[j] - lr * m_hat / (std::sqrt(v_hat) + eps_));
    }
    if (!p.value.all_finite()) throw NumericError("adam_step: parameter became non-finite");
  }
}

void LrSchedule::validate() const {
  if (warmup_steps == 0 || warmup_steps > total_steps) {
    throw std::invalid_argument("lr schedule needs 0 < warmup_steps <= total_steps (got " +
                                std::to_string(warmup_steps) + ", " + std::to_string(total_steps) +
                                ")");
  }
  if (!(peak_lr >= 0.0)) throw std::invalid_argument("lr schedule needs peak_lr >= 0");
}

double lr_at(const LrSchedule& schedule, std::uint64_t step) {
  schedule.validate();
  if (step >= schedule.total_steps) return 0.0;
  const double s = static_cast<double>(step);
  if (step <= schedule.warmup_steps) {
    return schedule.peak_lr * s / static_cast<double>(schedule.warmup_steps);
  }
  const double remaining = static_cast<double>(schedule.total_steps - step);
  const double span = static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  return schedule.peak_lr * remaining / span;
}

double clip_grad_norm(std::span<Param* const> params, double max_norm) {
  if (max_norm < 0.0) throw NumericError("clip_grad_norm: max_norm must be >= 0");
  double sq = 0.0;
  for (const Param* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (Param* p : params) {
      for (double& g : p->grad.values()) g *= k;
    }
  }
  return norm;
}

}  // namespace blab
