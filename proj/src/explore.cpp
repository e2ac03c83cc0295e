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

#include <cmath>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "blab/cli.hpp"

namespace blab::cli {

namespace {

constexpr const char* kHelp =
    "commands: enc <text> | dec | add <name> <alpha> | interp <text> <steps> | reset | quit";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double l2(const Tensor& t) {
  double s = 0.0;
  for (double x : t.values()) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void explore(const Autobot& model, const std::map<std::string, SteeringVector>& vectors, std::istream& in,
             std::ostream& out) {
  std::optional<Tensor> z;
  const auto show = [&] { out << "  " << decode_vector(model, *z) << "\n"; };
  const auto need_z = [&] {
    if (!z) out << "  no current vector; use enc <text>\n";
    return z.has_value();
  };
  out << std::fixed << std::setprecision(6);

  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    out << "> " << line << "\n";
    std::istringstream words(line);
    std::string cmd;
    words >> cmd;
    std::string rest;
    std::getline(words, rest);
    rest = trim(rest);

    try {
      if (cmd == "quit") {
        break;
      } else if (cmd == "enc") {
        z = sentence_vector(model, rest);
        out << "  norm " << l2(*z) << "\n";
        show();
      } else if (cmd == "dec") {
        if (need_z()) show();
      } else if (cmd == "add") {
        std::istringstream args(rest);
        std::string name;
        double alpha = 0.0;
        if (!(args >> name >> alpha)) {
          out << "  usage: add <name> <alpha>\n";
          continue;
        }
        auto it = vectors.find(name);
        if (it == vectors.end()) {
          out << "  unknown vector '" << name << "'\n";
          continue;
        }
        if (!need_z()) continue;
        z = shift(*z, it->second.v, alpha);
        out << "  norm " << l2(*z) << "\n";
        show();
      } else if (cmd == "interp") {
        const auto cut = rest.find_last_of(' ');
        std::size_t steps = 0;
        if (cut != std::string::npos) {
          std::istringstream n(rest.substr(cut + 1));
          if (!(n >> steps) || !n.eof()) steps = 0;
        }
        if (steps < 2) {
          out << "  usage: interp <text> <steps>, steps >= 2\n";
          continue;
        }
        if (!need_z()) continue;
        const Tensor target = sentence_vector(model, trim(rest.substr(0, cut)));
        const auto texts = interpolate_vectors(model, *z, target, steps);
        for (std::size_t i = 0; i < texts.size(); ++i) {
          const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
          out << "  " << std::setprecision(2) << t << std::setprecision(6) << " " << texts[i] << "\n";
        }
      } else if (cmd == "reset") {
        z.reset();
        out << "  cleared\n";
      } else {
        out << "  " << kHelp << "\n";
      }
    } catch (const std::exception& ex) {
      out << "  error: " << ex.what() << "\n";
    }
  }
}

}  // namespace blab::cli
