/* Copyright 2026 The biasmatrix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Test oracle: intersectional sensitivity of one axis pair by direct
// enumeration of a joint table, with every distance solved as a transport
// LP. Independent of the library's world, prompt and metric code.

#ifndef BIASMATRIX_TESTS_ORACLES_ENUMERATION_HPP_
#define BIASMATRIX_TESTS_ORACLES_ENUMERATION_HPP_

#include <algorithm>
#include <cstddef>
#include <vector>

#include "lp_transport.hpp"

namespace oracle {

struct Joint {
  std::vector<std::size_t> sizes;  // categories per axis, last axis fastest
  std::vector<double> p;

  std::vector<std::size_t> decode(std::size_t cell) const {
    std::vector<std::size_t> out(sizes.size());
    for (std::size_t i = sizes.size(); i-- > 0;) {
      out[i] = cell % sizes[i];
      cell /= sizes[i];
    }
    return out;
  }
};

// Distribution of axis y given axis x = cx (x < 0: unconditioned).
inline std::vector<double> conditional(const Joint& joint, int x, std::size_t cx,
                                       std::size_t y) {
  std::vector<double> out(joint.sizes[y], 0.0);
  double mass = 0.0;
  for (std::size_t cell = 0; cell < joint.p.size(); ++cell) {
    const auto cats = joint.decode(cell);
    if (x >= 0 && cats[static_cast<std::size_t>(x)] != cx) continue;
    out[cats[y]] += joint.p[cell];
    mass += joint.p[cell];
  }
  for (double& v : out) v /= mass;
  return out;
}

// Normalized deviation from `ideal`, w_max found by trying every point mass.
inline double normalized_deviation(const std::vector<double>& d, const std::vector<double>& ideal,
                                   bool ordinal) {
  double w_max = 0.0;
  for (std::size_t c = 0; c < ideal.size(); ++c) {
    std::vector<double> delta(ideal.size(), 0.0);
    delta[c] = 1.0;
    w_max = std::max(w_max, transport_w1(delta, ideal, ordinal));
  }
  if (w_max == 0.0) return 0.0;
  return std::min(1.0, transport_w1(d, ideal, ordinal) / w_max);
}

// IS of intervening on x, measured on y, for an unmodified base prompt whose
// counterfactual modifier is honored with probability `compliance`.
inline double sensitivity(const Joint& joint, std::size_t x, std::size_t y,
                          const std::vector<double>& ideal, bool ordinal,
                          double compliance = 1.0) {
  const auto base = conditional(joint, -1, 0, y);
  std::vector<double> intervened(joint.sizes[y], 0.0);
  for (std::size_t c = 0; c < joint.sizes[x]; ++c) {
    const auto cond = conditional(joint, static_cast<int>(x), c, y);
    for (std::size_t k = 0; k < intervened.size(); ++k) {
      intervened[k] += (compliance * cond[k] + (1.0 - compliance) * base[k]) /
                       static_cast<double>(joint.sizes[x]);
    }
  }
  return normalized_deviation(base, ideal, ordinal) -
         normalized_deviation(intervened, ideal, ordinal);
}

}  // namespace oracle

#endif  // BIASMATRIX_TESTS_ORACLES_ENUMERATION_HPP_
