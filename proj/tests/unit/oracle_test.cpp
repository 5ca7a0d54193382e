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

// Checks of the test oracles themselves against values frozen from an
// external LP solver.

#include <gtest/gtest.h>

#include "oracles/enumeration.hpp"
#include "oracles/lp_transport.hpp"

namespace {

using V = std::vector<double>;

struct Frozen {
  V p;
  V q;
  double ordinal;
  double nominal;
};

TEST(LpOracle, MatchesFrozenSolverValues) {
  const std::vector<Frozen> cases = {
      {{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}, 0.4, 0.4},
      {{1, 0, 0, 0}, {0, 0, 0, 1}, 3.0, 1.0},
      {{0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.25, 0.25}, 0.5, 0.2},
      {{0.5, 0.5}, {0.9, 0.1}, 0.4, 0.4},
      {{0.05, 0.15, 0.3, 0.2, 0.2, 0.1}, {0.3, 0.1, 0.1, 0.2, 0.25, 0.05}, 0.5, 0.3},
  };
  for (const auto& c : cases) {
    EXPECT_NEAR(oracle::transport_w1(c.p, c.q, true), c.ordinal, 1e-12);
    EXPECT_NEAR(oracle::transport_w1(c.p, c.q, false), c.nominal, 1e-12);
  }
}

TEST(LpOracle, SolvesSmallLp) {
  // min -x - y  s.t. x + y + s = 4, x + 3y + t = 6  ->  x = 4, y = 0.
  const auto r = oracle::solve_lp({{1, 1, 1, 0}, {1, 3, 0, 1}}, {4, 6}, {-1, -1, 0, 0});
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.objective, -4.0, 1e-12);
  const auto infeasible = oracle::solve_lp({{1, 1}}, {-1}, {1, 1});
  EXPECT_FALSE(infeasible.feasible);
}

TEST(EnumerationOracle, IndependentJointHasZeroOffDiagonal) {
  oracle::Joint j{{2, 3}, {}};
  const V a{0.3, 0.7};
  const V b{0.2, 0.5, 0.3};
  for (double x : a) {
    for (double y : b) j.p.push_back(x * y);
  }
  EXPECT_NEAR(oracle::sensitivity(j, 0, 1, {1.0 / 3, 1.0 / 3, 1.0 / 3}, true), 0.0, 1e-12);
  // Diagonal: forcing every gender gives the uniform mixture, w_bar 0.
  EXPECT_NEAR(oracle::sensitivity(j, 0, 0, {0.5, 0.5}, false), 0.4, 1e-12);
}

}  // namespace
