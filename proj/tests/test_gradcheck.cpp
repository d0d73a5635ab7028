// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "geowarp/errors.hpp"
#include "geowarp/gradcheck.hpp"

using namespace geowarp;

TEST_SUITE("gradcheck") {
  TEST_CASE("every op passes by default") {
    const GradcheckReport r = run_gradcheck({});
    CHECK(r.passed);
    REQUIRE(r.ops.size() == gradcheck_op_names().size());
    for (const auto& op : r.ops) {
      CHECK(op.passed);
      CHECK(op.trials.size() == 20);
      CHECK(op.max_rel_error < 1e-4);
      for (const auto& t : op.trials) CHECK(t.coordinates > 0);
    }
  }

  TEST_CASE("corrupted gradients are caught") {
    GradcheckOptions o;
    o.corrupt = true;
    o.trials = 3;
    const GradcheckReport r = run_gradcheck(o);
    CHECK_FALSE(r.passed);
    for (const auto& op : r.ops) CHECK_FALSE(op.passed);
  }

  TEST_CASE("op selection, determinism and the per-trial table") {
    GradcheckOptions o;
    o.ops = {"inverse_warp"};
    o.trials = 100;
    const GradcheckReport a = run_gradcheck(o);
    const GradcheckReport b = run_gradcheck(o);
    REQUIRE(a.ops.size() == 1);
    CHECK(a.ops[0].op == "inverse_warp");
    CHECK(a.ops[0].trials.size() == 100);
    CHECK(a.ops[0].max_rel_error == b.ops[0].max_rel_error);
    const std::string text = a.to_text(true);
    CHECK(text.find("inverse_warp") != std::string::npos);
    CHECK(text.size() > a.to_text(false).size());
  }

  TEST_CASE("bad options") {
    GradcheckOptions o;
    o.ops = {"no_such_op"};
    CHECK_THROWS_AS(run_gradcheck(o), InvalidSpecError);
    GradcheckOptions t;
    t.trials = 0;
    CHECK_THROWS_AS(run_gradcheck(t), InvalidSpecError);
  }
}
