// Copyright 2026 The CCL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#ifndef CCL_CCL_HPP_
#define CCL_CCL_HPP_

#include "ccl/core.hpp"
#include "ccl/math.hpp"
#include "ccl/lm.hpp"
#include "ccl/constraint.hpp"
#include "ccl/nullspace.hpp"
#include "ccl/policy.hpp"
#include "ccl/eval.hpp"
#include "ccl/data.hpp"
#include "ccl/io.hpp"

#endif  // CCL_CCL_HPP_
