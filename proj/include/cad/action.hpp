// Copyright 2026 The CAD Authors
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

#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace cad {

/// The four recovery actions the selector chooses between.
enum class Action : std::size_t {
  kCosamp = 0,     // a1
  kL1Sparse = 1,   // a2: radius tau * eta'
  kL1Energy = 2,   // a3: radius eta
  kL1Dense = 3,    // a4: radius sqrt(N) * eta''
};

inline constexpr std::size_t kActionCount = 4;

inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::kCosamp, Action::kL1Sparse, Action::kL1Energy, Action::kL1Dense};

constexpr std::size_t index_of(Action a) { return static_cast<std::size_t>(a); }

/// "a1" .. "a4".
constexpr std::string_view action_name(Action a) {
  constexpr std::array<std::string_view, kActionCount> names = {"a1", "a2", "a3", "a4"};
  return names[index_of(a)];
}

}  // namespace cad
