// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "scs/channel.hpp"
#include "scs/common.hpp"
#include "scs/config.hpp"
#include "scs/config_io.hpp"
#include "scs/pilots.hpp"
#include "scs/recovery.hpp"
#include "scs/simulate.hpp"
#include "scs/theory.hpp"

namespace scs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scs
