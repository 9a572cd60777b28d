// Copyright 2026 The ctcs-nmpc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace ctcs_nmpc {

// Library logger. Verbosity comes from CTCS_NMPC_LOG (debug | info | warn |
// error | off); the default is warn.
inline std::shared_ptr<spdlog::logger> Log() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto lg = spdlog::get("ctcs_nmpc");
    if (!lg) lg = spdlog::stderr_color_mt("ctcs_nmpc");
    lg->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    const char* env = std::getenv("CTCS_NMPC_LOG");
    lg->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return lg;
  }();
  return logger;
}

}  // namespace ctcs_nmpc
