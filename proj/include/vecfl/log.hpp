// Copyright 2026 The vecfl Authors. All rights reserved.
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

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace vecfl::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kOff = 3 };

// VECFL_LOG = debug | info | warn | off (default info).
inline Level threshold() {
  static const Level lvl = [] {
    const char* e = std::getenv("VECFL_LOG");
    if (!e) return Level::kInfo;
    if (!std::strcmp(e, "debug")) return Level::kDebug;
    if (!std::strcmp(e, "warn")) return Level::kWarn;
    if (!std::strcmp(e, "off")) return Level::kOff;
    return Level::kInfo;
  }();
  return lvl;
}

inline void write(Level l, const std::string& msg) {
  if (l < threshold()) return;
  static const char* tags[] = {"debug", "info", "warn"};
  std::fprintf(stderr, "[vecfl %s] %s\n", tags[static_cast<int>(l)], msg.c_str());
}

inline void debug(const std::string& m) { write(Level::kDebug, m); }
inline void info(const std::string& m) { write(Level::kInfo, m); }
inline void warn(const std::string& m) { write(Level::kWarn, m); }

}  // namespace vecfl::log
