// Copyright 2026 The PB-DSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PBDSR_CLI_HPP_
#define PBDSR_CLI_HPP_

#include <string>
#include <vector>

namespace pbdsr {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitInternal = 4;

// Entry point behind the `pbdsr` binary. args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace pbdsr

#endif  // PBDSR_CLI_HPP_
