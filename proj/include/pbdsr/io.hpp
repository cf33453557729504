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

#ifndef PBDSR_IO_HPP_
#define PBDSR_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pbdsr {

// Writes to a sibling temp file and renames over `path` on success, so a
// failed write never leaves a partial output behind.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Little-endian helpers for the binary formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t value);
void put_f32(std::vector<std::uint8_t>& out, float value);
std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset);
float get_f32(const std::vector<std::uint8_t>& in, std::size_t offset);

// Shortest round-trip decimal rendering; "inf"/"nan" for non-finite values.
std::string format_double(double value);

}  // namespace pbdsr

#endif  // PBDSR_IO_HPP_
