/*
 * Copyright 2026 The ddkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ddkit/image.hpp"

namespace ddkit {

/// Decodes PNG or JPEG (sniffed from the signature) into 8-bit RGB.
/// Gray and alpha inputs are expanded / dropped. Throws IoError.
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);
ImageBuffer read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
/// Single-channel 8-bit PNG.
std::vector<std::uint8_t> encode_png_gray(int width, int height, std::span<const std::uint8_t> gray);
std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality = 95);

/// Picks the codec from the extension (.png, .jpg, .jpeg).
void write_image(const std::filesystem::path& path, const ImageBuffer& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ddkit
