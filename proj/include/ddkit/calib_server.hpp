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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddkit/image.hpp"
#include "ddkit/skin.hpp"

namespace ddkit::calib {

inline constexpr int kDefaultPort = 8077;
inline constexpr int kPreviewLongSide = 512;

/// Lowercase letters, digits, '-' and '_', starting alphanumeric, at most 64 chars.
bool is_valid_slug(std::string_view name);

/// Named threshold presets, one `<name>.json` per preset in a single directory.
class PresetStore {
public:
    explicit PresetStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::vector<std::string> list() const;
    /// nullopt when the preset does not exist. Throws on invalid names or files.
    std::optional<skin::SkinThresholds> load(std::string_view name) const;
    /// Validates, then writes through a temp file and rename.
    void save(std::string_view name, const skin::SkinThresholds& t);

private:
    std::filesystem::path path_for(std::string_view name) const;

    std::filesystem::path dir_;
    std::mutex write_mu_;
};

struct ImageEntry {
    std::string id;        // stable hash of the relative path
    std::string filename;  // path relative to the images root
    std::string cls;       // c0..c9, or empty when unknown
    std::filesystem::path path;
};

/// With a manifest: its samples resolved under `root` (unresolvable ones are
/// dropped). Without: every PNG/JPEG below `root`, class taken from a cN
/// parent directory. Sorted by filename. Throws IoError when `root` is missing.
std::vector<ImageEntry> scan_images(const std::filesystem::path& root,
                                    const std::optional<std::filesystem::path>& manifest);

enum class PreviewMode { kSegmented, kMask, kOriginal };
/// Throws ValidationError for anything but segmented, mask, original.
PreviewMode preview_mode_from(std::string_view s);

/// Downscales so the long side is at most `long_side`; smaller images are copied.
ImageBuffer fit_long_side(const ImageBuffer& img, int long_side);

struct Preview {
    std::vector<std::uint8_t> png;
    double skin_fraction = 0;  // share of mask pixels kept; 1 for original
};

/// Pure function of its arguments, so equal requests give equal bytes.
Preview render_preview(const ImageBuffer& img, const skin::SkinThresholds& t, PreviewMode mode);

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

struct ServerConfig {
    std::filesystem::path images_root;
    std::optional<std::filesystem::path> manifest;
    std::filesystem::path preset_dir = "presets";
    std::optional<std::filesystem::path> static_dir;  // UI bundle served at "/"
    std::string host = "127.0.0.1";
    int port = kDefaultPort;
    int preview_long_side = kPreviewLongSide;
};

/// Request handling without the socket layer. Thread-safe.
class CalibService {
public:
    explicit CalibService(ServerConfig config);

    HttpResponse list_images(std::size_t offset, std::size_t limit, const std::string& cls);
    HttpResponse preview(const std::string& id, const std::optional<std::string>& thresholds_json,
                         const std::string& mode);
    HttpResponse list_presets() const;
    HttpResponse get_preset(const std::string& name) const;
    HttpResponse put_preset(const std::string& name, const std::string& body);
    /// Channel domains and the default preset, for building controls.
    HttpResponse schema() const;

    const ServerConfig& config() const { return config_; }

private:
    const std::vector<ImageEntry>* entries();
    std::shared_ptr<const ImageBuffer> preview_source(const ImageEntry& e);

    ServerConfig config_;
    PresetStore presets_;
    std::mutex mu_;
    std::optional<std::vector<ImageEntry>> entries_;
    std::map<std::string, std::shared_ptr<const ImageBuffer>> cache_;
};

/// HTTP front end for CalibService.
class CalibServer {
public:
    explicit CalibServer(ServerConfig config);
    ~CalibServer();
    CalibServer(const CalibServer&) = delete;
    CalibServer& operator=(const CalibServer&) = delete;

    /// Binds config.port (0 picks a free port); returns the bound port. Throws IoError on failure.
    int bind();
    /// Blocks serving requests until stop(). Call bind() first.
    void run();
    void stop();
    CalibService& service();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ddkit::calib
