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

#include "ddkit/calib_server.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "httplib.h"

#include "ddkit/dataset.hpp"
#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/random.hpp"

namespace ddkit::calib {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kCacheCap = 64;
constexpr std::size_t kDefaultLimit = 50;
constexpr std::size_t kMaxLimit = 1000;

HttpResponse json_response(int status, const json& body) {
    HttpResponse r;
    r.status = status;
    r.body = body.dump();
    return r;
}

HttpResponse error_response(int status, const std::string& msg) { return json_response(status, {{"error", msg}}); }

std::string hex_id(std::string_view key) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
    return buf;
}

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::optional<std::size_t> parse_size(const std::string& s) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

bool is_valid_slug(std::string_view name) {
    if (name.empty() || name.size() > 64) return false;
    auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
    if (!alnum(name.front())) return false;
    return std::all_of(name.begin(), name.end(), [&](char c) { return alnum(c) || c == '-' || c == '_'; });
}

PresetStore::PresetStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path PresetStore::path_for(std::string_view name) const {
    if (!is_valid_slug(name)) throw ValidationError("invalid preset name '" + std::string(name) + "'");
    return dir_ / (std::string(name) + ".json");
}

std::vector<std::string> PresetStore::list() const {
    std::vector<std::string> out;
    std::error_code ec;
    for (fs::directory_iterator it(dir_, ec), end; !ec && it != end; it.increment(ec)) {
        const auto& p = it->path();
        if (p.extension() == ".json" && is_valid_slug(p.stem().string()) && it->is_regular_file()) {
            out.push_back(p.stem().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<skin::SkinThresholds> PresetStore::load(std::string_view name) const {
    const auto p = path_for(name);
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return std::nullopt;
    return skin::load_thresholds(p);
}

void PresetStore::save(std::string_view name, const skin::SkinThresholds& t) {
    const auto p = path_for(name);
    t.validate();
    std::lock_guard lock(write_mu_);
    fs::create_directories(dir_);
    skin::save_thresholds(p, t);
}

std::vector<ImageEntry> scan_images(const fs::path& root, const std::optional<fs::path>& manifest) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError("images root not found: " + root.string());
    std::vector<ImageEntry> out;
    if (manifest) {
        const auto m = data::load_manifest(*manifest);
        const std::vector<fs::path> roots{root};
        for (const auto& s : m.samples) {
            fs::path p;
            try {
                p = data::resolve_image(s, roots);
            } catch (const IoError&) {
                continue;
            }
            const auto rel = fs::relative(p, root).generic_string();
            out.push_back({hex_id(rel), rel, data::class_name(s.label), p});
        }
    } else {
        for (fs::recursive_directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
            if (!it->is_regular_file() || !is_image_file(it->path())) continue;
            const auto rel = fs::relative(it->path(), root).generic_string();
            const auto parent = it->path().parent_path().filename().string();
            const auto cls = data::class_label(parent) >= 0 ? parent : std::string();
            out.push_back({hex_id(rel), rel, cls, it->path()});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename < b.filename; });
    out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id == b.id; }),
              out.end());
    return out;
}

PreviewMode preview_mode_from(std::string_view s) {
    if (s == "segmented") return PreviewMode::kSegmented;
    if (s == "mask") return PreviewMode::kMask;
    if (s == "original") return PreviewMode::kOriginal;
    throw ValidationError("mode must be segmented, mask or original");
}

ImageBuffer fit_long_side(const ImageBuffer& img, int long_side) {
    const int longest = std::max(img.width(), img.height());
    if (longest <= long_side) return img;
    const double s = static_cast<double>(long_side) / longest;
    const int w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
    return resize_bilinear(img, w, h);
}

Preview render_preview(const ImageBuffer& img, const skin::SkinThresholds& t, PreviewMode mode) {
    Preview out;
    if (mode == PreviewMode::kOriginal) {
        out.png = encode_png(img);
        out.skin_fraction = 1.0;
        return out;
    }
    const auto mask = skin::compute_skin_mask(img, t);
    out.skin_fraction = static_cast<double>(mask.count()) / static_cast<double>(mask.bits().size());
    if (mode == PreviewMode::kMask) {
        std::vector<std::uint8_t> gray(mask.bits().begin(), mask.bits().end());
        for (auto& v : gray) v = v ? 255 : 0;
        out.png = encode_png_gray(mask.width(), mask.height(), gray);
    } else {
        out.png = encode_png(skin::apply_mask(img, mask));
    }
    return out;
}

CalibService::CalibService(ServerConfig config) : config_(std::move(config)), presets_(config_.preset_dir) {}

const std::vector<ImageEntry>* CalibService::entries() {
    std::error_code ec;
    if (!fs::is_directory(config_.images_root, ec)) return nullptr;
    std::lock_guard lock(mu_);
    if (!entries_) entries_ = scan_images(config_.images_root, config_.manifest);
    return &*entries_;
}

std::shared_ptr<const ImageBuffer> CalibService::preview_source(const ImageEntry& e) {
    {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(e.id); it != cache_.end()) return it->second;
    }
    auto img = std::make_shared<const ImageBuffer>(fit_long_side(read_image(e.path), config_.preview_long_side));
    std::lock_guard lock(mu_);
    if (cache_.size() >= kCacheCap) cache_.erase(cache_.begin());
    cache_.emplace(e.id, img);
    return img;
}

HttpResponse CalibService::list_images(std::size_t offset, std::size_t limit, const std::string& cls) {
    const auto* all = entries();
    if (!all) return error_response(404, "images root not found");
    if (!cls.empty() && data::class_label(cls) < 0) return error_response(400, "class must be c0..c9");
    limit = std::min(limit, kMaxLimit);
    json items = json::array();
    std::size_t total = 0;
    for (const auto& e : *all) {
        if (!cls.empty() && e.cls != cls) continue;
        if (total >= offset && items.size() < limit) {
            items.push_back({{"id", e.id}, {"filename", e.filename}, {"class", e.cls}});
        }
        ++total;
    }
    return json_response(200, {{"total", total}, {"offset", offset}, {"limit", limit}, {"items", items}});
}

HttpResponse CalibService::preview(const std::string& id, const std::optional<std::string>& thresholds_json,
                                   const std::string& mode_name) {
    const auto* all = entries();
    if (!all) return error_response(404, "images root not found");
    const auto it = std::find_if(all->begin(), all->end(), [&](const auto& e) { return e.id == id; });
    if (it == all->end()) return error_response(404, "unknown image id '" + id + "'");

    PreviewMode mode;
    skin::SkinThresholds t = skin::SkinThresholds::full_range();
    try {
        mode = preview_mode_from(mode_name.empty() ? "segmented" : mode_name);
        if (mode != PreviewMode::kOriginal) {
            if (!thresholds_json) return error_response(400, "missing thresholds parameter 't'");
            t = skin::SkinThresholds::from_json(json::parse(*thresholds_json));
        }
    } catch (const std::exception& e) {
        return error_response(400, e.what());
    }

    try {
        const auto img = preview_source(*it);
        auto p = render_preview(*img, t, mode);
        HttpResponse r;
        r.content_type = "image/png";
        r.body.assign(p.png.begin(), p.png.end());
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", p.skin_fraction);
        r.headers["X-Skin-Fraction"] = buf;
        return r;
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

HttpResponse CalibService::list_presets() const { return json_response(200, {{"presets", presets_.list()}}); }

HttpResponse CalibService::get_preset(const std::string& name) const {
    if (!is_valid_slug(name)) return error_response(400, "invalid preset name");
    try {
        const auto t = presets_.load(name);
        if (!t) return error_response(404, "unknown preset '" + name + "'");
        return json_response(200, t->to_json());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

HttpResponse CalibService::put_preset(const std::string& name, const std::string& body) {
    if (!is_valid_slug(name)) return error_response(400, "invalid preset name");
    skin::SkinThresholds t;
    try {
        t = skin::SkinThresholds::from_json(json::parse(body));
    } catch (const std::exception& e) {
        return error_response(400, e.what());
    }
    try {
        presets_.save(name, t);
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
    return json_response(200, t.to_json());
}

HttpResponse CalibService::schema() const {
    json spaces = json::object();
    const std::pair<skin::ColorSpace, const char*> names[] = {
        {skin::ColorSpace::kRgb, "rgb"}, {skin::ColorSpace::kHsv, "hsv"},
        {skin::ColorSpace::kYCbCr, "ycbcr"}, {skin::ColorSpace::kNormRgb, "nrgb"}};
    for (auto [s, name] : names) {
        json chans = json::array();
        for (const auto& d : skin::SkinThresholds::domain(s)) chans.push_back({d.min, d.max});
        spaces[name] = {{"domain", chans}, {"hue_wraps", s == skin::ColorSpace::kHsv}};
    }
    return json_response(200, {{"spaces", spaces},
                               {"default", skin::SkinThresholds::defaults().to_json()},
                               {"preview_long_side", config_.preview_long_side}});
}

struct CalibServer::Impl {
    explicit Impl(ServerConfig cfg) : service(std::move(cfg)) {}

    CalibService service;
    httplib::Server http;
    int port = -1;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
}

}  // namespace

CalibServer::CalibServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    auto& http = impl_->http;
    auto& svc = impl_->service;

    http.Get("/api/images", [&svc](const httplib::Request& req, httplib::Response& res) {
        std::size_t offset = 0, limit = kDefaultLimit;
        for (auto [key, dst] : {std::pair{"offset", &offset}, {"limit", &limit}}) {
            if (!req.has_param(key)) continue;
            const auto v = parse_size(req.get_param_value(key));
            if (!v) return send(res, error_response(400, std::string(key) + " must be a non-negative integer"));
            *dst = *v;
        }
        send(res, svc.list_images(offset, limit, req.get_param_value("class")));
    });
    http.Get("/api/preview", [&svc](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> t;
        if (req.has_param("t")) t = req.get_param_value("t");
        send(res, svc.preview(req.get_param_value("id"), t, req.get_param_value("mode")));
    });
    http.Get("/api/presets", [&svc](const httplib::Request&, httplib::Response& res) {
        send(res, svc.list_presets());
    });
    http.Get(R"(/api/presets/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_preset(req.matches[1]));
    });
    http.Put(R"(/api/presets/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.put_preset(req.matches[1], req.body));
    });
    http.Get("/api/schema", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.schema()); });

    const auto& cfg = svc.config();
    std::error_code ec;
    if (cfg.static_dir && fs::is_directory(*cfg.static_dir, ec)) {
        http.set_mount_point("/", cfg.static_dir->string());
    } else {
        http.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(
                "<!doctype html><title>ddkit calibration</title>"
                "<p>No UI bundle configured. API: /api/images, /api/preview, /api/presets, /api/schema.</p>",
                "text/html");
        });
    }
}

CalibServer::~CalibServer() { stop(); }

int CalibServer::bind() {
    const auto& cfg = impl_->service.config();
    if (cfg.port == 0) {
        impl_->port = impl_->http.bind_to_any_port(cfg.host);
    } else {
        impl_->port = impl_->http.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1;
    }
    if (impl_->port < 0) {
        throw IoError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    }
    return impl_->port;
}

void CalibServer::run() { impl_->http.listen_after_bind(); }

void CalibServer::stop() {
    if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

CalibService& CalibServer::service() { return impl_->service; }

}  // namespace ddkit::calib
