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

#include "ddkit/augment.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/parallel.hpp"
#include "ddkit/random.hpp"

namespace ddkit::augment {

namespace fs = std::filesystem;
using data::DatasetManifest;
using data::Provenance;
using data::Sample;

namespace {

enum class ItemState { kWritten, kReused, kSkipped, kFailed };

struct ItemOutcome {
    ItemState state = ItemState::kFailed;
    std::optional<face::BlurStatus> blur_status;
    std::string error;
};

// Produces the derived image, or nullopt when the input should be skipped.
using Transform = std::function<std::optional<ImageBuffer>(const ImageBuffer&, const Sample&, ItemOutcome&)>;

void prepare_out_dir(const fs::path& out_dir) {
    if (out_dir.empty()) throw ValidationError("output directory not set");
    std::error_code ec;
    for (int c = 0; c < data::kNumClasses; ++c) {
        fs::create_directories(out_dir / data::class_name(c), ec);
        if (ec) throw IoError("output directory not writable: " + (out_dir / data::class_name(c)).string());
    }
}

GenerationResult derive_set(std::span<const Sample> inputs, Provenance kind, const RunOptions& opts,
                            const Transform& transform) {
    prepare_out_dir(opts.out_dir);
    std::set<std::string> names;
    for (const auto& s : inputs) {
        if (!names.insert(data::class_name(s.label) + "/" + derived_filename(s.filename, kind)).second) {
            throw ValidationError("derived filename collision for '" + s.filename + "'");
        }
    }

    std::vector<ItemOutcome> outcomes(inputs.size());
    parallel_for(inputs.size(), opts.workers, [&](std::size_t i) {
        const auto& s = inputs[i];
        auto& out = outcomes[i];
        try {
            const auto target = opts.out_dir / data::class_name(s.label) / derived_filename(s.filename, kind);
            std::error_code ec;
            if (opts.resume && fs::is_regular_file(target, ec)) {
                out.state = ItemState::kReused;
                return;
            }
            const auto source = data::resolve_image(s, opts.image_roots);
            auto derived = transform(read_image(source), s, out);
            if (!derived) {
                out.state = ItemState::kSkipped;
                return;
            }
            write_image(target, *derived);
            out.state = ItemState::kWritten;
        } catch (const std::exception& e) {
            out.state = ItemState::kFailed;
            out.error = e.what();
        }
    });

    GenerationResult result;
    result.report.inputs = inputs.size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& o = outcomes[i];
        auto& r = result.report;
        if (o.blur_status) {
            switch (*o.blur_status) {
                case face::BlurStatus::kEyeFound: ++r.eye_found; break;
                case face::BlurStatus::kFallbackUsed: ++r.fallback_used; break;
                case face::BlurStatus::kSkipped: ++r.skipped; break;
            }
        }
        switch (o.state) {
            case ItemState::kWritten: ++r.written; break;
            case ItemState::kReused: ++r.reused; break;
            case ItemState::kSkipped:
                if (!o.blur_status) ++r.skipped;
                continue;
            case ItemState::kFailed:
                ++r.failed;
                r.errors.emplace_back(inputs[i].filename, o.error);
                continue;
        }
        Sample d = inputs[i];
        d.filename = derived_filename(inputs[i].filename, kind);
        d.provenance = kind;
        result.manifest.samples.push_back(std::move(d));
    }
    return result;
}

GenerationResult rotated_set(std::span<const Sample> inputs, const AugmentPlan& plan, const RunOptions& opts) {
    return derive_set(inputs, Provenance::kRotated, opts, [&](const ImageBuffer& img, const Sample& s, ItemOutcome&) {
        Rng rng(image_seed(plan.seed, Provenance::kRotated, s.filename));
        return std::optional(rotate(img, rng.uniform(-plan.rotation_range, plan.rotation_range)));
    });
}

GenerationResult jittered_set(std::span<const Sample> inputs, const AugmentPlan& plan, const RunOptions& opts) {
    return derive_set(inputs, Provenance::kJittered, opts, [&](const ImageBuffer& img, const Sample& s, ItemOutcome&) {
        Rng rng(image_seed(plan.seed, Provenance::kJittered, s.filename));
        return std::optional(color_jitter(img, plan.jitter, rng));
    });
}

// Appends a generated set to the running list of manifests and report.
void absorb(GenerationResult&& part, std::vector<DatasetManifest>& sets, GenerationReport& report) {
    report.merge(part.report);
    sets.push_back(std::move(part.manifest));
}

GenerationResult finish(std::vector<DatasetManifest>& sets, GenerationReport report, std::uint64_t seed) {
    GenerationResult out;
    out.manifest = ensemble(sets, seed);
    out.report = std::move(report);
    return out;
}

FactorRange range_from(const nlohmann::json& j, const char* key) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ParseError(std::string("augment plan: '") + key + "' must be [lo, hi]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; })) {
            throw ParseError(where + ": unknown key '" + k + "'");
        }
    }
}

}  // namespace

void AugmentPlan::validate() const {
    if (!(rotation_range >= 0 && rotation_range <= 180)) {
        throw ValidationError("rotation range must lie in [0, 180] degrees");
    }
    jitter.validate();
}

nlohmann::json AugmentPlan::to_json() const {
    return {
        {"seed", seed},
        {"rotation", {{"enabled", enable_rotation}, {"range_deg", rotation_range}}},
        {"jitter",
         {{"enabled", enable_jitter},
          {"brightness", {jitter.brightness.lo, jitter.brightness.hi}},
          {"contrast", {jitter.contrast.lo, jitter.contrast.hi}},
          {"saturation", {jitter.saturation.lo, jitter.saturation.hi}},
          {"hue_deg", {jitter.hue_shift_deg.lo, jitter.hue_shift_deg.hi}}}},
        {"blur_set", enable_blur_set},
        {"skinseg_set", enable_skinseg_set},
    };
}

AugmentPlan AugmentPlan::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("augment plan: expected a JSON object");
    reject_unknown(j, {"seed", "rotation", "jitter", "blur_set", "skinseg_set"}, "augment plan");
    AugmentPlan p;
    try {
        if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("rotation")) {
            const auto& r = j.at("rotation");
            reject_unknown(r, {"enabled", "range_deg"}, "augment plan rotation");
            p.enable_rotation = r.value("enabled", p.enable_rotation);
            p.rotation_range = r.value("range_deg", p.rotation_range);
        }
        if (j.contains("jitter")) {
            const auto& r = j.at("jitter");
            reject_unknown(r, {"enabled", "brightness", "contrast", "saturation", "hue_deg"}, "augment plan jitter");
            p.enable_jitter = r.value("enabled", p.enable_jitter);
            if (r.contains("brightness")) p.jitter.brightness = range_from(r.at("brightness"), "brightness");
            if (r.contains("contrast")) p.jitter.contrast = range_from(r.at("contrast"), "contrast");
            if (r.contains("saturation")) p.jitter.saturation = range_from(r.at("saturation"), "saturation");
            if (r.contains("hue_deg")) p.jitter.hue_shift_deg = range_from(r.at("hue_deg"), "hue_deg");
        }
        p.enable_blur_set = j.value("blur_set", p.enable_blur_set);
        p.enable_skinseg_set = j.value("skinseg_set", p.enable_skinseg_set);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("augment plan: ") + e.what());
    }
    p.validate();
    return p;
}

AugmentPlan load_plan(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return AugmentPlan::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void GenerationReport::merge(const GenerationReport& other) {
    inputs += other.inputs;
    written += other.written;
    reused += other.reused;
    eye_found += other.eye_found;
    fallback_used += other.fallback_used;
    skipped += other.skipped;
    failed += other.failed;
    errors.insert(errors.end(), other.errors.begin(), other.errors.end());
}

nlohmann::json GenerationReport::to_json() const {
    auto errs = nlohmann::json::array();
    for (const auto& [file, msg] : errors) errs.push_back({{"file", file}, {"error", msg}});
    return {{"inputs", inputs},       {"written", written},   {"reused", reused},
            {"eye_found", eye_found}, {"fallback_used", fallback_used},
            {"skipped", skipped},     {"failed", failed},     {"errors", errs}};
}

std::string derived_filename(const std::string& filename, Provenance p) {
    const fs::path f(filename);
    return f.stem().string() + "__" + std::string(data::to_string(p)) + f.extension().string();
}

std::uint64_t image_seed(std::uint64_t seed, Provenance p, const std::string& filename) {
    return derive_seed(seed, std::string(data::to_string(p)) + ":" + filename);
}

GenerationResult classical_augment(const DatasetManifest& m, const AugmentPlan& plan, const RunOptions& opts) {
    AugmentPlan classical = plan;
    classical.enable_blur_set = false;
    classical.enable_skinseg_set = false;
    return run_plan(m, classical, {}, opts);
}

GenerationResult generate_offline(const DatasetManifest& m, Provenance kind, const OfflineConfig& config,
                                  const RunOptions& opts) {
    if (kind == Provenance::kBlurred) {
        if (!config.cascade) throw ValidationError("blur generation needs a cascade model");
        config.policy.validate();
        config.detect.validate();
        return derive_set(m.samples, kind, opts, [&](const ImageBuffer& img, const Sample&, ItemOutcome& out) {
            auto outcome = face::blur_face(img, *config.cascade, config.policy, config.sigma, config.detect);
            out.blur_status = outcome.status;
            if (outcome.status == face::BlurStatus::kSkipped) return std::optional<ImageBuffer>();
            return std::optional(std::move(outcome.image));
        });
    }
    if (kind == Provenance::kSkinseg) {
        config.thresholds.validate();
        return derive_set(m.samples, kind, opts, [&](const ImageBuffer& img, const Sample&, ItemOutcome&) {
            return std::optional(skin::skin_segment(img, config.thresholds));
        });
    }
    throw ValidationError("offline generation supports only 'blurred' and 'skinseg'");
}

DatasetManifest ensemble(std::span<const DatasetManifest> manifests, std::uint64_t seed) {
    if (manifests.empty()) throw ValidationError("ensemble needs at least one manifest");
    DatasetManifest out;
    out.seed = seed;
    std::set<std::pair<Provenance, std::string>> seen;
    for (const auto& m : manifests) {
        for (const auto& s : m.samples) {
            if (!seen.emplace(s.provenance, s.filename).second) {
                throw ValidationError("ensemble: duplicate '" + s.filename + "' within provenance '" +
                                      std::string(data::to_string(s.provenance)) + "'");
            }
            out.samples.push_back(s);
        }
    }
    Rng rng(seed);
    shuffle(std::span(out.samples), rng);
    return out;
}

GenerationResult run_plan(const DatasetManifest& m, const AugmentPlan& plan, const OfflineConfig& config,
                          const RunOptions& opts) {
    plan.validate();
    std::vector<DatasetManifest> sets{m};
    GenerationReport report;
    if (plan.enable_rotation) absorb(rotated_set(m.samples, plan, opts), sets, report);
    if (plan.enable_jitter) absorb(jittered_set(m.samples, plan, opts), sets, report);
    if (plan.enable_blur_set) absorb(generate_offline(m, Provenance::kBlurred, config, opts), sets, report);
    if (plan.enable_skinseg_set) absorb(generate_offline(m, Provenance::kSkinseg, config, opts), sets, report);
    return finish(sets, std::move(report), plan.seed);
}

std::string_view to_string(Preset p) {
    switch (p) {
        case Preset::kClassical: return "classical";
        case Preset::kPaperFull: return "paper-full";
        case Preset::kAllSets: return "all-sets";
    }
    return "classical";
}

Preset preset_from(std::string_view name) {
    for (auto p : {Preset::kClassical, Preset::kPaperFull, Preset::kAllSets}) {
        if (to_string(p) == name) return p;
    }
    throw ValidationError("unknown preset '" + std::string(name) + "' (classical, paper-full, all-sets)");
}

GenerationResult run_preset(const DatasetManifest& m, Preset preset, const AugmentPlan& plan,
                            const OfflineConfig& config, const RunOptions& opts) {
    AugmentPlan p = plan;
    switch (preset) {
        case Preset::kClassical:
            p.enable_rotation = p.enable_jitter = true;
            p.enable_blur_set = p.enable_skinseg_set = false;
            return run_plan(m, p, config, opts);
        case Preset::kAllSets:
            p.enable_rotation = p.enable_jitter = p.enable_blur_set = p.enable_skinseg_set = true;
            return run_plan(m, p, config, opts);
        case Preset::kPaperFull: break;
    }

    p.validate();
    std::vector<std::size_t> order(m.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(p.seed, "paper-full-halves"));
    shuffle(std::span(order), rng);
    const auto half = (order.size() + 1) / 2;
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
    std::vector<Sample> rot_inputs, jit_inputs;
    for (std::size_t k = 0; k < order.size(); ++k) {
        (k < half ? rot_inputs : jit_inputs).push_back(m.samples[order[k]]);
    }

    OfflineConfig offline = config;
    offline.policy.fallback = face::Fallback::kFixedRegion;

    std::vector<DatasetManifest> sets{m};
    GenerationReport report;
    absorb(rotated_set(rot_inputs, p, opts), sets, report);
    absorb(jittered_set(jit_inputs, p, opts), sets, report);
    absorb(generate_offline(m, Provenance::kBlurred, offline, opts), sets, report);
    absorb(generate_offline(m, Provenance::kSkinseg, offline, opts), sets, report);
    return finish(sets, std::move(report), p.seed);
}

}  // namespace ddkit::augment
