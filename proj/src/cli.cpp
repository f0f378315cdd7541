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

#include "ddkit/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "ddkit/calib_server.hpp"
#include "ddkit/dataset.hpp"
#include "ddkit/error.hpp"
#include "ddkit/eval.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/random.hpp"

#ifndef DDKIT_DEFAULT_CASCADE
#define DDKIT_DEFAULT_CASCADE ""
#endif
#ifndef DDKIT_DEFAULT_PRESET
#define DDKIT_DEFAULT_PRESET ""
#endif
#ifndef DDKIT_VERSION
#define DDKIT_VERSION "0.0.0"
#endif

namespace ddkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    for (auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; })) {
            throw ParseError(where + ": unknown key '" + k + "'");
        }
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() || base.empty() ? p : base / p; }

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

face::Fallback fallback_from(std::string_view s) {
    if (s == "skip") return face::Fallback::kSkip;
    if (s == "fixed_region") return face::Fallback::kFixedRegion;
    throw ValidationError("fallback must be 'skip' or 'fixed_region'");
}

json detect_params_to_json(const haar::DetectParams& p) {
    json j = {{"scale_factor", p.scale_factor}, {"min_neighbors", p.min_neighbors}, {"min_size", p.min_size},
              {"max_size", p.max_size},         {"group_eps", p.group_eps},
              {"pyramid", p.pyramid == haar::Pyramid::kImage ? "image" : "features"}};
    if (p.roi) j["roi"] = {p.roi->x, p.roi->y, p.roi->w, p.roi->h};
    return j;
}

haar::DetectParams detect_params_from_json(const json& j) {
    reject_unknown(j, {"scale_factor", "min_neighbors", "min_size", "max_size", "group_eps", "pyramid", "roi"},
                   "detect");
    haar::DetectParams p;
    p.scale_factor = j.value("scale_factor", p.scale_factor);
    p.min_neighbors = j.value("min_neighbors", p.min_neighbors);
    p.min_size = j.value("min_size", p.min_size);
    p.max_size = j.value("max_size", p.max_size);
    p.group_eps = j.value("group_eps", p.group_eps);
    const auto pyr = j.value("pyramid", std::string("image"));
    if (pyr == "image") p.pyramid = haar::Pyramid::kImage;
    else if (pyr == "features") p.pyramid = haar::Pyramid::kFeatures;
    else throw ValidationError("detect.pyramid must be 'image' or 'features'");
    if (j.contains("roi")) {
        const auto r = j.at("roi").get<std::array<int, 4>>();
        p.roi = Rect{r[0], r[1], r[2], r[3]};
    }
    p.validate();
    return p;
}

json policy_to_json(const face::FaceRegionPolicy& p) {
    const auto& r = p.fixed_region;
    return {{"width_factor", p.width_factor},
            {"up_factor", p.up_factor},
            {"down_factor", p.down_factor},
            {"fallback", p.fallback == face::Fallback::kSkip ? "skip" : "fixed_region"},
            {"fixed_region", {r.x0, r.y0, r.x1, r.y1}}};
}

face::FaceRegionPolicy policy_from_json(const json& j) {
    reject_unknown(j, {"width_factor", "up_factor", "down_factor", "fallback", "fixed_region"}, "face_policy");
    face::FaceRegionPolicy p;
    p.width_factor = j.value("width_factor", p.width_factor);
    p.up_factor = j.value("up_factor", p.up_factor);
    p.down_factor = j.value("down_factor", p.down_factor);
    if (j.contains("fallback")) p.fallback = fallback_from(j.at("fallback").get<std::string>());
    if (j.contains("fixed_region")) {
        const auto r = j.at("fixed_region").get<std::array<double, 4>>();
        p.fixed_region = {r[0], r[1], r[2], r[3]};
    }
    p.validate();
    return p;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    reject_unknown(j,
                   {"images_root", "out", "seed", "workers", "test_drivers", "plan", "cascade", "detect",
                    "face_policy", "sigma", "thresholds"},
                   "config");
    RunConfig c;
    try {
        if (j.contains("images_root")) {
            const auto& r = j.at("images_root");
            if (r.is_string()) c.image_roots.push_back(resolve(r.get<std::string>(), base_dir));
            else for (const auto& s : r) c.image_roots.push_back(resolve(s.get<std::string>(), base_dir));
        }
        if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>(), base_dir);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        c.test_drivers = j.value("test_drivers", c.test_drivers);
        if (j.contains("plan")) {
            const auto& p = j.at("plan");
            c.plan = p.is_string() ? augment::load_plan(resolve(p.get<std::string>(), base_dir))
                                   : augment::AugmentPlan::from_json(p);
            // an explicit top-level seed wins over the plan's
            if (!j.contains("seed")) c.seed = c.plan.seed;
        }
        if (j.contains("cascade")) c.cascade = resolve(j.at("cascade").get<std::string>(), base_dir);
        if (j.contains("detect")) c.detect = detect_params_from_json(j.at("detect"));
        if (j.contains("face_policy")) c.policy = policy_from_json(j.at("face_policy"));
        if (j.contains("sigma")) {
            const auto& s = j.at("sigma");
            reject_unknown(s, {"mode", "value"}, "sigma");
            const auto mode = s.value("mode", std::string("relative"));
            if (mode != "relative" && mode != "fixed") throw ValidationError("sigma.mode must be relative or fixed");
            c.sigma.mode = mode == "fixed" ? face::SigmaRule::Mode::kFixed : face::SigmaRule::Mode::kRelative;
            c.sigma.value = s.value("value", c.sigma.value);
            if (!(c.sigma.value > 0)) throw ValidationError("sigma.value must be positive");
        }
        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            if (t.is_string()) c.thresholds_path = resolve(t.get<std::string>(), base_dir);
            else c.thresholds = skin::SkinThresholds::from_json(t);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    c.plan.seed = c.seed;
    return c;
}

json RunConfig::to_json() const {
    json roots = json::array();
    for (const auto& r : image_roots) roots.push_back(r.string());
    json j = {{"images_root", roots},
              {"seed", seed},
              {"workers", workers},
              {"test_drivers", test_drivers},
              {"plan", plan.to_json()},
              {"detect", detect_params_to_json(detect)},
              {"face_policy", policy_to_json(policy)},
              {"sigma", {{"mode", sigma.mode == face::SigmaRule::Mode::kFixed ? "fixed" : "relative"},
                         {"value", sigma.value}}}};
    if (out) j["out"] = out->string();
    if (cascade) j["cascade"] = cascade->string();
    if (thresholds) j["thresholds"] = thresholds->to_json();
    else if (thresholds_path) j["thresholds"] = thresholds_path->string();
    return j;
}

RunConfig load_run_config(const fs::path& path) {
    return RunConfig::from_json(read_json_file(path), path.parent_path());
}

std::string hash_file(const fs::path& path) {
    const auto bytes = read_file(path);
    return "fnv1a64:" + hex64(fnv1a64(bytes));
}

namespace {

// Values collected from the command line before they are merged into RunConfig.
struct Flags {
    std::string config;
    std::uint64_t seed = 42;
    std::string out;
    unsigned workers = 0;
    std::vector<std::string> images;
    std::string summary;
    bool resume = false;
    std::string plan;
    std::string cascade;
    std::string thresholds;
    std::string fallback;
    int test_drivers = 5;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* plan_opt = nullptr;
    CLI::Option* cascade_opt = nullptr;
    CLI::Option* thresholds_opt = nullptr;
    CLI::Option* fallback_opt = nullptr;
    CLI::Option* test_drivers_opt = nullptr;
};

// Accumulates the machine-readable run summary.
struct Summary {
    std::string command;
    json inputs = json::object();
    json outputs = json::object();
    json counts = json::object();

    void input(const fs::path& p) { inputs[p.string()] = hash_file(p); }
    std::string command_file() const {
        auto s = command;
        std::replace(s.begin(), s.end(), ' ', '-');
        return s;
    }
};

class Runner {
public:
    Runner(std::vector<std::string> args, std::ostream& out, std::ostream& err)
        : args_(std::move(args)), out_(out), err_(err) {}

    int main();

private:
    void build(CLI::App& app);
    void add_classical(CLI::App* parent);
    void add_offline(CLI::App* parent, data::Provenance kind);
    void add_ensemble(CLI::App* parent);

    RunConfig config() const;
    fs::path out_dir(const RunConfig& c) const;
    std::vector<fs::path> roots_for(const RunConfig& c, const fs::path& manifest) const;
    data::DatasetManifest read_manifest(const fs::path& p);
    augment::OfflineConfig offline_config(const RunConfig& c, bool need_cascade, bool need_thresholds) const;
    int finish_generation(const RunConfig& c, const augment::GenerationResult& r, const fs::path& manifest_out);
    void write_summary(const RunConfig& c, int code);

    int cmd_stats();
    int cmd_split();
    int cmd_eval();
    int cmd_detect();
    int cmd_serve();

    std::vector<std::string> args_;
    std::ostream& out_;
    std::ostream& err_;
    Flags f_;
    Summary summary_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
    std::function<int()> action_;

    // subcommand operands
    std::string manifest_;
    std::vector<std::string> manifests_;
    std::string preset_name_;
    std::string truth_, preds_;
    std::vector<std::string> detect_images_;
    bool stats_json_ = false;
    double flag_threshold_ = 0.15;
    std::string serve_images_, serve_manifest_, serve_presets_, serve_static_, serve_host_ = "127.0.0.1";
    int serve_port_ = calib::kDefaultPort;
    int heatmap_cell_ = 32;
};

RunConfig Runner::config() const {
    RunConfig c;
    if (!f_.config.empty()) c = load_run_config(f_.config);
    if (f_.seed_opt->count()) c.seed = f_.seed;
    if (f_.out_opt->count()) c.out = fs::path(f_.out);
    if (f_.workers_opt->count()) c.workers = f_.workers;
    for (const auto& r : f_.images) c.image_roots.insert(c.image_roots.begin(), fs::path(r));
    if (f_.plan_opt->count()) c.plan = augment::load_plan(f_.plan);
    if (f_.cascade_opt->count()) c.cascade = fs::path(f_.cascade);
    if (f_.thresholds_opt->count()) {
        c.thresholds_path = fs::path(f_.thresholds);
        c.thresholds.reset();
    }
    if (f_.fallback_opt->count()) c.policy.fallback = fallback_from(f_.fallback);
    if (f_.test_drivers_opt->count()) c.test_drivers = f_.test_drivers;
    // --plan carries its own seed; --seed and the config seed still win over it
    if (f_.plan_opt->count() && !f_.seed_opt->count() && f_.config.empty()) c.seed = c.plan.seed;
    c.plan.seed = c.seed;
    c.plan.validate();
    return c;
}

fs::path Runner::out_dir(const RunConfig& c) const {
    if (!c.out) throw ValidationError("--out is required");
    return *c.out;
}

std::vector<fs::path> Runner::roots_for(const RunConfig& c, const fs::path& manifest) const {
    auto roots = c.image_roots;
    roots.push_back(manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path());
    return roots;
}

data::DatasetManifest Runner::read_manifest(const fs::path& p) {
    auto m = data::load_manifest(p);
    summary_.input(p);
    return m;
}

augment::OfflineConfig Runner::offline_config(const RunConfig& c, bool need_cascade, bool need_thresholds) const {
    augment::OfflineConfig oc;
    oc.detect = c.detect;
    oc.policy = c.policy;
    oc.sigma = c.sigma;
    if (need_cascade) {
        const fs::path path = c.cascade ? *c.cascade : fs::path(DDKIT_DEFAULT_CASCADE);
        if (path.empty()) throw ValidationError("--cascade is required");
        oc.cascade = haar::load_cascade(path);
    }
    if (need_thresholds) {
        if (c.thresholds) {
            oc.thresholds = *c.thresholds;
        } else {
            const fs::path path = c.thresholds_path ? *c.thresholds_path : fs::path(DDKIT_DEFAULT_PRESET);
            if (path.empty()) throw ValidationError("--thresholds is required");
            oc.thresholds = skin::load_thresholds(path);
        }
        oc.thresholds.validate();
    }
    return oc;
}

int Runner::finish_generation(const RunConfig& c, const augment::GenerationResult& r, const fs::path& manifest_out) {
    data::save_manifest(manifest_out, r.manifest);
    summary_.outputs["manifest"] = manifest_out.string();
    summary_.outputs["manifest_hash"] = hash_file(manifest_out);
    summary_.counts = r.report.to_json();
    summary_.counts["entries"] = r.manifest.size();
    for (const auto& [file, msg] : r.report.errors) err_ << "failed: " << file << ": " << msg << "\n";
    out_ << "wrote " << r.manifest.size() << " entries to " << manifest_out.string() << " (" << r.report.written
         << " images written, " << r.report.reused << " reused, " << r.report.skipped << " skipped, "
         << r.report.failed << " failed)\n";
    const int code = r.report.failed > 0 ? kExitPartial : kExitOk;
    write_summary(c, code);
    return code;
}

void Runner::write_summary(const RunConfig& c, int code) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"schema_version", kSummarySchemaVersion},
              {"tool", std::string("ddkit ") + DDKIT_VERSION},
              {"command", summary_.command},
              {"args", std::vector<std::string>(args_.begin() + (args_.empty() ? 0 : 1), args_.end())},
              {"seed", c.seed},
              {"config", c.to_json()},
              {"inputs", summary_.inputs},
              {"outputs", summary_.outputs},
              {"counts", summary_.counts},
              {"wall_time_s", wall},
              {"exit_code", code}};
    fs::path path;
    if (!f_.summary.empty()) path = f_.summary;
    else if (c.out) path = *c.out / (summary_.command_file() + "_summary.json");
    else return;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text(path, j.dump(2) + "\n");
}

int Runner::cmd_stats() {
    summary_.command = "stats";
    const auto c = config();
    const auto m = read_manifest(manifest_);
    const auto st = data::class_stats(m);
    json classes = json::array();
    for (int k = 0; k < data::kNumClasses; ++k) {
        const double signed_dev = st.median > 0 ? (static_cast<double>(st.counts[k]) - st.median) / st.median : 0.0;
        classes.push_back({{"class", data::class_name(k)},
                           {"description", data::kClassDescriptions[k]},
                           {"count", st.counts[k]},
                           {"deviation", signed_dev},
                           {"flagged", std::abs(signed_dev) > flag_threshold_}});
    }
    json j = {{"total", m.size()},
              {"subjects", m.subjects().size()},
              {"median", st.median},
              {"flag_threshold", flag_threshold_},
              {"classes", classes}};
    if (stats_json_) {
        out_ << j.dump(2) << "\n";
    } else {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-6s %-30s %8s %10s\n", "class", "description", "count", "vs median");
        out_ << buf;
        for (const auto& row : classes) {
            std::snprintf(buf, sizeof buf, "%-6s %-30s %8zu %+9.1f%%%s\n",
                          row["class"].get<std::string>().c_str(), row["description"].get<std::string>().c_str(),
                          row["count"].get<std::size_t>(), 100.0 * row["deviation"].get<double>(),
                          row["flagged"].get<bool>() ? "  *" : "");
            out_ << buf;
        }
        std::snprintf(buf, sizeof buf, "total %zu images, %zu subjects, median %.1f per class\n", m.size(),
                      m.subjects().size(), st.median);
        out_ << buf;
    }
    summary_.counts = j;
    write_summary(c, kExitOk);
    return kExitOk;
}

int Runner::cmd_split() {
    summary_.command = "split";
    const auto c = config();
    const auto dir = out_dir(c);
    const auto m = read_manifest(manifest_);
    const auto s = data::split_by_driver(m, c.test_drivers, c.seed);
    fs::create_directories(dir);
    data::save_manifest(dir / "train.csv", s.train);
    data::save_manifest(dir / "test.csv", s.test);
    summary_.outputs = {{"train", (dir / "train.csv").string()},
                        {"test", (dir / "test.csv").string()},
                        {"train_hash", hash_file(dir / "train.csv")},
                        {"test_hash", hash_file(dir / "test.csv")}};
    summary_.counts = {{"train", s.train.size()}, {"test", s.test.size()}, {"test_subjects", s.test_subjects}};
    out_ << "train " << s.train.size() << ", test " << s.test.size() << " (test drivers:";
    for (const auto& t : s.test_subjects) out_ << " " << t;
    out_ << ")\n";
    write_summary(c, kExitOk);
    return kExitOk;
}

void Runner::add_classical(CLI::App* parent) {
    auto* sub = parent->add_subcommand("classical", "Rotated and color-jittered copies of every sample (3N)");
    sub->fallthrough();
    sub->add_option("manifest", manifest_, "Input manifest CSV")->required()->check(CLI::ExistingFile);
    sub->final_callback([this] {
        action_ = [this] {
            summary_.command = "augment classical";
            const auto c = config();
            const auto dir = out_dir(c);
            const auto m = read_manifest(manifest_);
            augment::RunOptions opts{roots_for(c, manifest_), dir, c.workers, f_.resume};
            const auto r = augment::classical_augment(m, c.plan, opts);
            return finish_generation(c, r, dir / "classical.csv");
        };
    });

    auto* pre = parent->add_subcommand("preset", "Named recipe: classical, paper-full or all-sets");
    pre->fallthrough();
    pre->add_option("name", preset_name_, "Recipe name")->required()->check(
        CLI::IsMember({"classical", "paper-full", "all-sets"}));
    pre->add_option("manifest", manifest_, "Input manifest CSV")->required()->check(CLI::ExistingFile);
    pre->final_callback([this] {
        action_ = [this] {
            summary_.command = "augment preset";
            const auto c = config();
            const auto dir = out_dir(c);
            const auto preset = augment::preset_from(preset_name_);
            const auto m = read_manifest(manifest_);
            const bool offline = preset != augment::Preset::kClassical;
            const auto oc = offline_config(c, offline, offline);
            augment::RunOptions opts{roots_for(c, manifest_), dir, c.workers, f_.resume};
            const auto r = augment::run_preset(m, preset, c.plan, oc, opts);
            return finish_generation(c, r, dir / (preset_name_ + ".csv"));
        };
    });
}

void Runner::add_offline(CLI::App* parent, data::Provenance kind) {
    const bool blur = kind == data::Provenance::kBlurred;
    auto* sub = parent->add_subcommand(blur ? "blur" : "skinseg",
                                       blur ? "Face-blurred copy of every sample" : "Skin-segmented copy of every sample");
    sub->fallthrough();
    sub->add_option("manifest", manifest_, "Input manifest CSV")->required()->check(CLI::ExistingFile);
    sub->final_callback([this, kind, blur] {
        action_ = [this, kind, blur] {
            summary_.command = blur ? "augment blur" : "augment skinseg";
            const auto c = config();
            const auto dir = out_dir(c);
            const auto m = read_manifest(manifest_);
            const auto oc = offline_config(c, blur, !blur);
            if (blur) summary_.input(c.cascade ? *c.cascade : fs::path(DDKIT_DEFAULT_CASCADE));
            else if (!c.thresholds) summary_.input(c.thresholds_path ? *c.thresholds_path : fs::path(DDKIT_DEFAULT_PRESET));
            augment::RunOptions opts{roots_for(c, manifest_), dir, c.workers, f_.resume};
            const auto r = augment::generate_offline(m, kind, oc, opts);
            return finish_generation(c, r, dir / (std::string(data::to_string(kind)) + ".csv"));
        };
    });
}

void Runner::add_ensemble(CLI::App* parent) {
    auto* sub = parent->add_subcommand("ensemble", "Concatenate manifests and shuffle");
    sub->fallthrough();
    sub->add_option("manifests", manifests_, "Manifest CSVs")->required()->check(CLI::ExistingFile);
    sub->final_callback([this] {
        action_ = [this] {
            summary_.command = "augment ensemble";
            const auto c = config();
            const auto dir = out_dir(c);
            std::vector<data::DatasetManifest> ms;
            for (const auto& p : manifests_) ms.push_back(read_manifest(p));
            augment::GenerationResult r;
            r.manifest = augment::ensemble(ms, c.seed);
            fs::create_directories(dir);
            return finish_generation(c, r, dir / "ensemble.csv");
        };
    });
}

int Runner::cmd_eval() {
    summary_.command = "eval";
    const auto c = config();
    const auto truth = read_manifest(truth_);
    const auto preds = eval::load_predictions(preds_);
    summary_.input(preds_);
    const auto report = eval::evaluate(truth, preds);
    const auto table = eval::format_table(report);
    out_ << table;
    if (c.out) {
        const auto& dir = *c.out;
        fs::create_directories(dir);
        write_text(dir / "report.json", report.to_json().dump(2) + "\n");
        write_text(dir / "report.txt", table);
        write_text(dir / "confusion.csv", eval::format_confusion_csv(report.confusion));
        for (auto mode : {eval::NormMode::kByTrueRow, eval::NormMode::kByPredictedColumn}) {
            const auto& mat = mode == eval::NormMode::kByTrueRow ? report.by_true_row : report.by_predicted_column;
            const auto stem = "confusion_" + std::string(eval::to_string(mode));
            write_text(dir / (stem + ".csv"), eval::format_matrix_csv(mat));
            const auto png = eval::render_heatmap(mat, heatmap_cell_);
            write_file_atomic(dir / (stem + ".png"), png);
        }
        summary_.outputs = {{"report", (dir / "report.json").string()}};
    }
    summary_.counts = {{"samples", report.confusion.total()},
                       {"accuracy", report.metrics.accuracy},
                       {"macro_f1", report.metrics.macro.f1}};
    write_summary(c, kExitOk);
    return kExitOk;
}

int Runner::cmd_detect() {
    summary_.command = "detect";
    const auto c = config();
    const fs::path path = c.cascade ? *c.cascade : fs::path(DDKIT_DEFAULT_CASCADE);
    if (path.empty()) throw ValidationError("--cascade is required");
    const auto model = haar::load_cascade(path);
    json all = json::array();
    for (const auto& p : detect_images_) {
        const auto img = read_image(p);
        const auto found = haar::detect(img, model, c.detect);
        json dets = json::array();
        for (const auto& d : found) {
            dets.push_back({{"box", {d.box.x, d.box.y, d.box.w, d.box.h}}, {"neighbors", d.neighbor_count}});
        }
        const auto primary = face::select_primary_eye(found);
        json entry = {{"image", p}, {"detections", dets}};
        if (primary) entry["primary"] = {primary->box.x, primary->box.y, primary->box.w, primary->box.h};
        all.push_back(entry);
    }
    out_ << all.dump(2) << "\n";
    return kExitOk;
}

int Runner::cmd_serve() {
    const auto c = config();
    calib::ServerConfig sc;
    sc.images_root = serve_images_.empty() ? (c.image_roots.empty() ? fs::path(".") : c.image_roots.front())
                                           : fs::path(serve_images_);
    if (!serve_manifest_.empty()) sc.manifest = fs::path(serve_manifest_);
    sc.preset_dir = serve_presets_.empty() ? fs::path("presets") : fs::path(serve_presets_);
    if (!serve_static_.empty()) sc.static_dir = fs::path(serve_static_);
    sc.host = serve_host_;
    sc.port = serve_port_;
    calib::CalibServer server(sc);
    const int port = server.bind();
    out_ << "serving on http://" << sc.host << ":" << port << "/ (images " << sc.images_root.string()
         << ", presets " << sc.preset_dir.string() << ")" << std::endl;
    server.run();
    return kExitOk;
}

void Runner::build(CLI::App& app) {
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string("ddkit ") + DDKIT_VERSION);
    app.add_option("--config", f_.config, "Run config JSON; flags override its values")->check(CLI::ExistingFile);
    f_.seed_opt = app.add_option("--seed", f_.seed, "Random seed")->capture_default_str();
    f_.out_opt = app.add_option("--out", f_.out, "Output directory");
    f_.workers_opt = app.add_option("--workers", f_.workers, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--images", f_.images, "Directory searched for source images (repeatable)");
    app.add_option("--summary", f_.summary, "Run summary path (default <out>/<command>_summary.json)");
    app.add_flag("--resume", f_.resume, "Keep derived images that already exist");
    f_.plan_opt = app.add_option("--plan", f_.plan, "Augmentation plan JSON")->check(CLI::ExistingFile);
    f_.cascade_opt = app.add_option("--cascade", f_.cascade, "Haar cascade XML")->check(CLI::ExistingFile);
    f_.thresholds_opt =
        app.add_option("--thresholds", f_.thresholds, "Skin threshold preset JSON")->check(CLI::ExistingFile);
    f_.fallback_opt = app.add_option("--fallback", f_.fallback, "Blur fallback when no eye is found")
                          ->check(CLI::IsMember({"skip", "fixed_region"}));

    auto* stats = app.add_subcommand("stats", "Per-class counts and deviation from the median");
    stats->fallthrough();
    stats->add_option("manifest", manifest_, "Manifest CSV")->required()->check(CLI::ExistingFile);
    stats->add_flag("--json", stats_json_, "Print JSON instead of a table");
    stats->add_option("--flag-threshold", flag_threshold_, "Relative deviation that gets flagged")
        ->capture_default_str();
    stats->final_callback([this] { action_ = [this] { return cmd_stats(); }; });

    auto* split = app.add_subcommand("split", "Driver-disjoint train/test split");
    split->fallthrough();
    split->add_option("manifest", manifest_, "Manifest CSV")->required()->check(CLI::ExistingFile);
    f_.test_drivers_opt =
        split->add_option("--test-drivers", f_.test_drivers, "Subjects moved to the test side")->capture_default_str();
    split->final_callback([this] { action_ = [this] { return cmd_split(); }; });

    auto* aug = app.add_subcommand("augment", "Generate augmented image sets");
    aug->fallthrough();
    aug->require_subcommand(1);
    add_classical(aug);
    add_offline(aug, data::Provenance::kBlurred);
    add_offline(aug, data::Provenance::kSkinseg);
    add_ensemble(aug);
    add_offline(&app, data::Provenance::kBlurred);
    add_offline(&app, data::Provenance::kSkinseg);
    add_ensemble(&app);

    auto* ev = app.add_subcommand("eval", "Score predictions against a truth manifest");
    ev->fallthrough();
    ev->add_option("--truth", truth_, "Truth manifest CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--preds", preds_, "Predictions CSV (img,pred[,p0..p9])")->required()->check(CLI::ExistingFile);
    ev->add_option("--heatmap-cell", heatmap_cell_, "Heatmap cell size in pixels")->capture_default_str();
    ev->final_callback([this] { action_ = [this] { return cmd_eval(); }; });

    auto* det = app.add_subcommand("detect", "Run the eye detector and print boxes as JSON");
    det->fallthrough();
    det->add_option("images", detect_images_, "Image files")->required()->check(CLI::ExistingFile);
    det->final_callback([this] { action_ = [this] { return cmd_detect(); }; });

    auto* serve = app.add_subcommand("serve", "Threshold calibration server");
    serve->fallthrough();
    serve->add_option("--root", serve_images_, "Images root (default: first --images)");
    serve->add_option("--manifest", serve_manifest_, "Restrict the listing to a manifest");
    serve->add_option("--presets", serve_presets_, "Preset directory")->capture_default_str();
    serve->add_option("--static", serve_static_, "UI bundle directory served at /");
    serve->add_option("--host", serve_host_, "Bind address")->capture_default_str();
    serve->add_option("--port", serve_port_, "Port")->capture_default_str();
    serve->final_callback([this] { action_ = [this] { return cmd_serve(); }; });
}

int Runner::main() {
    CLI::App app{"ddkit: distracted-driver dataset, augmentation and evaluation tools", "ddkit"};
    build(app);
    try {
        std::vector<std::string> rev(args_.rbegin(), args_.rend() - (args_.empty() ? 0 : 1));
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out_ << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out_ << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        out_ << app.version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err_ << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        return action_ ? action_() : kExitConfig;
    } catch (const Error& e) {
        err_ << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err_ << "error: " << e.what() << "\n";
        return kExitPartial;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    return Runner(args, out, err).main();
}

}  // namespace ddkit::cli
