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

// Python bindings. Images cross the boundary as C-contiguous uint8 arrays of
// shape (H, W, 3); JSON-shaped values (thresholds, reports) as dicts.

#include <iostream>
#include <sstream>

#include <pybind11/iostream.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"

#include "ddkit/augment.hpp"
#include "ddkit/cli.hpp"
#include "ddkit/dataset.hpp"
#include "ddkit/error.hpp"
#include "ddkit/eval.hpp"
#include "ddkit/face_blur.hpp"
#include "ddkit/haar.hpp"
#include "ddkit/image.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/skin.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace ddkit;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using Row = std::tuple<std::string, int, std::string, std::string>;  // subject, label, filename, provenance

ImageBuffer to_image(const ImageArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ValidationError("expected an (H, W, 3) uint8 array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return ImageBuffer(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

ImageArray to_array(const ImageBuffer& img) {
    ImageArray out({img.height(), img.width(), 3});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

nlohmann::json to_json(const py::handle& obj) {
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

data::DatasetManifest to_manifest(const std::vector<Row>& rows) {
    data::DatasetManifest m;
    for (const auto& [subject, label, filename, prov] : rows) {
        if (label < 0 || label >= data::kNumClasses) throw ValidationError("label out of range: " + std::to_string(label));
        m.samples.push_back({subject, label, filename, data::provenance_from(prov)});
    }
    return m;
}

std::vector<Row> to_rows(const data::DatasetManifest& m) {
    std::vector<Row> rows;
    rows.reserve(m.size());
    for (const auto& s : m.samples) rows.emplace_back(s.subject, s.label, s.filename, std::string(data::to_string(s.provenance)));
    return rows;
}

skin::SkinThresholds thresholds_from(const py::object& t) {
    if (t.is_none()) return skin::SkinThresholds::defaults();
    return skin::SkinThresholds::from_json(to_json(t));
}

std::vector<eval::Probabilities> probs_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != eval::kClasses) throw ValidationError("expected an (N, 10) probability array");
    std::vector<eval::Probabilities> out(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < out.size(); ++i) std::copy_n(a.data() + i * eval::kClasses, eval::kClasses, out[i].begin());
    return out;
}

}  // namespace

PYBIND11_MODULE(_ddkit, m) {
    m.doc() = "Dataset preparation, augmentation and evaluation for distracted-driver image classification";

    static py::exception<Error> base(m, "Error");
    static py::exception<ParseError> parse(m, "ParseError", base.ptr());
    static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
    static py::exception<IoError> io(m, "IoError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParseError& e) {
            py::set_error(parse, e.what());
        } catch (const ValidationError& e) {
            py::set_error(validation, e.what());
        } catch (const IoError& e) {
            py::set_error(io, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    // imaging
    m.def("read_image", [](const fs::path& p) { return to_array(read_image(p)); }, py::arg("path"));
    m.def("write_image", [](const fs::path& p, const ImageArray& a) { write_image(p, to_image(a)); }, py::arg("path"),
          py::arg("image"));
    m.def("gaussian_blur", [](const ImageArray& a, double sigma) { return to_array(gaussian_blur(to_image(a), sigma)); },
          py::arg("image"), py::arg("sigma"));
    m.def("rotate", [](const ImageArray& a, double deg) { return to_array(rotate(to_image(a), deg)); },
          py::arg("image"), py::arg("angle_deg"));
    m.def("rgb_to_hsv", [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const auto h = rgb_to_hsv({r, g, b});
        return std::make_tuple(h.h, h.s, h.v);
    });
    m.def("hsv_to_rgb", [](double h, double s, double v) {
        const auto p = hsv_to_rgb({h, s, v});
        return std::make_tuple(p.r, p.g, p.b);
    });

    // detection and face blur
    py::class_<haar::CascadeModel>(m, "Cascade")
        .def_readonly("window_w", &haar::CascadeModel::window_w)
        .def_readonly("window_h", &haar::CascadeModel::window_h)
        .def_property_readonly("stages", [](const haar::CascadeModel& c) { return c.stages.size(); });
    m.def("load_cascade", &haar::load_cascade, py::arg("path"));
    m.def(
        "detect",
        [](const ImageArray& a, const haar::CascadeModel& model, double scale_factor, int min_neighbors, int min_size,
           int max_size) {
            haar::DetectParams p;
            p.scale_factor = scale_factor;
            p.min_neighbors = min_neighbors;
            p.min_size = min_size;
            p.max_size = max_size;
            const auto img = to_image(a);
            std::vector<haar::Detection> found;
            {
                py::gil_scoped_release release;
                found = haar::detect(img, model, p);
            }
            std::vector<std::tuple<int, int, int, int, int>> out;
            for (const auto& d : found) out.emplace_back(d.box.x, d.box.y, d.box.w, d.box.h, d.neighbor_count);
            return out;
        },
        py::arg("image"), py::arg("cascade"), py::arg("scale_factor") = 1.1, py::arg("min_neighbors") = 3,
        py::arg("min_size") = 0, py::arg("max_size") = 0,
        "Detections as (x, y, w, h, neighbors) tuples.");
    m.def(
        "blur_face",
        [](const ImageArray& a, const haar::CascadeModel& model, const std::string& fallback, double sigma_divisor) {
            face::FaceRegionPolicy policy;
            policy.fallback = cli::fallback_from(fallback);
            face::SigmaRule rule;
            rule.value = sigma_divisor;
            const auto out = face::blur_face(to_image(a), model, policy, rule);
            py::object region = py::none();
            if (out.region) region = py::make_tuple(out.region->x, out.region->y, out.region->w, out.region->h);
            return py::make_tuple(to_array(out.image), std::string(face::to_string(out.status)), region);
        },
        py::arg("image"), py::arg("cascade"), py::arg("fallback") = "skip", py::arg("sigma_divisor") = 6.0,
        "Returns (image, status, region or None).");

    // skin segmentation
    m.def("default_thresholds", [] { return to_py(skin::SkinThresholds::defaults().to_json()); });
    m.def("load_thresholds", [](const fs::path& p) { return to_py(skin::load_thresholds(p).to_json()); },
          py::arg("path"));
    m.def(
        "skin_mask",
        [](const ImageArray& a, const py::object& t) {
            const auto mask = skin::compute_skin_mask(to_image(a), thresholds_from(t));
            py::array_t<bool> out({mask.height(), mask.width()});
            std::transform(mask.bits().begin(), mask.bits().end(), out.mutable_data(), [](auto b) { return b != 0; });
            return out;
        },
        py::arg("image"), py::arg("thresholds") = py::none());
    m.def(
        "skin_segment",
        [](const ImageArray& a, const py::object& t) { return to_array(skin::skin_segment(to_image(a), thresholds_from(t))); },
        py::arg("image"), py::arg("thresholds") = py::none());

    // dataset
    m.def("load_manifest", [](const fs::path& p) { return to_rows(data::load_manifest(p)); }, py::arg("path"),
          "Rows as (subject, label, filename, provenance).");
    m.def("save_manifest", [](const fs::path& p, const std::vector<Row>& rows) { data::save_manifest(p, to_manifest(rows)); },
          py::arg("path"), py::arg("rows"));
    m.def(
        "split_by_driver",
        [](const std::vector<Row>& rows, int n_test, std::uint64_t seed) {
            const auto s = data::split_by_driver(to_manifest(rows), n_test, seed);
            return py::make_tuple(to_rows(s.train), to_rows(s.test), s.test_subjects);
        },
        py::arg("rows"), py::arg("test_drivers") = 5, py::arg("seed") = 42,
        "Returns (train_rows, test_rows, test_subjects).");
    m.def(
        "class_stats",
        [](const std::vector<Row>& rows) {
            const auto st = data::class_stats(to_manifest(rows));
            py::dict d;
            d["counts"] = std::vector<std::size_t>(st.counts.begin(), st.counts.end());
            d["median"] = st.median;
            d["deviation"] = std::vector<double>(st.deviation.begin(), st.deviation.end());
            return d;
        },
        py::arg("rows"));

    // augmentation
    m.def(
        "augment",
        [](const std::vector<Row>& rows, const std::string& preset, const fs::path& out_dir,
           const std::vector<fs::path>& image_roots, std::uint64_t seed, unsigned workers,
           const std::optional<fs::path>& cascade, const py::object& thresholds, const py::object& plan_json) {
            auto plan = plan_json.is_none() ? augment::AugmentPlan{} : augment::AugmentPlan::from_json(to_json(plan_json));
            plan.seed = seed;
            augment::OfflineConfig oc;
            const auto p = augment::preset_from(preset);
            if (p != augment::Preset::kClassical) {
                if (!cascade) throw ValidationError("preset '" + preset + "' needs a cascade path");
                oc.cascade = haar::load_cascade(*cascade);
                oc.thresholds = thresholds_from(thresholds);
            }
            augment::RunOptions opts;
            opts.image_roots = image_roots;
            opts.out_dir = out_dir;
            opts.workers = workers;
            const auto m = to_manifest(rows);
            augment::GenerationResult r;
            {
                py::gil_scoped_release release;
                r = augment::run_preset(m, p, plan, oc, opts);
            }
            return py::make_tuple(to_rows(r.manifest), to_py(r.report.to_json()));
        },
        py::arg("rows"), py::arg("preset"), py::arg("out_dir"), py::arg("image_roots") = std::vector<fs::path>{},
        py::arg("seed") = 42, py::arg("workers") = 0, py::arg("cascade") = py::none(),
        py::arg("thresholds") = py::none(), py::arg("plan") = py::none(),
        "Runs classical, paper-full or all-sets; returns (rows, report).");
    m.def(
        "ensemble",
        [](const std::vector<std::vector<Row>>& sets, std::uint64_t seed) {
            std::vector<data::DatasetManifest> ms;
            for (const auto& s : sets) ms.push_back(to_manifest(s));
            return to_rows(augment::ensemble(ms, seed));
        },
        py::arg("manifests"), py::arg("seed") = 42);

    // evaluation
    m.def(
        "evaluate",
        [](const std::vector<int>& truth, const std::vector<int>& pred,
           const std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>>& probs) {
            if (truth.size() != pred.size()) throw ValidationError("truth and predictions differ in length");
            const auto cm = eval::confusion(truth, pred);
            std::optional<double> ce;
            if (probs) {
                const auto p = probs_from(*probs);
                if (p.size() != truth.size()) throw ValidationError("probabilities differ in length");
                ce = eval::cross_entropy(truth, p);
            }
            return to_py(eval::make_report(cm, ce).to_json());
        },
        py::arg("truth"), py::arg("predicted"), py::arg("probabilities") = py::none());
    m.def(
        "cross_entropy",
        [](const std::vector<int>& truth, const py::array_t<double, py::array::c_style | py::array::forcecast>& probs) {
            const auto p = probs_from(probs);
            if (p.size() != truth.size()) throw ValidationError("probabilities differ in length");
            return eval::cross_entropy(truth, p);
        },
        py::arg("truth"), py::arg("probabilities"));

    // command line
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            py::scoped_ostream_redirect out(std::cout, py::module_::import("sys").attr("stdout"));
            py::scoped_estream_redirect err(std::cerr, py::module_::import("sys").attr("stderr"));
            std::vector<std::string> argv{"ddkit"};
            argv.insert(argv.end(), args.begin(), args.end());
            return cli::run(argv, std::cout, std::cerr);
        },
        py::arg("args"), "Runs the ddkit command line in-process; returns the exit code.");
}
