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

#include "ddkit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/random.hpp"
#include "csv_util.hpp"

namespace ddkit::data {

namespace {

constexpr std::array<std::pair<Provenance, std::string_view>, 5> kProvenance{{
    {Provenance::kOriginal, "original"},
    {Provenance::kRotated, "rotated"},
    {Provenance::kJittered, "jittered"},
    {Provenance::kBlurred, "blurred"},
    {Provenance::kSkinseg, "skinseg"},
}};

using detail::split_fields;
using detail::trim;

}  // namespace

std::string_view to_string(Provenance p) {
    for (auto [k, name] : kProvenance) {
        if (k == p) return name;
    }
    return "original";
}

Provenance provenance_from(std::string_view tag) {
    for (auto [k, name] : kProvenance) {
        if (name == tag) return k;
    }
    throw ParseError("unknown provenance '" + std::string(tag) + "'");
}

std::string class_name(int label) { return "c" + std::to_string(label); }

int class_label(std::string_view name) {
    if (name.size() != 2 || name[0] != 'c' || name[1] < '0' || name[1] > '9') return -1;
    return name[1] - '0';
}

std::vector<std::string> DatasetManifest::subjects() const {
    std::set<std::string> s;
    for (const auto& x : samples) s.insert(x.subject);
    return {s.begin(), s.end()};
}

DatasetManifest parse_manifest(std::string_view csv_text) {
    DatasetManifest m;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    int col_subject = -1, col_class = -1, col_img = -1, col_prov = -1;
    std::size_t n_cols = 0;
    bool have_header = false;
    std::set<std::pair<Provenance, std::string>> seen;

    while (pos <= csv_text.size()) {
        auto nl = csv_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = csv_text.size();
        const auto line = csv_text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (nl == csv_text.size()) break;
            continue;
        }
        const auto fields = split_fields(line);
        const auto where = "manifest line " + std::to_string(line_no);
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                auto f = fields[i];
                if (i == 0 && f.size() >= 3 && static_cast<unsigned char>(f[0]) == 0xEF) f = f.substr(3);  // BOM
                if (f == "subject") col_subject = static_cast<int>(i);
                if (f == "classname") col_class = static_cast<int>(i);
                if (f == "img") col_img = static_cast<int>(i);
                if (f == "provenance") col_prov = static_cast<int>(i);
            }
            for (auto [col, name] : {std::pair{col_subject, "subject"}, {col_class, "classname"}, {col_img, "img"}}) {
                if (col < 0) throw ParseError(where + ": header lacks required column '" + name + "'");
            }
            n_cols = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != n_cols) {
            throw ParseError(where + ": expected " + std::to_string(n_cols) + " fields, found " +
                             std::to_string(fields.size()));
        }
        Sample s;
        s.subject = fields[col_subject];
        s.filename = fields[col_img];
        if (s.subject.empty()) throw ParseError(where + ": empty subject");
        if (s.filename.empty()) throw ParseError(where + ": empty img");
        s.label = class_label(fields[col_class]);
        if (s.label < 0) throw ParseError(where + ": unknown classname '" + fields[col_class] + "'");
        if (col_prov >= 0) {
            try {
                s.provenance = provenance_from(fields[col_prov]);
            } catch (const ParseError& e) {
                throw ParseError(where + ": " + e.what());
            }
        }
        if (!seen.emplace(s.provenance, s.filename).second) {
            throw ParseError(where + ": duplicate filename '" + s.filename + "'");
        }
        m.samples.push_back(std::move(s));
    }
    if (!have_header) throw ParseError("manifest line 1: missing header 'subject,classname,img'");
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        auto m = parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        m.source = path.string();
        return m;
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string format_manifest(const DatasetManifest& m) {
    std::string out = "subject,classname,img,provenance\n";
    for (const auto& s : m.samples) {
        out += s.subject;
        out += ',';
        out += class_name(s.label);
        out += ',';
        out += s.filename;
        out += ',';
        out += to_string(s.provenance);
        out += '\n';
    }
    return out;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    const auto text = format_manifest(m);
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ClassStats class_stats(const DatasetManifest& m) {
    if (m.empty()) throw ValidationError("class statistics need a non-empty manifest");
    ClassStats st;
    for (const auto& s : m.samples) ++st.counts[s.label];
    std::vector<double> present;
    for (auto c : st.counts) {
        if (c > 0) present.push_back(static_cast<double>(c));
    }
    std::sort(present.begin(), present.end());
    const auto n = present.size();
    st.median = n % 2 ? present[n / 2] : (present[n / 2 - 1] + present[n / 2]) / 2.0;
    for (int c = 0; c < kNumClasses; ++c) {
        st.deviation[c] = std::abs(static_cast<double>(st.counts[c]) - st.median) / st.median;
    }
    return st;
}

Split split_by_driver(const DatasetManifest& m, int n_test_drivers, std::uint64_t seed) {
    auto subjects = m.subjects();
    if (n_test_drivers < 0 || static_cast<std::size_t>(n_test_drivers) >= subjects.size()) {
        throw ValidationError("test driver count " + std::to_string(n_test_drivers) + " must be below the " +
                              std::to_string(subjects.size()) + " subjects in the manifest");
    }
    Rng rng(seed);
    shuffle(std::span(subjects), rng);
    std::vector<std::string> chosen(subjects.begin(), subjects.begin() + n_test_drivers);
    std::sort(chosen.begin(), chosen.end());
    const std::unordered_set<std::string> test_set(chosen.begin(), chosen.end());

    Split out;
    out.train.seed = out.test.seed = seed;
    out.train.source = out.test.source = m.source;
    for (const auto& s : m.samples) {
        (test_set.count(s.subject) ? out.test : out.train).samples.push_back(s);
    }
    out.test_subjects = std::move(chosen);
    return out;
}

std::filesystem::path resolve_image(const Sample& s, std::span<const std::filesystem::path> roots) {
    for (const auto& root : roots) {
        for (auto candidate : {root / s.filename, root / class_name(s.label) / s.filename}) {
            std::error_code ec;
            if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
        }
    }
    throw IoError("image not found for '" + s.filename + "' under " + std::to_string(roots.size()) + " root(s)");
}

}  // namespace ddkit::data
