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

#include "ddkit/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "csv_util.hpp"
#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"

namespace ddkit::eval {

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& zero_div) {
    if (den == 0) {
        zero_div = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError(where + ": '" + s + "' is not a number");
    }
    return v;
}

int parse_label(const std::string& s, const std::string& where) {
    int v = data::class_label(s);
    if (v >= 0) return v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0 || v >= kClasses) {
        throw ParseError(where + ": '" + s + "' is not a class in 0-9");
    }
    return v;
}

std::string join_limited(const std::vector<std::string>& names) {
    constexpr std::size_t kShow = 10;
    std::string out;
    for (std::size_t i = 0; i < names.size() && i < kShow; ++i) out += (i ? ", " : "") + names[i];
    if (names.size() > kShow) out += ", ... (" + std::to_string(names.size()) + " total)";
    return out;
}

nlohmann::json matrix_json(const RealMatrix& m) {
    auto j = nlohmann::json::array();
    for (const auto& row : m) j.push_back(row);
    return j;
}

RealMatrix matrix_from(const nlohmann::json& j) {
    RealMatrix m{};
    if (!j.is_array() || j.size() != kClasses) throw ParseError("eval report: matrix must be 10x10");
    for (int r = 0; r < kClasses; ++r) m[r] = j[r].get<std::array<double, kClasses>>();
    return m;
}

nlohmann::json averages_json(const Averages& a) {
    return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

Averages averages_from(const nlohmann::json& j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

void validate_probabilities(const Probabilities& p, int predicted) {
    double sum = 0;
    for (double v : p) {
        if (!(v >= 0)) throw ValidationError("probabilities must be non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("probabilities sum to " + std::to_string(sum));
    if (p[predicted] < *std::max_element(p.begin(), p.end())) {
        throw ValidationError("predicted class " + std::to_string(predicted) + " is not the argmax of p");
    }
}

std::vector<PredictionRecord> parse_predictions(std::string_view csv_text) {
    std::vector<PredictionRecord> out;
    int col_img = -1, col_pred = -1;
    std::array<int, kClasses> col_p;
    col_p.fill(-1);
    std::size_t n_cols = 0;
    bool have_header = false, have_probs = false;

    detail::for_each_line(csv_text, [&](std::size_t line_no, std::string_view line) {
        const auto fields = detail::split_fields(line);
        const auto where = "predictions line " + std::to_string(line_no);
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                auto f = fields[i];
                if (i == 0 && f.size() >= 3 && static_cast<unsigned char>(f[0]) == 0xEF) f = f.substr(3);
                const int c = static_cast<int>(i);
                if (f == "img") col_img = c;
                else if (f == "pred") col_pred = c;
                else if (f.size() >= 2 && f[0] == 'p') {
                    int k = -1;
                    auto [ptr, ec] = std::from_chars(f.data() + 1, f.data() + f.size(), k);
                    if (ec == std::errc() && ptr == f.data() + f.size() && k >= 0 && k < kClasses) col_p[k] = c;
                }
            }
            if (col_img < 0 || col_pred < 0) throw ParseError(where + ": header needs 'img' and 'pred'");
            const auto n_p = std::count_if(col_p.begin(), col_p.end(), [](int c) { return c >= 0; });
            if (n_p != 0 && n_p != kClasses) throw ParseError(where + ": probability columns must be all of p0..p9");
            have_probs = n_p == kClasses;
            n_cols = fields.size();
            have_header = true;
            return;
        }
        if (fields.size() != n_cols) {
            throw ParseError(where + ": expected " + std::to_string(n_cols) + " fields, found " +
                             std::to_string(fields.size()));
        }
        PredictionRecord r;
        r.filename = fields[col_img];
        if (r.filename.empty()) throw ParseError(where + ": empty img");
        r.predicted = parse_label(fields[col_pred], where);
        if (have_probs) {
            Probabilities p{};
            for (int k = 0; k < kClasses; ++k) p[k] = parse_double(fields[col_p[k]], where);
            try {
                validate_probabilities(p, r.predicted);
            } catch (const ValidationError& e) {
                throw ParseError(where + ": " + e.what());
            }
            r.probs = p;
        }
        out.push_back(std::move(r));
    });
    if (!have_header) throw ParseError("predictions: missing header");
    return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_predictions(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth >= kClasses || predicted < 0 || predicted >= kClasses) {
        throw ValidationError("class index out of range");
    }
    ++counts[truth][predicted];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (int c = 0; c < kClasses; ++c) t += counts[c][c];
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const {
    return std::accumulate(counts[c].begin(), counts[c].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
    std::uint64_t t = 0;
    for (int r = 0; r < kClasses; ++r) t += counts[r][c];
    return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw ValidationError("truth and predictions differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

Aligned align(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds) {
    std::map<std::string, const PredictionRecord*> by_name;
    std::vector<std::string> duplicates, unknown, missing;
    for (const auto& p : preds) {
        if (!by_name.emplace(p.filename, &p).second) duplicates.push_back(p.filename);
    }
    std::map<std::string, int> truth_names;
    for (const auto& s : truth.samples) {
        if (!truth_names.emplace(s.filename, s.label).second) duplicates.push_back("truth:" + s.filename);
    }
    for (const auto& [name, p] : by_name) {
        if (!truth_names.contains(name)) unknown.push_back(name);
    }
    for (const auto& s : truth.samples) {
        if (!by_name.contains(s.filename)) missing.push_back(s.filename);
    }
    std::string problems;
    if (!duplicates.empty()) problems += " duplicate: " + join_limited(duplicates) + ";";
    if (!unknown.empty()) problems += " not in truth: " + join_limited(unknown) + ";";
    if (!missing.empty()) problems += " no prediction: " + join_limited(missing) + ";";
    if (!problems.empty()) throw ValidationError("predictions do not match truth:" + problems);

    Aligned a;
    for (const auto& s : truth.samples) {
        a.truth.push_back(s.label);
        a.preds.push_back(by_name.at(s.filename));
    }
    return a;
}

ConfusionMatrix confusion(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds) {
    const auto a = align(truth, preds);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < a.truth.size(); ++i) cm.add(a.truth[i], a.preds[i]->predicted);
    return cm;
}

std::string_view to_string(NormMode m) {
    return m == NormMode::kByTrueRow ? "by_true_row" : "by_predicted_column";
}

RealMatrix normalize(const ConfusionMatrix& cm, NormMode mode) {
    RealMatrix out{};
    for (int r = 0; r < kClasses; ++r) {
        for (int c = 0; c < kClasses; ++c) {
            const auto den = mode == NormMode::kByTrueRow ? cm.row_sum(r) : cm.col_sum(c);
            out[r][c] = den == 0 ? 0.0 : static_cast<double>(cm.counts[r][c]) / static_cast<double>(den);
        }
    }
    return out;
}

double harmonic_mean(double p, double r) {
    if (p == r) return p;
    if (p + r == 0) return 0.0;
    return 2.0 * p * r / (p + r);
}

Metrics metrics(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ValidationError("metrics need a non-empty confusion matrix");
    Metrics m;
    double sum_p = 0, sum_r = 0, sum_f = 0;
    for (int c = 0; c < kClasses; ++c) {
        auto& k = m.per_class[c];
        const auto tp = cm.counts[c][c];
        k.support = cm.row_sum(c);
        k.predicted = cm.col_sum(c);
        k.precision = ratio(tp, k.predicted, k.zero_division);
        k.recall = ratio(tp, k.support, k.zero_division);
        k.f1 = harmonic_mean(k.precision, k.recall);
        sum_p += k.precision;
        sum_r += k.recall;
        sum_f += k.f1;
    }
    bool unused = false;
    m.accuracy = ratio(cm.trace(), total, unused);
    // Summed TP over summed (TP + FP) and (TP + FN); both reduce to trace / total.
    m.micro.precision = m.accuracy;
    m.micro.recall = m.accuracy;
    m.micro.f1 = harmonic_mean(m.micro.precision, m.micro.recall);
    // Absent classes count as 0 (and carry zero_division), as for any other zero denominator.
    m.macro = {sum_p / kClasses, sum_r / kClasses, sum_f / kClasses};
    return m;
}

double cross_entropy(std::span<const int> truth, std::span<const Probabilities> probs) {
    if (truth.size() != probs.size()) throw ValidationError("truth and probabilities differ in length");
    if (truth.empty()) throw ValidationError("cross-entropy needs at least one sample");
    double sum = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        if (t < 0 || t >= kClasses) throw ValidationError("class index out of range");
        sum -= std::log(std::clamp(probs[i][t], kProbEpsilon, 1.0));
    }
    return sum / static_cast<double>(truth.size());
}

EvalReport make_report(const ConfusionMatrix& cm, std::optional<double> ce) {
    EvalReport r;
    r.confusion = cm;
    r.metrics = metrics(cm);
    r.by_true_row = normalize(cm, NormMode::kByTrueRow);
    r.by_predicted_column = normalize(cm, NormMode::kByPredictedColumn);
    r.cross_entropy = ce;
    return r;
}

EvalReport evaluate(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds) {
    const auto a = align(truth, preds);
    ConfusionMatrix cm;
    std::vector<Probabilities> probs;
    std::size_t with_probs = 0;
    for (std::size_t i = 0; i < a.truth.size(); ++i) {
        cm.add(a.truth[i], a.preds[i]->predicted);
        if (a.preds[i]->probs) {
            ++with_probs;
            probs.push_back(*a.preds[i]->probs);
        }
    }
    std::optional<double> ce;
    if (with_probs == a.truth.size() && with_probs > 0) {
        ce = cross_entropy(a.truth, probs);
    } else if (with_probs > 0) {
        throw ValidationError("cross-entropy: " + std::to_string(a.truth.size() - with_probs) +
                              " predictions lack probabilities");
    }
    return make_report(cm, ce);
}

nlohmann::json EvalReport::to_json() const {
    auto classes = nlohmann::json::array();
    auto per_class = nlohmann::json::array();
    for (int c = 0; c < kClasses; ++c) {
        const auto& k = metrics.per_class[c];
        classes.push_back(data::class_name(c));
        per_class.push_back({{"class", data::class_name(c)},
                             {"precision", k.precision},
                             {"recall", k.recall},
                             {"f1", k.f1},
                             {"support", k.support},
                             {"predicted", k.predicted},
                             {"zero_division", k.zero_division}});
    }
    auto counts = nlohmann::json::array();
    for (const auto& row : confusion.counts) counts.push_back(row);
    return {
        {"classes", classes},
        {"total", confusion.total()},
        {"accuracy", metrics.accuracy},
        {"micro", averages_json(metrics.micro)},
        {"macro", averages_json(metrics.macro)},
        {"per_class", per_class},
        {"confusion", {{"orientation", "rows=true,cols=predicted"}, {"counts", counts}}},
        {"normalized",
         {{std::string(to_string(NormMode::kByTrueRow)), matrix_json(by_true_row)},
          {std::string(to_string(NormMode::kByPredictedColumn)), matrix_json(by_predicted_column)}}},
        {"cross_entropy", cross_entropy ? nlohmann::json(*cross_entropy) : nlohmann::json(nullptr)},
    };
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        const auto& counts = j.at("confusion").at("counts");
        if (!counts.is_array() || counts.size() != kClasses) throw ParseError("eval report: counts must be 10x10");
        for (int row = 0; row < kClasses; ++row) {
            r.confusion.counts[row] = counts[row].get<std::array<std::uint64_t, kClasses>>();
        }
        r.metrics.accuracy = j.at("accuracy").get<double>();
        r.metrics.micro = averages_from(j.at("micro"));
        r.metrics.macro = averages_from(j.at("macro"));
        const auto& pc = j.at("per_class");
        if (!pc.is_array() || pc.size() != kClasses) throw ParseError("eval report: per_class must list 10 classes");
        for (int c = 0; c < kClasses; ++c) {
            auto& k = r.metrics.per_class[c];
            k.precision = pc[c].at("precision").get<double>();
            k.recall = pc[c].at("recall").get<double>();
            k.f1 = pc[c].at("f1").get<double>();
            k.support = pc[c].at("support").get<std::uint64_t>();
            k.predicted = pc[c].at("predicted").get<std::uint64_t>();
            k.zero_division = pc[c].at("zero_division").get<bool>();
        }
        const auto& norm = j.at("normalized");
        r.by_true_row = matrix_from(norm.at(std::string(to_string(NormMode::kByTrueRow))));
        r.by_predicted_column = matrix_from(norm.at(std::string(to_string(NormMode::kByPredictedColumn))));
        if (!j.at("cross_entropy").is_null()) r.cross_entropy = j.at("cross_entropy").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("eval report: ") + e.what());
    }
}

std::string format_table(const EvalReport& r) {
    const auto& m = r.metrics;
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %9s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1", "support",
                  "predicted");
    out += buf;
    for (int c = 0; c < kClasses; ++c) {
        const auto& k = m.per_class[c];
        std::snprintf(buf, sizeof buf, "%-8s %9.4f %9.4f %9.4f %9llu %9llu%s\n", data::class_name(c).c_str(),
                      k.precision, k.recall, k.f1, static_cast<unsigned long long>(k.support),
                      static_cast<unsigned long long>(k.predicted), k.zero_division ? "  (zero division)" : "");
        out += buf;
    }
    out += "\n";
    std::snprintf(buf, sizeof buf, "%-8s %9.4f %9.4f %9.4f\n", "micro", m.micro.precision, m.micro.recall, m.micro.f1);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-8s %9.4f %9.4f %9.4f\n", "macro", m.macro.precision, m.macro.recall,
                  m.macro.f1);
    out += buf;
    std::snprintf(buf, sizeof buf, "accuracy %.4f on %llu samples\n", m.accuracy,
                  static_cast<unsigned long long>(r.confusion.total()));
    out += buf;
    if (r.cross_entropy) {
        std::snprintf(buf, sizeof buf, "cross-entropy %.6f\n", *r.cross_entropy);
        out += buf;
    }
    out += "\nconfusion (rows = true, columns = predicted)\n        ";
    for (int c = 0; c < kClasses; ++c) {
        std::snprintf(buf, sizeof buf, "%7s", data::class_name(c).c_str());
        out += buf;
    }
    out += "\n";
    for (int row = 0; row < kClasses; ++row) {
        std::snprintf(buf, sizeof buf, "%-8s", data::class_name(row).c_str());
        out += buf;
        for (int c = 0; c < kClasses; ++c) {
            std::snprintf(buf, sizeof buf, "%7llu", static_cast<unsigned long long>(r.confusion.counts[row][c]));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string format_confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "true\\pred";
    for (int c = 0; c < kClasses; ++c) os << ',' << data::class_name(c);
    os << '\n';
    for (int r = 0; r < kClasses; ++r) {
        os << data::class_name(r);
        for (int c = 0; c < kClasses; ++c) os << ',' << cm.counts[r][c];
        os << '\n';
    }
    return os.str();
}

std::string format_matrix_csv(const RealMatrix& m) {
    std::ostringstream os;
    os << "true\\pred";
    for (int c = 0; c < kClasses; ++c) os << ',' << data::class_name(c);
    os << '\n';
    char buf[32];
    for (int r = 0; r < kClasses; ++r) {
        os << data::class_name(r);
        for (int c = 0; c < kClasses; ++c) {
            std::snprintf(buf, sizeof buf, ",%.6f", m[r][c]);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<std::uint8_t> render_heatmap(const RealMatrix& m, int cell) {
    if (cell < 1 || cell > 256) throw ValidationError("heatmap cell size must be in [1, 256]");
    const int side = cell * kClasses;
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const double v = std::clamp(m[y / cell][x / cell], 0.0, 1.0);
            gray[static_cast<std::size_t>(y) * side + x] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)));
        }
    }
    return encode_png_gray(side, side, gray);
}

}  // namespace ddkit::eval
