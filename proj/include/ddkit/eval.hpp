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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddkit/dataset.hpp"

namespace ddkit::eval {

inline constexpr int kClasses = data::kNumClasses;
inline constexpr double kProbEpsilon = 1e-12;

using Probabilities = std::array<double, kClasses>;

struct PredictionRecord {
    std::string filename;
    int predicted = 0;
    std::optional<Probabilities> probs;
};

/// Throws ValidationError unless p >= 0, sum(p) = 1 +- 1e-6 and `predicted`
/// is one of the argmax classes.
void validate_probabilities(const Probabilities& p, int predicted);

/// `img,pred[,p0..p9]` CSV; `pred` is 0-9 or c0-c9. Probability columns are
/// all-or-none. Errors name the line.
std::vector<PredictionRecord> parse_predictions(std::string_view csv_text);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

using RealMatrix = std::array<std::array<double, kClasses>, kClasses>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, kClasses>, kClasses> counts{};

    void add(int truth, int predicted);
    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(int c) const;
    std::uint64_t col_sum(int c) const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted);

/// Pairs each truth sample with its prediction by filename. Throws
/// ValidationError listing unknown, missing or duplicated filenames.
struct Aligned {
    std::vector<int> truth;
    std::vector<const PredictionRecord*> preds;  // same order as truth
};
Aligned align(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds);

ConfusionMatrix confusion(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds);

enum class NormMode { kByTrueRow, kByPredictedColumn };
std::string_view to_string(NormMode m);

/// Rows (or columns) sum to 1; all-zero rows (columns) stay zero.
RealMatrix normalize(const ConfusionMatrix& cm, NormMode mode);

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::uint64_t support = 0;    // true count
    std::uint64_t predicted = 0;  // predicted count
    bool zero_division = false;   // some ratio had a zero denominator and was set to 0
};

struct Averages {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct Metrics {
    std::array<ClassMetrics, kClasses> per_class;
    double accuracy = 0;
    Averages micro;
    Averages macro;  // unweighted mean over all ten classes
};

/// 2pr / (p + r), 0 when both are 0, and exactly p when p == r.
double harmonic_mean(double p, double r);

/// Throws ValidationError for an empty matrix.
Metrics metrics(const ConfusionMatrix& cm);

/// Mean of -ln(max(p_true, eps)).
double cross_entropy(std::span<const int> truth, std::span<const Probabilities> probs);

struct EvalReport {
    ConfusionMatrix confusion;
    Metrics metrics;
    RealMatrix by_true_row{};
    RealMatrix by_predicted_column{};
    std::optional<double> cross_entropy;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

EvalReport make_report(const ConfusionMatrix& cm, std::optional<double> cross_entropy = std::nullopt);

/// Cross-entropy is reported when every prediction carries probabilities;
/// a mix of records with and without them is rejected.
EvalReport evaluate(const data::DatasetManifest& truth, std::span<const PredictionRecord> preds);

std::string format_table(const EvalReport& r);
/// Header `true\pred,c0..c9`, one row per true class.
std::string format_confusion_csv(const ConfusionMatrix& cm);
std::string format_matrix_csv(const RealMatrix& m);
/// Grayscale PNG, one `cell`-sized square per entry; darker is larger.
std::vector<std::uint8_t> render_heatmap(const RealMatrix& m, int cell = 32);

}  // namespace ddkit::eval
