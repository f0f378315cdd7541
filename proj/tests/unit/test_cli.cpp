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

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "ddkit/cli.hpp"
#include "ddkit/dataset.hpp"
#include "ddkit/image_io.hpp"
#include "support.hpp"

using namespace ddkit;
namespace dt = ddkit::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result ddkit_run(std::vector<std::string> args) {
    args.insert(args.begin(), "ddkit");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("help and bad usage") {
        CHECK(ddkit_run({"--help"}).code == 0);
        CHECK(ddkit_run({}).code == 2);
        CHECK(ddkit_run({"frobnicate"}).code == 2);
        CHECK(ddkit_run({"split"}).code == 2);
    }

    TEST_CASE("stats") {
        dt::TempDir dir;
        const auto m = dt::counted_manifest(dt::kStateFarmCounts, 26);
        data::save_manifest(dir / "m.csv", m);
        auto r = ddkit_run({"stats", (dir / "m.csv").string()});
        CHECK(r.code == 0);
        int rows = 0;
        std::istringstream lines(r.out);
        for (std::string line; std::getline(lines, line);) rows += line.rfind("c", 0) == 0 && line[1] >= '0' && line[1] <= '9';
        CHECK(rows == 10);

        r = ddkit_run({"stats", "--json", (dir / "m.csv").string()});
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.at("classes").at(8).at("flagged").get<bool>());
        CHECK(j.at("classes").at(8).at("deviation").get<double>() < -0.15);
        CHECK_FALSE(j.at("classes").at(0).at("flagged").get<bool>());

        spit(dir / "empty.csv", "");
        CHECK(ddkit_run({"stats", (dir / "empty.csv").string()}).code == 2);
    }

    TEST_CASE("split is reproducible") {
        dt::TempDir dir;
        data::save_manifest(dir / "m.csv", dt::counted_manifest(dt::kStateFarmCounts, 26));
        for (const char* o : {"a", "b"}) {
            const auto r = ddkit_run({"split", (dir / "m.csv").string(), "--test-drivers", "5", "--seed", "7", "--out",
                                      (dir / o).string()});
            REQUIRE(r.code == 0);
        }
        CHECK(slurp(dir / "a/train.csv") == slurp(dir / "b/train.csv"));
        CHECK(slurp(dir / "a/test.csv") == slurp(dir / "b/test.csv"));
        const auto s = json_file(dir / "a/split_summary.json");
        CHECK(s.at("seed") == 7);
        CHECK(s.at("schema_version") == 1);
        CHECK(s.at("inputs").at((dir / "m.csv").string()).get<std::string>().rfind("fnv1a64:", 0) == 0);
        CHECK(s.at("counts").at("test_subjects").size() == 5);
        CHECK(s.contains("wall_time_s"));
        CHECK(ddkit_run({"split", (dir / "m.csv").string(), "--test-drivers", "26", "--out", (dir / "c").string()})
                  .code == 2);
    }

    TEST_CASE("config file with flag overrides") {
        dt::TempDir dir;
        data::save_manifest(dir / "m.csv", dt::counted_manifest(dt::kStateFarmCounts, 26));
        spit(dir / "run.json", R"({"seed": 5, "test_drivers": 3, "out": "from_config"})");
        auto r = ddkit_run({"--config", (dir / "run.json").string(), "split", (dir / "m.csv").string()});
        REQUIRE(r.code == 0);
        auto s = json_file(dir / "from_config/split_summary.json");
        CHECK(s.at("seed") == 5);
        CHECK(s.at("counts").at("test_subjects").size() == 3);

        r = ddkit_run({"--config", (dir / "run.json").string(), "split", (dir / "m.csv").string(), "--seed", "9",
                       "--test-drivers", "4"});
        REQUIRE(r.code == 0);
        s = json_file(dir / "from_config/split_summary.json");
        CHECK(s.at("seed") == 9);
        CHECK(s.at("counts").at("test_subjects").size() == 4);

        spit(dir / "bad.json", R"({"seeds": 5})");
        CHECK(ddkit_run({"--config", (dir / "bad.json").string(), "split", (dir / "m.csv").string()}).code == 2);
        spit(dir / "broken.json", R"({"seed": )");
        CHECK(ddkit_run({"--config", (dir / "broken.json").string(), "split", (dir / "m.csv").string()}).code == 2);
    }

    TEST_CASE("augment, ensemble and partial failure") {
        dt::TempDir dir;
        auto m = dt::write_synthetic_dataset(dir / "src", 6, 2);
        data::save_manifest(dir / "src/m.csv", m);
        auto r = ddkit_run({"augment", "classical", (dir / "src/m.csv").string(), "--out", (dir / "o").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "o/classical.csv").size() == 18);

        r = ddkit_run({"skinseg", (dir / "src/m.csv").string(), "--out", (dir / "o").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "o/skinseg.csv").size() == 6);

        r = ddkit_run({"ensemble", (dir / "o/classical.csv").string(), (dir / "o/skinseg.csv").string(), "--seed", "1",
                       "--out", (dir / "e").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "e/ensemble.csv").size() == 24);
        // same files twice: duplicates within a provenance
        r = ddkit_run({"augment", "ensemble", (dir / "o/skinseg.csv").string(), (dir / "o/skinseg.csv").string(),
                       "--out", (dir / "e2").string()});
        CHECK(r.code == 2);

        m.samples.push_back({"p000", 0, "missing.png", data::Provenance::kOriginal});
        data::save_manifest(dir / "src/m2.csv", m);
        r = ddkit_run({"skinseg", (dir / "src/m2.csv").string(), "--out", (dir / "o2").string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("missing.png") != std::string::npos);
        const auto s = json_file(dir / "o2/augment-skinseg_summary.json");
        CHECK(s.at("counts").at("failed") == 1);
        CHECK(s.at("exit_code") == 1);

        r = ddkit_run({"blur", (dir / "src/m.csv").string(), "--fallback", "fixed_region", "--out", (dir / "b").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "b/blurred.csv").size() == 6);

        r = ddkit_run({"augment", "preset", "paper-full", (dir / "src/m.csv").string(), "--out", (dir / "p").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "p/paper-full.csv").size() == 24);
    }

    TEST_CASE("plan file") {
        dt::TempDir dir;
        const auto m = dt::write_synthetic_dataset(dir / "src", 4, 2);
        data::save_manifest(dir / "src/m.csv", m);
        spit(dir / "plan.json", R"({"jitter": {"enabled": false}, "seed": 3})");
        auto r = ddkit_run({"augment", "classical", (dir / "src/m.csv").string(), "--plan", (dir / "plan.json").string(),
                            "--out", (dir / "o").string()});
        CHECK(r.code == 0);
        CHECK(data::load_manifest(dir / "o/classical.csv").size() == 8);
        CHECK(json_file(dir / "o/augment-classical_summary.json").at("seed") == 3);
        spit(dir / "bad_plan.json", R"({"rotation": {"range_deg": 999}})");
        r = ddkit_run({"augment", "classical", (dir / "src/m.csv").string(), "--plan",
                       (dir / "bad_plan.json").string(), "--out", (dir / "o").string()});
        CHECK(r.code == 2);
    }

    TEST_CASE("eval") {
        dt::TempDir dir;
        spit(dir / "truth.csv", "subject,classname,img\np1,c0,a.jpg\np1,c4,b.jpg\np2,c9,c.jpg\n");
        spit(dir / "preds.csv", "img,pred\na.jpg,0\nb.jpg,4\nc.jpg,9\n");
        auto r = ddkit_run({"eval", "--truth", (dir / "truth.csv").string(), "--preds", (dir / "preds.csv").string(),
                            "--out", (dir / "rep").string()});
        CHECK(r.code == 0);
        const auto rep = json_file(dir / "rep/report.json");
        CHECK(rep.at("accuracy") == 1.0);
        CHECK(fs::exists(dir / "rep/confusion.csv"));
        CHECK(fs::exists(dir / "rep/confusion_by_true_row.png"));
        CHECK(fs::exists(dir / "rep/confusion_by_predicted_column.png"));
        CHECK(fs::exists(dir / "rep/report.txt"));

        spit(dir / "short.csv", "img,pred\na.jpg,0\n");
        r = ddkit_run({"eval", "--truth", (dir / "truth.csv").string(), "--preds", (dir / "short.csv").string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("b.jpg") != std::string::npos);
    }

    TEST_CASE("detect") {
        const auto r = ddkit_run({"detect", (dt::kFixtureDir / "eyes" / "driver_03.png").string()});
        CHECK(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.at(0).contains("primary"));
    }
}
