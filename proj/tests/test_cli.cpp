// End-to-end tests driving the fervr binary: every subcommand, the exit-code
// contract (0 success, 1 domain error, 2 usage error), byte-determinism of
// outputs, and the no-partial-files guarantee.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "fervr/dataset.hpp"
#include "fervr/evaluation.hpp"
#include "fervr/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
namespace data = fervr::data;
namespace eval = fervr::eval;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(static_cast<bool>(in));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(static_cast<bool>(out));
    out << content;
}

// Scratch directory shared by all cases; wiped once at startup.
const std::string& work_dir() {
    static const std::string dir = [] {
        const fs::path p = fs::temp_directory_path() / "fervr_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p.string();
    }();
    return dir;
}

std::string at(const std::string& name) { return (fs::path(work_dir()) / name).string(); }

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string err_path = at("stderr." + std::to_string(counter++));
    const std::string cmd = std::string(FERVR_CLI_PATH) + " " + args + " 2>" + err_path;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buffer[4096];
    std::size_t n = 0;
    while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
        result.out.append(buffer, n);
    }
    const int status = pclose(pipe);
    REQUIRE(WIFEXITED(status));
    result.exit_code = WEXITSTATUS(status);
    result.err = slurp(err_path);
    return result;
}

json stdout_json(const RunResult& result) { return json::parse(result.out); }

// Easy-mode dataset, a trained MLP, and a trained logreg, built once.
struct EasyFixture {
    std::string dir;         // contains fea.jsonl + image_obs.jsonl
    std::string mlp_model;   // trained on the easy data
    std::string logreg_model;

    EasyFixture() {
        dir = at("easy");
        spit(at("easy_synth.json"),
             R"({"per_class_train":20,"per_class_val":8,"per_class_test":8,)"
             R"("sigma":0.05,"mode":"easy","seed":7})");
        REQUIRE(run_cli("synth --config " + at("easy_synth.json") + " --out-dir " + dir)
                    .exit_code == 0);

        spit(at("easy_tc.json"), R"({"max_epochs":30,"seed":1})");
        mlp_model = at("easy_mlp.json");
        logreg_model = at("easy_logreg.json");
        REQUIRE(run_cli("train --data " + dir + "/fea.jsonl --model mlp --config " +
                        at("easy_tc.json") + " --out " + mlp_model)
                    .exit_code == 0);
        REQUIRE(run_cli("train --data " + dir + "/fea.jsonl --model logreg --config " +
                        at("easy_tc.json") + " --out " + logreg_model)
                    .exit_code == 0);
    }
};

// Complementary-mode dataset (sigma 0) and an MLP feature extractor for it.
struct CompFixture {
    std::string dir;
    std::string mlp_model;

    CompFixture() {
        dir = at("comp");
        spit(at("comp_synth.json"),
             R"({"per_class_train":40,"per_class_val":15,"per_class_test":15,)"
             R"("sigma":0.0,"mode":"complementary","seed":3})");
        REQUIRE(run_cli("synth --config " + at("comp_synth.json") + " --out-dir " + dir)
                    .exit_code == 0);
        spit(at("comp_tc.json"), R"({"max_epochs":40,"seed":1})");
        mlp_model = at("comp_mlp.json");
        REQUIRE(run_cli("train --data " + dir + "/fea.jsonl --model mlp --config " +
                        at("comp_tc.json") + " --out " + mlp_model)
                    .exit_code == 0);
    }
};

const EasyFixture& easy() {
    static const EasyFixture fixture;
    return fixture;
}

const CompFixture& comp() {
    static const CompFixture fixture;
    return fixture;
}

bool no_temp_leftovers(const std::string& dir) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.path().extension() == ".tmp") {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("help exits 0 on every subcommand and documents flags") {
    CHECK(run_cli("--help").exit_code == 0);
    for (const std::string sub : {"synth", "train", "extract-features", "fuse", "evaluate",
                                  "compare", "gridsearch"}) {
        const RunResult result = run_cli(sub + std::string(" --help"));
        CAPTURE(sub);
        CHECK(result.exit_code == 0);
        CHECK(result.out.find("--help") != std::string::npos);
    }
    CHECK(run_cli("train --help").out.find("--model") != std::string::npos);
    CHECK(run_cli("fuse --help").out.find("--strategy") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("").exit_code == 2);                    // missing subcommand
    CHECK(run_cli("frobnicate").exit_code == 2);          // unknown subcommand
    CHECK(run_cli("synth --config x.json").exit_code == 2);  // missing required flag
    CHECK(run_cli("synth --config x.json --out-dir d --bogus").exit_code == 2);
}

TEST_CASE("synth writes both files and an accurate summary") {
    const EasyFixture& fixture = easy();
    CHECK(fs::exists(fixture.dir + "/fea.jsonl"));
    CHECK(fs::exists(fixture.dir + "/image_obs.jsonl"));

    const RunResult rerun = run_cli("synth --config " + at("easy_synth.json") + " --out-dir " +
                                    at("easy_rerun"));
    REQUIRE(rerun.exit_code == 0);
    const json summary = stdout_json(rerun);
    CHECK(summary["train"]["total"] == 7 * 20);
    CHECK(summary["val"]["total"] == 7 * 8);
    CHECK(summary["test"]["total"] == 7 * 8);
    CHECK(summary["train"]["anger"] == 20);

    // Same config + seed => byte-identical files.
    CHECK(slurp(fixture.dir + "/fea.jsonl") == slurp(at("easy_rerun") + "/fea.jsonl"));
    CHECK(slurp(fixture.dir + "/image_obs.jsonl") ==
          slurp(at("easy_rerun") + "/image_obs.jsonl"));
}

TEST_CASE("synth rejects a negative sigma with exit 1") {
    spit(at("bad_sigma.json"),
         R"({"per_class_train":5,"per_class_val":2,"per_class_test":2,)"
         R"("sigma":-1,"mode":"easy","seed":7})");
    const RunResult result =
        run_cli("synth --config " + at("bad_sigma.json") + " --out-dir " + at("bad_sigma_out"));
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("sigma") != std::string::npos);
    CHECK_FALSE(fs::exists(at("bad_sigma_out")));
}

TEST_CASE("train reports perfect test accuracy on easy synthetic data") {
    const EasyFixture& fixture = easy();
    const RunResult result = run_cli("train --data " + fixture.dir +
                                     "/fea.jsonl --model mlp --config " + at("easy_tc.json") +
                                     " --out " + at("train_again.json") + " --history " +
                                     at("train_again_hist.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    CHECK(line["kind"] == "mlp");
    CHECK(line["test_accuracy"] == 1.0);
    CHECK(line["parameter_count"] == 16903);

    const json history = json::parse(slurp(at("train_again_hist.json")));
    CHECK(history["train_loss"].size() == history["val_accuracy"].size());
    CHECK(history.contains("selected_epoch"));

    // Same config + seed => byte-identical model file.
    CHECK(slurp(at("train_again.json")) == slurp(fixture.mlp_model));

    const fervr::io::AnyModel reloaded = fervr::io::load_model(at("train_again.json"));
    CHECK(fervr::io::model_kind(reloaded) == "mlp");
}

TEST_CASE("train exit codes: unknown model is usage, missing file is domain") {
    CHECK(run_cli("train --data x.jsonl --model svm --out m.json").exit_code == 2);
    const RunResult missing =
        run_cli("train --data " + at("nonexistent.jsonl") + " --model mlp --out m.json");
    CHECK(missing.exit_code == 1);
    CHECK(missing.err.find("cannot open") != std::string::npos);
}

TEST_CASE("extract-features emits one nonnegative vector per sample, deterministically") {
    const EasyFixture& fixture = easy();
    const std::string out_a = at("feats_a.jsonl");
    const std::string out_b = at("feats_b.jsonl");
    REQUIRE(run_cli("extract-features --model " + fixture.mlp_model + " --data " + fixture.dir +
                    "/fea.jsonl --out " + out_a)
                .exit_code == 0);
    REQUIRE(run_cli("extract-features --model " + fixture.mlp_model + " --data " + fixture.dir +
                    "/fea.jsonl --out " + out_b)
                .exit_code == 0);
    CHECK(slurp(out_a) == slurp(out_b));

    std::ifstream in(out_a);
    std::string text;
    std::size_t lines = 0;
    bool all_nonnegative = true;
    while (std::getline(in, text)) {
        ++lines;
        const json record = json::parse(text);
        REQUIRE(record["features"].size() == 128);
        for (const auto& v : record["features"]) {
            all_nonnegative = all_nonnegative && v.get<double>() >= 0.0;
        }
    }
    CHECK(lines == 7 * (20 + 8 + 8));
    CHECK(all_nonnegative);  // ReLU output
}

TEST_CASE("extract-features rejects a logreg model") {
    const EasyFixture& fixture = easy();
    const RunResult result = run_cli("extract-features --model " + fixture.logreg_model +
                                     " --data " + fixture.dir + "/fea.jsonl --out " + at("x.jsonl"));
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("MLP") != std::string::npos);
}

TEST_CASE("fuse average trains nothing and reports the fused evaluation") {
    const CompFixture& fixture = comp();
    const RunResult result = run_cli("fuse --strategy average --fea-model " + fixture.mlp_model +
                                     " --data " + fixture.dir + "/fea.jsonl --image-obs " +
                                     fixture.dir + "/image_obs.jsonl --out " + at("favg.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    CHECK(line["epochs"] == 0);           // nothing to train
    CHECK(line["parameter_count"] == 0);  // parameter-free
    CHECK(line["fused_accuracy"].get<double>() > 0.99);
    CHECK(fervr::io::model_kind(fervr::io::load_model(at("favg.json"))) ==
          "late_fusion:average");
}

TEST_CASE("fuse cross_attention beats both unimodal accuracies on complementary data") {
    const CompFixture& fixture = comp();
    spit(at("fuse_tc.json"), R"({"learning_rate":0.02,"max_epochs":150,"batch_size":64,"seed":1})");
    const RunResult result =
        run_cli("fuse --strategy cross_attention --fea-model " + fixture.mlp_model + " --data " +
                fixture.dir + "/fea.jsonl --image-obs " + fixture.dir +
                "/image_obs.jsonl --config " + at("fuse_tc.json") + " --out " + at("fca.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    const double fused = line["fused_accuracy"].get<double>();
    CHECK(fused > line["fea_accuracy"].get<double>());
    CHECK(fused > line["image_accuracy"].get<double>());
    CHECK(fervr::io::model_kind(fervr::io::load_model(at("fca.json"))) ==
          "late_fusion:cross_attention");
}

TEST_CASE("fuse intermediate trains end-to-end and persists a loadable artifact") {
    const CompFixture& fixture = comp();
    spit(at("mid_tc.json"), R"({"max_epochs":6,"seed":1})");
    const RunResult result =
        run_cli("fuse --strategy intermediate --fea-model " + fixture.mlp_model + " --data " +
                fixture.dir + "/fea.jsonl --image-obs " + fixture.dir +
                "/image_obs.jsonl --config " + at("mid_tc.json") +
                " --projection-width 128 --dropout-rate 0.2 --out " + at("fmid.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    // (128w + w + 2w) + (1280w + w + 2w) + 2(w^2 + w) + (2w*7 + 7) at w=128.
    CHECK(line["parameter_count"] == 215815);
    CHECK(line["epochs"] == 6);
    CHECK(fervr::io::model_kind(fervr::io::load_model(at("fmid.json"))) ==
          "intermediate_fusion");
}

TEST_CASE("fuse intermediate without image features fails naming the field") {
    const CompFixture& fixture = comp();
    auto observations = data::load_image_observations(fixture.dir + "/image_obs.jsonl");
    for (auto& obs : observations) {
        obs.features.reset();  // keep probs, drop features
    }
    data::save_image_observations(at("probs_only.jsonl"), observations);

    const RunResult result =
        run_cli("fuse --strategy intermediate --fea-model " + fixture.mlp_model + " --data " +
                fixture.dir + "/fea.jsonl --image-obs " + at("probs_only.jsonl") + " --out " +
                at("nope.json"));
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("features") != std::string::npos);
    CHECK_FALSE(fs::exists(at("nope.json")));
}

TEST_CASE("evaluate renders a perfect-model report in json and markdown") {
    const EasyFixture& fixture = easy();
    const RunResult result = run_cli("evaluate --model " + fixture.mlp_model + " --data " +
                                     fixture.dir + "/fea.jsonl --report " + at("rep.json") +
                                     " --preds " + at("preds_mlp.jsonl"));
    REQUIRE(result.exit_code == 0);
    CHECK(stdout_json(result)["accuracy"] == 1.0);

    const eval::EvalReport report = eval::report_from_json(slurp(at("rep.json")));
    CHECK(report.accuracy == 1.0);
    CHECK(report.macro.f1 == 1.0);

    const auto records = eval::load_predictions(at("preds_mlp.jsonl"));
    CHECK(records.size() == 7 * 8);  // test split

    const RunResult md = run_cli("evaluate --model " + fixture.mlp_model + " --data " +
                                 fixture.dir + "/fea.jsonl --report " + at("rep.md") +
                                 " --format markdown");
    REQUIRE(md.exit_code == 0);
    const std::string rendered = slurp(at("rep.md"));
    for (const std::string name : {"anger", "disgust", "fear", "happiness", "neutral",
                                   "sadness", "surprise", "Average"}) {
        CHECK(rendered.find("| " + name + " |") != std::string::npos);
    }
    CHECK(rendered.find("Accuracy:") != std::string::npos);
}

TEST_CASE("evaluate requires --image-obs for fusion models") {
    const CompFixture& fixture = comp();
    REQUIRE(fs::exists(at("fca.json")));  // built by the cross_attention case
    const RunResult result = run_cli("evaluate --model " + at("fca.json") + " --data " +
                                     fixture.dir + "/fea.jsonl --report " + at("x.json"));
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("--image-obs") != std::string::npos);
    CHECK_FALSE(fs::exists(at("x.json")));

    const RunResult ok = run_cli("evaluate --model " + at("fca.json") + " --data " + fixture.dir +
                                 "/fea.jsonl --image-obs " + fixture.dir +
                                 "/image_obs.jsonl --report " + at("repca.json"));
    REQUIRE(ok.exit_code == 0);
    CHECK(stdout_json(ok)["kind"] == "late_fusion:cross_attention");
}

TEST_CASE("compare matches identical predictions as all both_correct") {
    const EasyFixture& fixture = easy();
    REQUIRE(fs::exists(at("preds_mlp.jsonl")));
    const RunResult result = run_cli("compare --preds-a " + at("preds_mlp.jsonl") + " --preds-b " +
                                     at("preds_mlp.jsonl") + " --labels " + fixture.dir +
                                     "/fea.jsonl --report " + at("cmp.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    CHECK(line["both_correct"] == line["total"]);
    CHECK(line["only_a_correct"] == 0);
    CHECK(line["oracle_accuracy"] == 1.0);
}

TEST_CASE("compare reproduces the published agreement breakdown") {
    // 756 samples split 414 both-correct / 128 only-a / 114 only-b / 100 both-wrong.
    data::DatasetBundle labels;
    std::vector<eval::PredictionRecord> preds_a;
    std::vector<eval::PredictionRecord> preds_b;
    for (int i = 0; i < 756; ++i) {
        data::LabeledSample sample;
        sample.id = "s" + std::to_string(i);
        sample.participant = "p";
        sample.split = data::Split::test;
        sample.label = data::Emotion::anger;
        labels.samples.push_back(sample);

        eval::PredictionRecord a;
        a.sample_id = sample.id;
        eval::PredictionRecord b = a;
        const bool a_correct = i < 414 + 128;
        const bool b_correct = i < 414 || (i >= 414 + 128 && i < 414 + 128 + 114);
        a.pred = a_correct ? data::Emotion::anger : data::Emotion::disgust;
        a.probs[a_correct ? 0 : 1] = 1.0;
        b.pred = b_correct ? data::Emotion::anger : data::Emotion::fear;
        b.probs[b_correct ? 0 : 2] = 1.0;
        preds_a.push_back(a);
        preds_b.push_back(b);
    }
    data::save_fea_dataset(at("agree_labels.jsonl"), labels);
    eval::save_predictions(at("agree_a.jsonl"), preds_a);
    eval::save_predictions(at("agree_b.jsonl"), preds_b);

    const RunResult result = run_cli("compare --preds-a " + at("agree_a.jsonl") + " --preds-b " +
                                     at("agree_b.jsonl") + " --labels " + at("agree_labels.jsonl") +
                                     " --report " + at("agree_report.json"));
    REQUIRE(result.exit_code == 0);
    const json line = stdout_json(result);
    CHECK(line["both_correct"] == 414);
    CHECK(line["only_a_correct"] == 128);
    CHECK(line["only_b_correct"] == 114);
    CHECK(line["both_wrong"] == 100);
    const double oracle = line["oracle_accuracy"].get<double>();
    CHECK(oracle * 100.0 == doctest::Approx(86.77).epsilon(0.0001));
}

TEST_CASE("compare rejects prediction files of different lengths") {
    const EasyFixture& fixture = easy();
    auto records = eval::load_predictions(at("preds_mlp.jsonl"));
    records.resize(records.size() - 3);
    eval::save_predictions(at("preds_short.jsonl"), records);
    const RunResult result = run_cli("compare --preds-a " + at("preds_mlp.jsonl") + " --preds-b " +
                                     at("preds_short.jsonl") + " --labels " + fixture.dir +
                                     "/fea.jsonl --report " + at("x2.json"));
    CHECK(result.exit_code == 1);
    CHECK_FALSE(fs::exists(at("x2.json")));
}

TEST_CASE("gridsearch echoes the winner and is parallelism-invariant") {
    const EasyFixture& fixture = easy();
    spit(at("grid.json"),
         R"({"model":"logreg","axes":{"learning_rate":[0.05,0.1],"l2_strength":[0.0,0.001]},)"
         R"("base_seed":5})");
    const RunResult serial = run_cli("gridsearch --spec " + at("grid.json") + " --data " +
                                     fixture.dir + "/fea.jsonl --parallelism 1 --out " +
                                     at("res1.jsonl"));
    REQUIRE(serial.exit_code == 0);
    const json winner = stdout_json(serial);
    CHECK(winner.contains("val_accuracy"));
    CHECK(winner["test_accuracy"].is_number());  // winner gets a test evaluation

    const RunResult parallel = run_cli("gridsearch --spec " + at("grid.json") + " --data " +
                                       fixture.dir + "/fea.jsonl --parallelism 4 --out " +
                                       at("res4.jsonl"));
    REQUIRE(parallel.exit_code == 0);
    CHECK(slurp(at("res1.jsonl")) == slurp(at("res4.jsonl")));
    CHECK(parallel.out == serial.out);

    std::ifstream in(at("res1.jsonl"));
    std::string text;
    std::size_t lines = 0;
    while (std::getline(in, text)) {
        ++lines;
        CHECK(json::parse(text).contains("config"));
    }
    CHECK(lines == 4);
}

TEST_CASE("gridsearch single-candidate grid works and empty axis exits 1") {
    const EasyFixture& fixture = easy();
    spit(at("grid_one.json"), R"({"model":"logreg","axes":{},"base_seed":11})");
    const RunResult one = run_cli("gridsearch --spec " + at("grid_one.json") + " --data " +
                                  fixture.dir + "/fea.jsonl --out " + at("res_one.jsonl"));
    REQUIRE(one.exit_code == 0);
    CHECK(stdout_json(one)["index"] == 0);

    spit(at("grid_bad.json"), R"({"model":"logreg","axes":{"learning_rate":[]},"base_seed":0})");
    const RunResult bad = run_cli("gridsearch --spec " + at("grid_bad.json") + " --data " +
                                  fixture.dir + "/fea.jsonl --out " + at("res_bad.jsonl"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.find("empty") != std::string::npos);
    CHECK_FALSE(fs::exists(at("res_bad.jsonl")));
}

TEST_CASE("failed commands never leave partial or temporary output files") {
    const EasyFixture& fixture = easy();
    // Parent directory of the report does not exist => the temp write fails.
    const std::string report = at("no_such_dir") + "/report.json";
    const RunResult result = run_cli("evaluate --model " + fixture.mlp_model + " --data " +
                                     fixture.dir + "/fea.jsonl --report " + report);
    CHECK(result.exit_code == 1);
    CHECK_FALSE(fs::exists(report));
    CHECK(no_temp_leftovers(work_dir()));
}
