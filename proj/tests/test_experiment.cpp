#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "anl/experiment.hpp"

using namespace anl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "anl_test_experiment";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

json blobs(int classes, int train, int test) {
    return {{"classes", classes}, {"train_per_class", train}, {"test_per_class", test},
            {"dim", 20},          {"spread", 1.0},            {"center_distance", 4.5}};
}

ExperimentConfig quick(json loss, json noise, int epochs) {
    return parse_experiment(json{{"name", "quick"},
                                 {"dataset", blobs(10, 100, 50)},
                                 {"noise", std::move(noise)},
                                 {"loss", std::move(loss)},
                                 {"optimizer", {{"lr", 0.1}, {"batch_size", 64}, {"epochs", epochs}}}});
}

MetricsRecord record(int epoch, double acc) {
    MetricsRecord r;
    r.epoch = epoch;
    r.lr = 0.1 / (epoch + 1);
    r.train_loss = 1.0 / 3.0;
    r.train_acc_clean = acc;
    r.train_acc_noisy = std::nan("");
    r.test_acc = acc * 0.9;
    r.pred_marginals = std::vector<double>(10, 0.1);
    return r;
}
} // namespace

TEST_CASE("noise partition sizes match the flip count") {
    const auto cfg = quick("ce", {{"kind", "symmetric"}, {"eta", 0.4}}, 2);
    const PreparedData data = prepare_data(cfg);
    std::size_t flips = 0;
    for (std::size_t n = 0; n < data.flip_mask.size(); ++n) {
        flips += data.flip_mask[n];
        CHECK(data.flip_mask[n] == (data.train.labels[n] != (*data.train.clean_labels)[n]));
    }
    const auto res = run_experiment(cfg);
    CHECK(res.flipped == flips);
    CHECK(res.clean + res.flipped == 1000);
    CHECK(res.realized_noise_rate == doctest::Approx(flips / 1000.0));
    CHECK(std::abs(res.realized_noise_rate - 0.4) < 0.06);
}

TEST_CASE("clean cross entropy separates blobs") {
    const auto res = run_experiment(quick("ce", {{"kind", "none"}}, 30));
    CHECK(res.final_record().test_acc >= 0.99);
    CHECK(std::isnan(res.final_record().train_acc_noisy));
    CHECK(res.records.size() == 30);
    CHECK(res.final_record().is_final);
    double mass = 0.0;
    for (double m : res.final_record().pred_marginals) mass += m;
    CHECK(mass == doctest::Approx(1.0));
}

TEST_CASE("ANL-CE keeps flipped samples unfitted under heavy symmetric noise") {
    const auto res = run_experiment(
        quick("paper-cifar10-anl-ce", {{"kind", "symmetric"}, {"eta", 0.6}}, 40));
    const std::size_t quarter = res.records.size() / 4;
    for (std::size_t e = quarter; e < res.records.size(); ++e) {
        CAPTURE(e);
        CHECK(res.records[e].train_acc_noisy < res.records[e].train_acc_clean);
    }
    CHECK(res.final_record().test_acc > 0.9);
}

TEST_CASE("runs are reproducible and per-batch cadence adds records") {
    auto cfg = quick("paper-cifar10-anl-ce-star", {{"kind", "asymmetric_pairmap"}, {"eta", 0.4}}, 3);
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    emit_metrics(a.records, scratch("a.csv"), MetricsFormat::Csv);
    emit_metrics(b.records, scratch("b.csv"), MetricsFormat::Csv);
    CHECK(slurp(scratch("a.csv")) == slurp(scratch("b.csv")));

    cfg.eval.per_batch = true;
    const auto batched = run_experiment(cfg);
    CHECK(batched.records.size() > a.records.size());
    emit_metrics(batched.records, scratch("batched.csv"), MetricsFormat::Csv);
    const std::string text = slurp(scratch("batched.csv"));
    CHECK(text.substr(0, text.find('\n')).ends_with(",wall_ms,batch"));
}

TEST_CASE("metrics files") {
    const std::vector<MetricsRecord> recs = {record(1, 0.5), record(2, 0.75)};
    emit_metrics(recs, scratch("m.csv"), MetricsFormat::Csv);
    const std::string text = slurp(scratch("m.csv"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    const std::string header = text.substr(0, text.find('\n'));
    for (int c = 0; c < 10; ++c) {
        CHECK(header.find("pred_marginal_" + std::to_string(c)) != std::string::npos);
    }
    CHECK(!fs::exists(scratch("m.csv.tmp")));

    for (auto fmt : {MetricsFormat::Csv, MetricsFormat::Jsonl}) {
        const auto path = scratch(fmt == MetricsFormat::Csv ? "rt.csv" : "rt.jsonl");
        emit_metrics(recs, path, fmt);
        const auto back = read_metrics(path, fmt);
        REQUIRE(back.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(back[i].epoch == recs[i].epoch);
            CHECK(back[i].lr == recs[i].lr);
            CHECK(back[i].train_loss == recs[i].train_loss);
            CHECK(back[i].train_acc_clean == recs[i].train_acc_clean);
            CHECK(std::isnan(back[i].train_acc_noisy));
            CHECK(back[i].test_acc == recs[i].test_acc);
            CHECK(back[i].pred_marginals == recs[i].pred_marginals);
        }
    }
    const std::string jl = slurp(scratch("rt.jsonl"));
    CHECK(jl.find("\"train_acc_noisy\":null") != std::string::npos);
    CHECK(json::parse(jl.substr(0, jl.find('\n')))["epoch"] == 1);
}

TEST_CASE("suite aggregates per method and noise") {
    json noise = {{"kind", "symmetric"}, {"eta", 0.2}};
    auto ce = quick("ce", noise, 3);
    ce.seeds = {1, 2, 3};
    auto anl = quick("paper-cifar10-anl-ce", noise, 3);
    anl.seeds = {1, 2, 3};
    const std::vector<ExperimentConfig> configs = {ce, anl};
    SuiteOptions opts;
    opts.verify = false;
    opts.parallelism = 3;
    const auto suite = run_suite(configs, opts);
    REQUIRE(suite.rows.size() == 2);
    CHECK(suite.runs.size() == 6);
    CHECK(suite.all_runs_ok());
    CHECK(suite.rows[0].method == "CE");
    CHECK(suite.rows[1].method == "ANL-CE");
    CHECK(suite.rows[0].noise == "symmetric-0.2");
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(suite.rows[r].runs == 3);
        double mean = 0.0;
        for (std::size_t i = 0; i < 3; ++i) mean += suite.runs[3 * r + i].result->final_record().test_acc;
        mean /= 3;
        double var = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double d = suite.runs[3 * r + i].result->final_record().test_acc - mean;
            var += d * d;
        }
        CHECK(suite.rows[r].mean_test_acc == doctest::Approx(mean).epsilon(1e-15));
        CHECK(suite.rows[r].std_test_acc == doctest::Approx(std::sqrt(var / 3)).epsilon(1e-12));
    }

    opts.parallelism = 1;
    const auto serial = run_suite(configs, opts);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(serial.runs[i].result->final_record().test_acc ==
              suite.runs[i].result->final_record().test_acc);
    }
}

TEST_CASE("empty suite") {
    SuiteOptions opts;
    opts.verify = false;
    const auto suite = run_suite({}, opts);
    CHECK(suite.rows.empty());
    CHECK(suite.green());
}

TEST_CASE("a failing run is isolated to its cell") {
    auto good = quick("ce", {{"kind", "none"}}, 1);
    auto bad = parse_experiment(json{{"name", "missing"},
                                     {"dataset", {{"source", "csv"},
                                                  {"train", scratch("nope_train.csv").string()},
                                                  {"test", scratch("nope_test.csv").string()}}},
                                     {"loss", "mae"}});
    const std::vector<ExperimentConfig> configs = {good, bad};
    SuiteOptions opts;
    opts.verify = false;
    const auto suite = run_suite(configs, opts);
    REQUIRE(suite.rows.size() == 2);
    CHECK(suite.rows[0].failed == 0);
    CHECK(suite.rows[1].failed == 1);
    CHECK(suite.rows[1].errors.size() == 1);
    CHECK(std::isnan(suite.rows[1].mean_test_acc));
    CHECK(suite.runs[0].result.has_value());
    CHECK_FALSE(suite.all_runs_ok());

    write_summary(suite, scratch("summary.csv"));
    CHECK(slurp(scratch("summary.csv")).rfind("method,noise,runs,failed,mean_test_acc,std_test_acc\n", 0) == 0);
}
