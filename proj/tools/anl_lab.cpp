// anl_lab: command-line front end for training runs, suites, the property
// checks and synthetic data generation.
//
// Exit status: 0 success, 1 experiment or check failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "anl/config.hpp"
#include "anl/dataset.hpp"
#include "anl/error.hpp"
#include "anl/experiment.hpp"
#include "anl/verification.hpp"

namespace fs = std::filesystem;
using namespace anl;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

std::string extension(MetricsFormat f) { return f == MetricsFormat::Csv ? ".csv" : ".jsonl"; }

std::string run_file_name(const ExperimentConfig& cfg) {
    return cfg.name + "_seed" + std::to_string(cfg.seed) + extension(cfg.format);
}

void print_final(const ExperimentConfig& cfg, const ExperimentResult& res) {
    const auto& r = res.final_record();
    std::printf("%s seed=%llu loss=%s noise=%s method=%s realized=%.4f flipped=%zu "
                "test_acc=%.4f train_acc_clean=%.4f train_acc_noisy=%.4f\n",
                cfg.name.c_str(), static_cast<unsigned long long>(cfg.seed),
                describe(cfg.loss).c_str(), noise_label(cfg.noise.spec).c_str(),
                res.noise_method.c_str(), res.realized_noise_rate, res.flipped, r.test_acc,
                r.train_acc_clean, r.train_acc_noisy);
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed,
            const std::string& out, const std::string& format) {
    ExperimentConfig cfg = load_experiment(config);
    if (seed) cfg.seed = *seed;
    else if (!cfg.seeds.empty()) cfg.seed = cfg.seeds.front();
    cfg.seeds.clear();
    if (!format.empty()) cfg.format = metrics_format_from_string(format);
    fs::path path = !out.empty() ? fs::path(out) : cfg.output;
    if (path.empty()) path = run_file_name(cfg);

    ExperimentResult res;
    try {
        res = run_experiment(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return kFailed;
    }
    emit_metrics(res.records, path, cfg.format);
    print_final(cfg, res);
    std::printf("metrics: %s\n", path.string().c_str());
    return kOk;
}

void print_reports(const std::vector<CheckReport>& reports) {
    for (const auto& r : reports) {
        std::printf("%-4s %-44s trials=%-7ld failures=%-4ld worst=%.3g", r.passed() ? "ok" : "FAIL",
                    r.name.c_str(), r.trials, r.failures, r.worst_error);
        if (r.resamples) std::printf(" resamples=%ld", r.resamples);
        if (!r.note.empty()) std::printf("  [%s]", r.note.c_str());
        std::printf("\n");
        if (r.witness) std::printf("     witness: %s\n", r.witness->c_str());
    }
}

int cmd_suite(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
              const std::string& format, int parallel) {
    auto configs = load_suite(config);
    for (auto& c : configs) {
        if (seed) {
            c.seed = *seed;
            c.seeds.clear();
        }
        if (!format.empty()) c.format = metrics_format_from_string(format);
    }
    SuiteOptions opts;
    opts.parallelism = parallel;
    const SuiteResult suite = run_suite(configs, opts);

    const fs::path dir = out.empty() ? fs::path("suite_out") : fs::path(out);
    fs::create_directories(dir);
    write_reports(suite.verification, dir / "verification.jsonl");
    for (const auto& run : suite.runs) {
        if (run.result) {
            emit_metrics(run.result->records, dir / run_file_name(run.config), run.config.format);
        } else {
            std::fprintf(stderr, "%s seed %llu failed: %s\n", run.config.name.c_str(),
                         static_cast<unsigned long long>(run.config.seed), run.error.c_str());
        }
    }
    write_summary(suite, dir / "summary.csv");

    std::printf("verification: %s\n", suite.verification_passed() ? "pass" : "FAIL");
    if (!suite.verification_passed()) print_reports(suite.verification);
    std::printf("%-14s %-40s %5s %6s %10s %10s\n", "method", "noise", "runs", "failed", "mean", "std");
    for (const auto& r : suite.rows) {
        std::printf("%-14s %-40s %5d %6d %10.4f %10.4f\n", r.method.c_str(), r.noise.c_str(), r.runs,
                    r.failed, r.mean_test_acc, r.std_test_acc);
    }
    std::printf("output: %s\n", dir.string().c_str());
    return suite.green() ? kOk : kFailed;
}

int cmd_verify(std::optional<std::uint64_t> seed, const std::string& out) {
    const auto reports = run_verification_suite(seed.value_or(1));
    print_reports(reports);
    if (!out.empty()) write_reports(reports, out);
    for (const auto& r : reports) {
        if (!r.passed()) return kFailed;
    }
    return kOk;
}

struct GenOptions {
    int classes = 10;
    int train_per_class = 500;
    int test_per_class = 100;
    int dim = 20;
    double spread = 1.0;
    double center_distance = 0.0;
};

int cmd_gen_data(const std::string& config, std::optional<std::uint64_t> seed,
                 const std::string& out, GenOptions g) {
    std::uint64_t data_seed = seed.value_or(1);
    if (!config.empty()) {
        const ExperimentConfig cfg = load_experiment(config);
        if (cfg.dataset.source != DataSource::Blobs) {
            throw ConfigError("dataset.source", "gen-data only generates blobs");
        }
        g = {cfg.dataset.classes, cfg.dataset.train_per_class, cfg.dataset.test_per_class,
             cfg.dataset.dim, cfg.dataset.spread, cfg.dataset.center_distance};
        if (!seed) data_seed = cfg.dataset.seed.value_or(cfg.seed);
    }
    if (g.classes < 2) throw ConfigError("classes", "must be >= 2");
    if (g.train_per_class < 1 || g.test_per_class < 1) throw ConfigError("per_class", "must be >= 1");
    if (g.dim < 1) throw ConfigError("dim", "must be >= 1");
    if (!(g.spread > 0.0)) throw ConfigError("spread", "must be positive");

    const fs::path dir = out.empty() ? fs::path("data") : fs::path(out);
    fs::create_directories(dir);
    const Dataset all = gen_gaussian_blobs(g.classes, g.train_per_class + g.test_per_class, g.dim,
                                           g.spread, data_seed, g.center_distance);
    const auto split = split_per_class(all, g.train_per_class);
    write_csv(split.train, dir / "train.csv");
    write_csv(split.test, dir / "test.csv");
    std::printf("wrote %s and %s (K=%d, d=%d, %d+%d per class, seed %llu)\n",
                (dir / "train.csv").string().c_str(), (dir / "test.csv").string().c_str(), g.classes,
                g.dim, g.train_per_class, g.test_per_class, static_cast<unsigned long long>(data_seed));
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy-label training laboratory"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    int parallel = 1;
    GenOptions gen;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", config, "config file (JSON)");
        if (needs_config) c->required();
        c->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "seed override");
        cmd->add_option("--out", out, "output path");
        cmd->add_option("--format", format, "metrics format")->check(CLI::IsMember({"csv", "jsonl"}));
        cmd->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "train one configuration");
    add_common(run, true);
    auto* suite = app.add_subcommand("suite", "run a list of configurations and aggregate");
    add_common(suite, true);
    auto* verify = app.add_subcommand("verify", "run the property checks");
    add_common(verify, false);
    auto* gen_data = app.add_subcommand("gen-data", "write a Gaussian blob dataset as CSV");
    add_common(gen_data, false);
    gen_data->add_option("--classes", gen.classes);
    gen_data->add_option("--train-per-class", gen.train_per_class);
    gen_data->add_option("--test-per-class", gen.test_per_class);
    gen_data->add_option("--dim", gen.dim);
    gen_data->add_option("--spread", gen.spread);
    gen_data->add_option("--center-distance", gen.center_distance);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(config, seed, out, format);
        if (*suite) return cmd_suite(config, seed, out, format, parallel);
        if (*verify) return cmd_verify(seed, out);
        if (*gen_data) return cmd_gen_data(config, seed, out, gen);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailed;
    }
    return kOk;
}
