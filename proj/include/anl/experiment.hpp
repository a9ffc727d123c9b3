#ifndef ANL_EXPERIMENT_HPP
#define ANL_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anl/config.hpp"
#include "anl/dataset.hpp"
#include "anl/verification.hpp"

namespace anl {

struct MetricsRecord {
    int epoch = 0;
    int batch = -1; // -1 for epoch-level records
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc_clean = 0.0; // over samples whose label was not flipped
    double train_acc_noisy = 0.0; // over flipped samples, against the noisy label
    double test_acc = 0.0;
    std::vector<double> pred_marginals; // argmax histogram on the test set
    std::int64_t wall_ms = 0;
    bool is_final = false;
};

struct ExperimentResult {
    std::vector<MetricsRecord> records;
    std::size_t flipped = 0; // size of the noisy training partition
    std::size_t clean = 0;
    double realized_noise_rate = 0.0;
    std::string noise_method;

    const MetricsRecord& final_record() const;
};

// Materialised datasets after loading, standardising and corrupting labels.
struct PreparedData {
    Dataset train; // noisy labels, clean_labels set
    Dataset test;
    std::vector<bool> flip_mask;
    std::string noise_method;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Deterministic in (config, seed): two calls give identical records.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Accuracy of the argmax prediction against labels.
double accuracy(const Network& net, const Eigen::MatrixXd& features, std::span<const int> labels);

struct SuiteRun {
    ExperimentConfig config;
    std::optional<ExperimentResult> result;
    std::string error; // set when the run failed
};

struct SuiteRow {
    std::string method; // loss description
    std::string noise;  // e.g. "symmetric-0.6"
    int runs = 0;
    int failed = 0;
    double mean_test_acc = 0.0;
    double std_test_acc = 0.0; // population standard deviation
    std::vector<std::string> errors;
};

struct SuiteResult {
    std::vector<CheckReport> verification;
    std::vector<SuiteRun> runs;
    std::vector<SuiteRow> rows;

    bool verification_passed() const;
    bool all_runs_ok() const;
    bool green() const { return verification_passed() && all_runs_ok(); }
};

struct SuiteOptions {
    int parallelism = 1;
    bool verify = true;
    std::uint64_t verify_seed = 1;
};

/*
 * Expands every config by its seed list and runs them on up to
 * `parallelism` threads.  A failing run is recorded against its cell and
 * does not stop the others.  Rows keep first-seen (method, noise) order.
 */
SuiteResult run_suite(std::span<const ExperimentConfig> configs, const SuiteOptions& opts = {});

std::string noise_label(const NoiseSpec& spec);

// Metrics file writers; the file is written to a temporary sibling and renamed.
void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path,
                  MetricsFormat format);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, MetricsFormat format);
std::vector<std::string> metrics_columns(std::size_t classes);

void write_summary(const SuiteResult& suite, const std::filesystem::path& path);

// Writes text to path via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace anl

#endif // ANL_EXPERIMENT_HPP
