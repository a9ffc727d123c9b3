#ifndef ANL_CONFIG_HPP
#define ANL_CONFIG_HPP

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anl/loss_framework.hpp"
#include "anl/network.hpp"
#include "anl/noise.hpp"
#include "anl/optim.hpp"

namespace anl {

enum class DataSource { Blobs, Idx, Csv };
enum class MetricsFormat { Csv, Jsonl };

std::string_view to_string(DataSource s);
std::string_view to_string(MetricsFormat f);
MetricsFormat metrics_format_from_string(std::string_view name);

struct DatasetConfig {
    DataSource source = DataSource::Blobs;

    // blobs
    int classes = 10;
    int train_per_class = 500;
    int test_per_class = 100;
    int dim = 20;
    double spread = 1.0;
    double center_distance = 0.0; // 0 selects the generator default
    std::optional<std::uint64_t> seed; // defaults to a key of the experiment seed

    // idx / csv
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::filesystem::path train_csv, test_csv;

    bool standardize = true;
};

struct NoiseConfig {
    NoiseSpec spec;
    bool seed_given = false;          // spec.seed was set explicitly
    std::filesystem::path overlay;    // external
    int probe_epochs = 10;            // instance_dependent
};

struct ModelConfig {
    std::vector<Index> hidden = {64};
    Activation activation = Activation::Relu;
    double p_min = kDefaultProbFloor;
};

struct EvalConfig {
    bool per_batch = false;        // metric cadence; epoch-level by default
    bool record_wall_time = false; // wall_ms is 0 otherwise, keeping files byte-stable
};

struct ExperimentConfig {
    std::string name = "run";
    DatasetConfig dataset;
    NoiseConfig noise;
    LossSpec loss = BaseLoss::ce();
    ModelConfig model;
    OptimizerConfig optimizer;
    EvalConfig eval;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds; // explicit multi-seed list, used by suites
    std::filesystem::path output;
    MetricsFormat format = MetricsFormat::Csv;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Parses one experiment block; unknown keys are rejected.  base_dir
// resolves relative file paths.
ExperimentConfig parse_experiment(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

// A suite file is either an array of experiment blocks or
// {"configs": [...]}; each entry may also be a path to an experiment file.
std::vector<ExperimentConfig> load_suite(const std::filesystem::path& path);

nlohmann::json loss_to_json(const LossSpec& spec);
LossSpec loss_from_json(const nlohmann::json& j, double p_min, OptimizerConfig* optimizer = nullptr);

nlohmann::json to_json(const ExperimentConfig& cfg);

// Parameter block of a named preset, or nullopt.
struct LossPreset {
    LossSpec loss;
    double l1_coeff = 0.0;
    double weight_decay = 0.0;
};
std::optional<LossPreset> find_preset(std::string_view name, double p_min = kDefaultProbFloor);
std::vector<std::string> preset_names();

// One config per entry of cfg.seeds (or cfg itself when the list is empty).
std::vector<ExperimentConfig> expand_seeds(const ExperimentConfig& cfg);

} // namespace anl

#endif // ANL_CONFIG_HPP
