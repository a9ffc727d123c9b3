#ifndef ANL_DATASET_HPP
#define ANL_DATASET_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "anl/prob.hpp"

namespace anl {

struct Dataset {
    Eigen::MatrixXd features; // N x d
    std::vector<int> labels;
    int classes = 0;
    std::optional<std::vector<int>> clean_labels;

    Index size() const noexcept { return features.rows(); }
    Index dim() const noexcept { return features.cols(); }

    // Throws FormatError when labels, features or clean labels are inconsistent.
    void validate() const;

    Dataset subset(std::span<const Index> rows) const;
};

// Fraction of labels that differ from clean_labels (0 when there are none).
double realized_noise_rate(const Dataset& ds);

/*
 * Balanced isotropic Gaussian classes.  Centres are seeded Gaussian draws
 * rescaled so the closest pair sits exactly center_distance apart
 * (default max(4 * spread, 1)); samples are centre + spread * N(0, I), stored class
 * by class.
 */
Dataset gen_gaussian_blobs(int classes, int per_class, int dim, double spread,
                           std::uint64_t seed, double center_distance = 0.0);

// Splits a class-ordered dataset, first train_per_class of each class to train.
struct TrainTest {
    Dataset train;
    Dataset test;
};
TrainTest split_per_class(const Dataset& ds, int train_per_class);

// IDX (big-endian): images magic 2051, labels magic 2049. Pixels scaled to [0,1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// CSV with header "label,f1,...,fd".
Dataset load_csv(const std::filesystem::path& path, int classes = 0);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Per-feature affine map fitted on one dataset.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale; // 1/std, or 0 for constant features

    static Standardizer fit(const Dataset& train);
    Dataset apply(const Dataset& ds) const;
};

// Standardises train and every other dataset with the train statistics.
// Returns train first, then the others in order.
std::vector<Dataset> standardize(const Dataset& train, std::span<const Dataset> others);

/*
 * Overlay of externally supplied noisy labels: header "index,label", then
 * one "index,noisy_label" record per line, indices strictly ascending.
 * Listed labels are replaced; the original labels move to clean_labels
 * unless already present.
 */
Dataset load_label_overlay(const std::filesystem::path& path, const Dataset& ds);
void write_label_overlay(const std::filesystem::path& path, std::span<const Index> indices,
                         std::span<const int> labels);

} // namespace anl

#endif // ANL_DATASET_HPP
