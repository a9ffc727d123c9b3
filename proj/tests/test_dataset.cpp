#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anl/dataset.hpp"

using namespace anl;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "anl_test_dataset";
    fs::create_directories(dir);
    return dir / name;
}
void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Dataset tiny() {
    Dataset ds;
    ds.classes = 3;
    ds.features = Eigen::MatrixXd::Zero(4, 2);
    ds.labels = {0, 1, 2, 0};
    return ds;
}
} // namespace

TEST_CASE("blobs are balanced and deterministic") {
    const Dataset a = gen_gaussian_blobs(3, 100, 5, 1.0, 42);
    CHECK(a.size() == 300);
    std::vector<int> counts(3, 0);
    for (int y : a.labels) counts[static_cast<std::size_t>(y)]++;
    CHECK(counts == std::vector<int>{100, 100, 100});
    const Dataset b = gen_gaussian_blobs(3, 100, 5, 1.0, 42);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(gen_gaussian_blobs(3, 100, 5, 1.0, 43).features != a.features);
}

TEST_CASE("tight blobs are separated by the nearest class mean") {
    const Dataset ds = gen_gaussian_blobs(10, 50, 8, 1e-6, 7);
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(10, 8);
    for (Index n = 0; n < ds.size(); ++n) means.row(ds.labels[n]) += ds.features.row(n) / 50.0;
    for (Index n = 0; n < ds.size(); ++n) {
        Index best = 0;
        (means.rowwise() - ds.features.row(n)).rowwise().squaredNorm().minCoeff(&best);
        CHECK(best == ds.labels[n]);
    }
}

TEST_CASE("per-class split") {
    const auto s = split_per_class(gen_gaussian_blobs(4, 30, 3, 1.0, 1), 20);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 40);
}

TEST_CASE("IDX round trip") {
    const std::vector<std::uint8_t> pixels = {0, 1, 2, 3, 250, 251, 252, 255};
    const std::vector<std::uint8_t> labels = {3, 7};
    write_idx_images(scratch("img.idx"), pixels, 2, 2, 2);
    write_idx_labels(scratch("lab.idx"), labels);
    const Dataset ds = load_idx(scratch("img.idx"), scratch("lab.idx"));
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 4);
    CHECK(ds.labels == std::vector<int>{3, 7});
    for (Index i = 0; i < 8; ++i) CHECK(ds.features(i / 4, i % 4) == double(pixels[i]) / 255.0);
}

TEST_CASE("IDX at the published MNIST test-set sizes") {
    const std::uint32_t n = 10000;
    std::vector<std::uint8_t> pixels(std::size_t(n) * 784);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 31);
    std::vector<std::uint8_t> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
    write_idx_images(scratch("t10k-images"), pixels, n, 28, 28);
    write_idx_labels(scratch("t10k-labels"), labels);
    CHECK(fs::file_size(scratch("t10k-images")) == 7840016);
    CHECK(fs::file_size(scratch("t10k-labels")) == 10008);
    const Dataset ds = load_idx(scratch("t10k-images"), scratch("t10k-labels"));
    CHECK(ds.size() == 10000);
    CHECK(ds.dim() == 784);
    CHECK(ds.classes == 10);
}

TEST_CASE("IDX format errors") {
    const std::vector<std::uint8_t> pixels(8, 1);
    const std::vector<std::uint8_t> labels = {0, 1};
    write_idx_images(scratch("img2.idx"), pixels, 2, 2, 2);
    write_idx_labels(scratch("lab2.idx"), labels);
    CHECK_THROWS_AS(load_idx(scratch("img2.idx"), scratch("img2.idx")), FormatError);
    CHECK_THROWS_AS(load_idx(scratch("lab2.idx"), scratch("lab2.idx")), FormatError);

    const auto size = fs::file_size(scratch("img2.idx"));
    fs::resize_file(scratch("img2.idx"), size - 3);
    try {
        load_idx(scratch("img2.idx"), scratch("lab2.idx"));
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("CSV round trip and errors") {
    const Dataset a = gen_gaussian_blobs(3, 4, 2, 1.0, 5);
    write_csv(a, scratch("a.csv"));
    const Dataset b = load_csv(scratch("a.csv"));
    CHECK(b.labels == a.labels);
    CHECK(b.features == a.features);
    CHECK(b.classes == 3);

    write_text(scratch("bad.csv"), "label,f1\n0,1.5\n1,x\n");
    try {
        load_csv(scratch("bad.csv"));
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
}

TEST_CASE("standardisation") {
    Dataset train = tiny();
    train.features << 1, 5, 3, 5, 5, 5, 7, 5;
    Dataset test = tiny();
    test.features << 4, 1, 4, 1, 4, 1, 4, 1;
    const std::vector<Dataset> others = {test};
    const auto out = standardize(train, others);
    CHECK(std::abs(out[0].features.col(0).mean()) < 1e-15);
    CHECK(out[0].features.col(0).squaredNorm() / 4 == doctest::Approx(1.0));
    CHECK(out[0].features.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out[1].features.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out[1].features(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("label overlays") {
    const Dataset ds = tiny();
    write_text(scratch("empty.csv"), "index,label\n");
    const Dataset same = load_label_overlay(scratch("empty.csv"), ds);
    CHECK(same.labels == ds.labels);
    CHECK(realized_noise_rate(same) == 0.0);

    const std::vector<Index> idx = {0, 1, 2, 3};
    const std::vector<int> flipped = {1, 2, 0, 2};
    write_label_overlay(scratch("all.csv"), idx, flipped);
    const Dataset all = load_label_overlay(scratch("all.csv"), ds);
    CHECK(all.labels == flipped);
    CHECK(realized_noise_rate(all) == 1.0);

    write_text(scratch("dup.csv"), "index,label\n1,0\n1,2\n");
    CHECK_THROWS_AS(load_label_overlay(scratch("dup.csv"), ds), FormatError);
    write_text(scratch("range.csv"), "index,label\n9,0\n");
    CHECK_THROWS_AS(load_label_overlay(scratch("range.csv"), ds), FormatError);
    write_text(scratch("lab.csv"), "index,label\n0,0\n2,3\n");
    try {
        load_label_overlay(scratch("lab.csv"), ds);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
}
