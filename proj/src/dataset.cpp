#include "anl/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "anl/error.hpp"
#include "anl/rng.hpp"

namespace anl {

void Dataset::validate() const {
    if (classes < 2) throw FormatError("dataset needs at least two classes");
    if (static_cast<Index>(labels.size()) != features.rows()) {
        throw FormatError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                          std::to_string(labels.size()) + " labels");
    }
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || labels[n] >= classes) {
            throw FormatError("label " + std::to_string(labels[n]) + " at row " +
                              std::to_string(n) + " out of range for K=" + std::to_string(classes));
        }
    }
    if (!features.allFinite()) throw FormatError("dataset has non-finite features");
    if (clean_labels && clean_labels->size() != labels.size()) {
        throw FormatError("clean label count differs from label count");
    }
}

Dataset Dataset::subset(std::span<const Index> rows) const {
    Dataset out;
    out.classes = classes;
    out.features.resize(static_cast<Index>(rows.size()), dim());
    out.labels.resize(rows.size());
    if (clean_labels) out.clean_labels.emplace(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index r = rows[i];
        out.features.row(static_cast<Index>(i)) = features.row(r);
        out.labels[i] = labels[static_cast<std::size_t>(r)];
        if (clean_labels) (*out.clean_labels)[i] = (*clean_labels)[static_cast<std::size_t>(r)];
    }
    return out;
}

double realized_noise_rate(const Dataset& ds) {
    if (!ds.clean_labels || ds.labels.empty()) return 0.0;
    std::size_t flips = 0;
    for (std::size_t n = 0; n < ds.labels.size(); ++n) flips += ds.labels[n] != (*ds.clean_labels)[n];
    return static_cast<double>(flips) / static_cast<double>(ds.labels.size());
}

// ---------------------------------------------------------------------------
// Synthetic blobs
// ---------------------------------------------------------------------------

Dataset gen_gaussian_blobs(int classes, int per_class, int dim, double spread,
                           std::uint64_t seed, double center_distance) {
    if (classes < 2) throw InvalidInput("blobs: K must be >= 2");
    if (dim < 2) throw InvalidInput("blobs: d must be >= 2");
    if (per_class < 1) throw InvalidInput("blobs: per_class must be positive");
    if (!(spread >= 0.0)) throw InvalidInput("blobs: spread must be nonnegative");
    if (center_distance <= 0.0) center_distance = std::max(4.0 * spread, 1.0);
    if (!(center_distance > 0.0)) throw InvalidInput("blobs: centre distance must be positive");

    Rng centre_rng(keyed(seed, stream::data, 0));
    Eigen::MatrixXd centres(classes, dim);
    for (int c = 0; c < classes; ++c)
        for (int j = 0; j < dim; ++j) centres(c, j) = centre_rng.normal();
    double closest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < classes; ++a)
        for (int b = a + 1; b < classes; ++b)
            closest = std::min(closest, (centres.row(a) - centres.row(b)).norm());
    centres *= center_distance / closest;

    Dataset ds;
    ds.classes = classes;
    ds.features.resize(static_cast<Index>(classes) * per_class, dim);
    ds.labels.resize(static_cast<std::size_t>(classes) * static_cast<std::size_t>(per_class));
    Rng sample_rng(keyed(seed, stream::data, 1));
    Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            for (int j = 0; j < dim; ++j) {
                ds.features(row, j) = centres(c, j) + spread * sample_rng.normal();
            }
            ds.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return ds;
}

TrainTest split_per_class(const Dataset& ds, int train_per_class) {
    std::vector<int> seen(static_cast<std::size_t>(ds.classes), 0);
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    for (Index n = 0; n < ds.size(); ++n) {
        const int y = ds.labels[static_cast<std::size_t>(n)];
        (seen[static_cast<std::size_t>(y)]++ < train_per_class ? train_rows : test_rows).push_back(n);
    }
    return {ds.subset(train_rows), ds.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                   const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError(path.string() + ": truncated header at offset " + std::to_string(offset));
    }
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                static_cast<char>(v >> 8), static_cast<char>(v)};
    os.write(b.data(), 4);
}

constexpr std::uint32_t kIdxImages = 2051;
constexpr std::uint32_t kIdxLabels = 2049;

} // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);

    const std::uint32_t img_magic = be32(img, 0, images);
    if (img_magic != kIdxImages) {
        throw FormatError(images.string() + ": expected image magic 2051 at offset 0, got " +
                          std::to_string(img_magic));
    }
    const std::uint32_t lab_magic = be32(lab, 0, labels);
    if (lab_magic != kIdxLabels) {
        throw FormatError(labels.string() + ": expected label magic 2049 at offset 0, got " +
                          std::to_string(lab_magic));
    }
    const std::uint32_t n = be32(img, 4, images);
    const std::uint32_t rows = be32(img, 8, images);
    const std::uint32_t cols = be32(img, 12, images);
    const std::uint32_t n_labels = be32(lab, 4, labels);
    if (n != n_labels) {
        throw FormatError(labels.string() + ": label count " + std::to_string(n_labels) +
                          " at offset 4 differs from image count " + std::to_string(n));
    }
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    const std::size_t need_img = 16 + static_cast<std::size_t>(n) * pixels;
    if (img.size() < need_img) {
        throw FormatError(images.string() + ": truncated pixel data at offset " +
                          std::to_string(img.size()) + ", expected " + std::to_string(need_img) +
                          " bytes");
    }
    if (lab.size() < 8 + static_cast<std::size_t>(n)) {
        throw FormatError(labels.string() + ": truncated label data at offset " +
                          std::to_string(lab.size()));
    }

    Dataset ds;
    ds.features.resize(n, static_cast<Index>(pixels));
    ds.labels.resize(n);
    int max_label = 1;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < pixels; ++j) {
            ds.features(i, static_cast<Index>(j)) = img[16 + i * pixels + j] / 255.0;
        }
        ds.labels[i] = lab[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = max_label + 1;
    ds.validate();
    return ds;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
        throw InvalidInput("write_idx_images: pixel count does not match dimensions");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(os, kIdxImages);
    put_be32(os, count);
    put_be32(os, rows);
    put_be32(os, cols);
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(os, kIdxLabels);
    put_be32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, int classes) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path.string() + ": empty file");
    const auto header = split_commas(trim(line));
    if (header.size() < 2 || trim(header[0]) != "label") {
        throw FormatError(path.string() + ":1: header must be label,f1,...,fd");
    }
    const std::size_t d = header.size() - 1;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        const auto fields = split_commas(t);
        if (fields.size() != d + 1) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(d + 1) + " fields");
        }
        int y = 0;
        if (!parse_number(fields[0], y) || y < 0) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad label");
        }
        labels.push_back(y);
        for (std::size_t j = 1; j <= d; ++j) {
            double v = 0.0;
            if (!parse_number(fields[j], v)) {
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": bad feature value");
            }
            values.push_back(v);
        }
    }
    Dataset ds;
    ds.features.resize(static_cast<Index>(labels.size()), static_cast<Index>(d));
    for (std::size_t n = 0; n < labels.size(); ++n)
        for (std::size_t j = 0; j < d; ++j)
            ds.features(static_cast<Index>(n), static_cast<Index>(j)) = values[n * d + j];
    ds.labels = std::move(labels);
    const int max_label = ds.labels.empty() ? 1 : *std::max_element(ds.labels.begin(), ds.labels.end());
    ds.classes = classes > 0 ? classes : std::max(2, max_label + 1);
    ds.validate();
    return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "label";
    for (Index j = 0; j < ds.dim(); ++j) os << ",f" << (j + 1);
    os << '\n';
    char buf[32];
    for (Index n = 0; n < ds.size(); ++n) {
        os << ds.labels[static_cast<std::size_t>(n)];
        for (Index j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features(n, j));
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Standardisation
// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Dataset& train) {
    if (train.size() < 1) throw InvalidInput("standardize: empty training set");
    Standardizer s;
    s.mean = train.features.colwise().mean();
    const Eigen::MatrixXd centred = train.features.rowwise() - s.mean;
    const Eigen::RowVectorXd var = centred.cwiseAbs2().colwise().mean();
    s.scale.resize(var.size());
    for (Index j = 0; j < var.size(); ++j) {
        const double sd = std::sqrt(var[j]);
        s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? 1.0 / sd : 0.0;
    }
    return s;
}

Dataset Standardizer::apply(const Dataset& ds) const {
    if (ds.dim() != mean.size()) {
        throw ShapeError("standardize: dataset has " + std::to_string(ds.dim()) +
                         " features, statistics have " + std::to_string(mean.size()));
    }
    Dataset out = ds;
    out.features = ((ds.features.rowwise() - mean).array().rowwise() * scale.array()).matrix();
    return out;
}

std::vector<Dataset> standardize(const Dataset& train, std::span<const Dataset> others) {
    const Standardizer s = Standardizer::fit(train);
    std::vector<Dataset> out;
    out.reserve(others.size() + 1);
    out.push_back(s.apply(train));
    for (const Dataset& d : others) out.push_back(s.apply(d));
    return out;
}

// ---------------------------------------------------------------------------
// Label overlays
// ---------------------------------------------------------------------------

Dataset load_label_overlay(const std::filesystem::path& path, const Dataset& ds) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || trim(line) != "index,label") {
        throw FormatError(path.string() + ":1: header must be index,label");
    }
    Dataset out = ds;
    if (!out.clean_labels) out.clean_labels = ds.labels;
    long long prev = -1;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
        const auto fields = split_commas(t);
        long long index = 0;
        int label = 0;
        if (fields.size() != 2 || !parse_number(fields[0], index) || !parse_number(fields[1], label)) {
            throw FormatError(where + "expected index,noisy_label");
        }
        if (index < 0 || index >= static_cast<long long>(ds.size())) {
            throw FormatError(where + "index " + std::to_string(index) + " out of range");
        }
        if (index == prev) throw FormatError(where + "duplicate index " + std::to_string(index));
        if (index < prev) throw FormatError(where + "indices must be ascending");
        if (label < 0 || label >= ds.classes) {
            throw FormatError(where + "label " + std::to_string(label) + " out of range");
        }
        out.labels[static_cast<std::size_t>(index)] = label;
        prev = index;
    }
    return out;
}

void write_label_overlay(const std::filesystem::path& path, std::span<const Index> indices,
                         std::span<const int> labels) {
    if (indices.size() != labels.size()) throw InvalidInput("overlay: index/label count mismatch");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "index,label\n";
    for (std::size_t i = 0; i < indices.size(); ++i) os << indices[i] << ',' << labels[i] << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

} // namespace anl
