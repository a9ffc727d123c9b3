#include "anl/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "anl/error.hpp"
#include "anl/noise.hpp"
#include "anl/optim.hpp"
#include "anl/rng.hpp"

namespace anl {

const MetricsRecord& ExperimentResult::final_record() const {
    if (records.empty()) throw StateError("experiment produced no records");
    return records.back();
}

namespace {

Index argmax_row(const Eigen::MatrixXd& m, Index row) {
    Index best = 0;
    m.row(row).maxCoeff(&best);
    return best;
}

std::vector<int> predict_labels(const Network& net, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd p = net.predict(x);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(argmax_row(p, i));
    return out;
}

std::vector<Index> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const Index> rows) {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
}

// Plain SGD training loop shared by the main run and the noise probe.
struct TrainHooks {
    std::function<void(int epoch, int batch, double lr, double loss)> after_batch;
    std::function<void(int epoch, double lr, double mean_loss)> after_epoch;
};

void fit_network(Network& net, const Dataset& data, const LossSpec& loss,
                 const OptimizerConfig& opt, std::uint64_t seed, const TrainHooks& hooks) {
    MomentumState state{ParamSet::zeros_like(net.layers())};
    const std::size_t n = static_cast<std::size_t>(data.size());
    const std::size_t bs = static_cast<std::size_t>(opt.batch_size);
    std::vector<int> labels;
    std::vector<double> batch_losses;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, opt.epochs, opt.lr0);
        const auto order = shuffled(n, keyed(seed, stream::shuffle, static_cast<std::uint64_t>(epoch)));
        batch_losses.clear();
        int batch = 0;
        for (std::size_t start = 0; start < n; start += bs, ++batch) {
            const std::size_t stop = std::min(n, start + bs);
            const std::span<const Index> rows(order.data() + start, stop - start);
            labels.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                labels[i] = data.labels[static_cast<std::size_t>(rows[i])];
            }
            const Eigen::MatrixXd& probs = net.forward(gather_rows(data.features, rows));
            const auto eval = eval_framework_loss<double>(loss, BatchContext::from_probs(probs), labels);
            if (!std::isfinite(eval.value)) {
                throw Error("non-finite training loss at epoch " + std::to_string(epoch + 1));
            }
            const ParamSet grads = net.backward(eval.grad_p);
            sgd_step(net, grads, opt, state, lr);
            // Weighted by batch size so the epoch mean is a per-sample mean.
            batch_losses.push_back(eval.value * static_cast<double>(rows.size()));
            if (hooks.after_batch) hooks.after_batch(epoch + 1, batch, lr, eval.value);
        }
        const double mean = pairwise_sum<double>(batch_losses) / static_cast<double>(n);
        if (hooks.after_epoch) hooks.after_epoch(epoch + 1, lr, mean);
    }
}

NetworkConfig network_config(const ExperimentConfig& cfg, const Dataset& train,
                             std::uint64_t init_seed) {
    NetworkConfig nc;
    nc.input_dim = train.dim();
    nc.hidden_dims = cfg.model.hidden;
    nc.classes = train.classes;
    nc.activation = cfg.model.activation;
    nc.init_seed = init_seed;
    nc.p_min = cfg.model.p_min;
    return nc;
}

} // namespace

double accuracy(const Network& net, const Eigen::MatrixXd& features, std::span<const int> labels) {
    if (labels.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto pred = predict_labels(net, features);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& dc = cfg.dataset;
    Dataset train;
    Dataset test;
    switch (dc.source) {
    case DataSource::Blobs: {
        const std::uint64_t s = dc.seed.value_or(keyed(cfg.seed, stream::data, 0));
        auto all = gen_gaussian_blobs(dc.classes, dc.train_per_class + dc.test_per_class, dc.dim,
                                      dc.spread, s, dc.center_distance);
        auto split = split_per_class(all, dc.train_per_class);
        train = std::move(split.train);
        test = std::move(split.test);
        break;
    }
    case DataSource::Idx:
        train = load_idx(dc.train_images, dc.train_labels);
        test = load_idx(dc.test_images, dc.test_labels);
        break;
    case DataSource::Csv:
        train = load_csv(dc.train_csv);
        test = load_csv(dc.test_csv, train.classes);
        break;
    }
    const int k = std::max(train.classes, test.classes);
    train.classes = k;
    test.classes = k;
    if (train.dim() != test.dim()) {
        throw ConfigError("dataset", "train and test feature dimensions differ");
    }
    if (dc.standardize) {
        const Dataset others[] = {test};
        auto z = standardize(train, others);
        train = std::move(z[0]);
        test = std::move(z[1]);
    }

    NoiseSpec spec = cfg.noise.spec;
    spec.validate(k);
    if (!cfg.noise.seed_given) spec.seed = keyed(cfg.seed, stream::noise, 0);

    PreparedData out;
    const std::vector<int> clean = train.clean_labels.value_or(train.labels);
    switch (spec.kind) {
    case NoiseKind::None:
        out.noise_method = "none";
        out.flip_mask.assign(clean.size(), false);
        break;
    case NoiseKind::Symmetric:
    case NoiseKind::AsymmetricPairmap:
    case NoiseKind::AsymmetricCircular: {
        auto rec = corrupt_labels(clean, build_transition(spec, k), spec.seed);
        train.labels = std::move(rec.noisy_labels);
        out.flip_mask = std::move(rec.flip_mask);
        out.noise_method = std::string(to_string(spec.kind));
        break;
    }
    case NoiseKind::InstanceDependent: {
        Dataset clean_train = train;
        clean_train.labels = clean;
        Network probe(network_config(cfg, train, keyed(cfg.seed, stream::probe, 1)));
        OptimizerConfig popt = cfg.optimizer;
        popt.epochs = cfg.noise.probe_epochs;
        popt.l1_coeff = 0.0;
        fit_network(probe, clean_train, BaseLoss::ce(), popt, keyed(cfg.seed, stream::probe, 2), {});
        auto rec = instance_dependent_corrupt(train.features, clean, spec.eta, probe, spec.seed);
        train.labels = std::move(rec.noisy_labels);
        out.flip_mask = std::move(rec.flip_mask);
        out.noise_method = std::move(rec.method);
        break;
    }
    case NoiseKind::External: {
        train = load_label_overlay(cfg.noise.overlay, train);
        const auto& orig = *train.clean_labels;
        out.flip_mask.resize(orig.size());
        for (std::size_t i = 0; i < orig.size(); ++i) out.flip_mask[i] = orig[i] != train.labels[i];
        out.noise_method = "external_overlay";
        break;
    }
    }
    if (!train.clean_labels) train.clean_labels = clean;
    train.validate();
    test.validate();
    out.train = std::move(train);
    out.test = std::move(test);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    PreparedData data = prepare_data(cfg);
    const Dataset& tr = data.train;
    const int k = tr.classes;

    // Row sets of the two partitions, fixed for the whole run.
    std::vector<Index> clean_rows;
    std::vector<Index> noisy_rows;
    for (std::size_t i = 0; i < data.flip_mask.size(); ++i) {
        (data.flip_mask[i] ? noisy_rows : clean_rows).push_back(static_cast<Index>(i));
    }
    auto labels_of = [&](const std::vector<Index>& rows) {
        std::vector<int> out(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) out[i] = tr.labels[static_cast<std::size_t>(rows[i])];
        return out;
    };
    const Eigen::MatrixXd clean_x = gather_rows(tr.features, clean_rows);
    const Eigen::MatrixXd noisy_x = gather_rows(tr.features, noisy_rows);
    const std::vector<int> clean_y = labels_of(clean_rows);
    const std::vector<int> noisy_y = labels_of(noisy_rows);

    ExperimentResult result;
    result.clean = clean_rows.size();
    result.flipped = noisy_rows.size();
    result.realized_noise_rate = realized_noise_rate(tr);
    result.noise_method = data.noise_method;

    Network net(network_config(cfg, tr, keyed(cfg.seed, stream::init, 0)));

    auto snapshot = [&](int epoch, int batch, double lr, double loss) {
        MetricsRecord r;
        r.epoch = epoch;
        r.batch = batch;
        r.lr = lr;
        r.train_loss = loss;
        r.train_acc_clean = accuracy(net, clean_x, clean_y);
        r.train_acc_noisy = accuracy(net, noisy_x, noisy_y);
        const auto pred = predict_labels(net, data.test.features);
        std::size_t hit = 0;
        r.pred_marginals.assign(static_cast<std::size_t>(k), 0.0);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            hit += pred[i] == data.test.labels[i];
            r.pred_marginals[static_cast<std::size_t>(pred[i])] += 1.0;
        }
        const double n_test = static_cast<double>(pred.size());
        for (double& m : r.pred_marginals) m /= n_test;
        r.test_acc = static_cast<double>(hit) / n_test;
        if (cfg.eval.record_wall_time) {
            r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        }
        result.records.push_back(std::move(r));
    };

    TrainHooks hooks;
    if (cfg.eval.per_batch) {
        hooks.after_batch = [&](int epoch, int batch, double lr, double loss) {
            snapshot(epoch, batch, lr, loss);
        };
    } else {
        hooks.after_epoch = [&](int epoch, double lr, double loss) { snapshot(epoch, -1, lr, loss); };
    }
    fit_network(net, tr, cfg.loss, cfg.optimizer, keyed(cfg.seed, stream::shuffle, 0), hooks);
    if (!result.records.empty()) result.records.back().is_final = true;
    return result;
}

bool SuiteResult::verification_passed() const {
    return std::all_of(verification.begin(), verification.end(),
                       [](const CheckReport& r) { return r.passed(); });
}

bool SuiteResult::all_runs_ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const SuiteRun& r) { return r.result.has_value(); });
}

std::string noise_label(const NoiseSpec& spec) {
    if (spec.kind == NoiseKind::None) return "none";
    std::string kind = spec.kind == NoiseKind::InstanceDependent ? std::string(kInstanceNoiseMethod)
                                                                 : std::string(to_string(spec.kind));
    if (spec.kind == NoiseKind::External) return kind;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", spec.eta);
    return kind + "-" + buf;
}

SuiteResult run_suite(std::span<const ExperimentConfig> configs, const SuiteOptions& opts) {
    if (opts.parallelism < 1) throw ConfigError("parallel", "must be >= 1");
    SuiteResult out;
    if (opts.verify) out.verification = run_verification_suite(opts.verify_seed);

    for (const auto& c : configs) {
        for (auto& e : expand_seeds(c)) out.runs.push_back(SuiteRun{std::move(e), std::nullopt, {}});
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < out.runs.size(); i = next++) {
            auto& run = out.runs[i];
            try {
                run.result = run_experiment(run.config);
            } catch (const std::exception& e) {
                run.error = e.what();
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(opts.parallelism), out.runs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    std::map<std::pair<std::string, std::string>, std::size_t> index;
    std::vector<std::vector<double>> accs;
    for (const auto& run : out.runs) {
        const auto key = std::pair{describe(run.config.loss), noise_label(run.config.noise.spec)};
        auto [it, inserted] = index.try_emplace(key, out.rows.size());
        if (inserted) {
            SuiteRow row;
            row.method = key.first;
            row.noise = key.second;
            out.rows.push_back(std::move(row));
            accs.emplace_back();
        }
        auto& row = out.rows[it->second];
        ++row.runs;
        if (run.result) {
            accs[it->second].push_back(run.result->final_record().test_acc);
        } else {
            ++row.failed;
            row.errors.push_back(run.config.name + " seed " + std::to_string(run.config.seed) +
                                 ": " + run.error);
        }
    }
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        const auto& v = accs[r];
        if (v.empty()) {
            out.rows[r].mean_test_acc = std::numeric_limits<double>::quiet_NaN();
            out.rows[r].std_test_acc = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        out.rows[r].mean_test_acc = mean;
        out.rows[r].std_test_acc = std::sqrt(var / static_cast<double>(v.size()));
    }
    return out;
}

// --- Metrics files ---------------------------------------------------------

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double number_from_json(const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

bool has_batches(std::span<const MetricsRecord> records) {
    return std::any_of(records.begin(), records.end(), [](const MetricsRecord& r) { return r.batch >= 0; });
}

} // namespace

std::vector<std::string> metrics_columns(std::size_t classes) {
    std::vector<std::string> cols = {"epoch", "lr", "train_loss", "train_acc_clean",
                                     "train_acc_noisy", "test_acc"};
    for (std::size_t c = 0; c < classes; ++c) cols.push_back("pred_marginal_" + std::to_string(c));
    cols.push_back("wall_ms");
    return cols;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
        os << contents;
        os.flush();
        if (!os) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move metrics into place at '" + path.string() + "'");
    }
}

void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path,
                  MetricsFormat format) {
    const std::size_t k = records.empty() ? 0 : records.front().pred_marginals.size();
    for (const auto& r : records) {
        if (r.pred_marginals.size() != k) throw ShapeError("records disagree on the class count");
    }
    const bool batches = has_batches(records);
    auto cols = metrics_columns(k);
    if (batches) cols.push_back("batch");

    std::ostringstream os;
    if (format == MetricsFormat::Csv) {
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
        os << '\n';
        for (const auto& r : records) {
            os << r.epoch << ',' << g17(r.lr) << ',' << g17(r.train_loss) << ','
               << g17(r.train_acc_clean) << ',' << g17(r.train_acc_noisy) << ',' << g17(r.test_acc);
            for (double m : r.pred_marginals) os << ',' << g17(m);
            os << ',' << r.wall_ms;
            if (batches) os << ',' << r.batch;
            os << '\n';
        }
    } else {
        for (const auto& r : records) {
            // Numbers are rendered by hand to pin the 17-digit format.
            nlohmann::ordered_json j;
            j["epoch"] = r.epoch;
            j["lr"] = json_number(r.lr);
            j["train_loss"] = json_number(r.train_loss);
            j["train_acc_clean"] = json_number(r.train_acc_clean);
            j["train_acc_noisy"] = json_number(r.train_acc_noisy);
            j["test_acc"] = json_number(r.test_acc);
            for (std::size_t c = 0; c < k; ++c) {
                j["pred_marginal_" + std::to_string(c)] = json_number(r.pred_marginals[c]);
            }
            j["wall_ms"] = r.wall_ms;
            if (batches) j["batch"] = r.batch;
            std::string line = "{";
            bool first = true;
            for (const auto& [key, v] : j.items()) {
                line += first ? "" : ",";
                first = false;
                line += nlohmann::json(key).dump() + ":";
                line += v.is_number_float() ? g17(v.get<double>()) : v.dump();
            }
            os << line << "}\n";
        }
    }
    write_atomic(path, os.str());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, MetricsFormat format) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::vector<MetricsRecord> out;
    std::string line;
    if (format == MetricsFormat::Csv) {
        if (!std::getline(is, line)) return out;
        std::vector<std::string> header;
        {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) header.push_back(cell);
        }
        std::size_t k = 0;
        while (std::find(header.begin(), header.end(), "pred_marginal_" + std::to_string(k)) != header.end()) ++k;
        const bool batches = !header.empty() && header.back() == "batch";
        if (header.size() != metrics_columns(k).size() + (batches ? 1 : 0)) {
            throw FormatError(path.string() + ": unexpected metrics header");
        }
        std::size_t lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != header.size()) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
            }
            MetricsRecord r;
            try {
                r.epoch = std::stoi(cells[0]);
                r.lr = std::strtod(cells[1].c_str(), nullptr);
                r.train_loss = std::strtod(cells[2].c_str(), nullptr);
                r.train_acc_clean = std::strtod(cells[3].c_str(), nullptr);
                r.train_acc_noisy = std::strtod(cells[4].c_str(), nullptr);
                r.test_acc = std::strtod(cells[5].c_str(), nullptr);
                for (std::size_t c = 0; c < k; ++c) r.pred_marginals.push_back(std::strtod(cells[6 + c].c_str(), nullptr));
                r.wall_ms = std::stoll(cells[6 + k]);
                if (batches) r.batch = std::stoi(cells[7 + k]);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
            }
            out.push_back(std::move(r));
        }
    } else {
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                MetricsRecord r;
                r.epoch = j.at("epoch").get<int>();
                r.lr = number_from_json(j.at("lr"));
                r.train_loss = number_from_json(j.at("train_loss"));
                r.train_acc_clean = number_from_json(j.at("train_acc_clean"));
                r.train_acc_noisy = number_from_json(j.at("train_acc_noisy"));
                r.test_acc = number_from_json(j.at("test_acc"));
                for (std::size_t c = 0; j.contains("pred_marginal_" + std::to_string(c)); ++c) {
                    r.pred_marginals.push_back(number_from_json(j.at("pred_marginal_" + std::to_string(c))));
                }
                r.wall_ms = j.at("wall_ms").get<std::int64_t>();
                if (j.contains("batch")) r.batch = j.at("batch").get<int>();
                out.push_back(std::move(r));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    if (!out.empty()) out.back().is_final = true;
    return out;
}

void write_summary(const SuiteResult& suite, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,noise,runs,failed,mean_test_acc,std_test_acc\n";
    for (const auto& r : suite.rows) {
        os << r.method << ',' << r.noise << ',' << r.runs << ',' << r.failed << ','
           << g17(r.mean_test_acc) << ',' << g17(r.std_test_acc) << '\n';
    }
    write_atomic(path, os.str());
}

} // namespace anl
