// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "anl/experiment.hpp"
#include "anl/verification.hpp"

using namespace anl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;
const std::vector<int> kSweepK = {2, 3, 10, 100};
const std::vector<std::uint64_t> kRunSeeds = {1, 2, 3};

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Detail {
public:
    template <typename... Args>
    void add(const char* fmt, Args... args) {
        char buf[512];
        std::snprintf(buf, sizeof buf, fmt, args...);
        if (!text_.empty()) text_ += "; ";
        text_ += buf;
    }
    void report(const CheckReport& r) {
        add("%s failures=%ld/%ld worst=%.3g", r.name.c_str(), r.failures, r.trials, r.worst_error);
    }
    const std::string& str() const { return text_; }

private:
    std::string text_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LossSpec nnlf_of(BaseLoss active) { return FrameworkLossSpec::nnlf(active); }

Outcome symmetry() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ce = check_symmetry(BaseLoss::ce(), kSweepK, 1000, 1e-9, kSeed);
    const auto fl = check_symmetry(BaseLoss::fl(0.5), kSweepK, 1000, 1e-9, kSeed + 1);
    const double secs = seconds_since(t0);
    Detail d;
    d.add("NNCE failures=%ld/%ld worst_rel=%.3g", ce.failures, ce.trials, ce.worst_error);
    d.add("NNFL failures=%ld/%ld worst_rel=%.3g", fl.failures, fl.trials, fl.worst_error);
    d.add("%.2fs", secs);
    return {ce.passed() && fl.passed() && ce.trials == 4000 && fl.trials == 4000 && secs < 10.0,
            d.str()};
}

Outcome boundedness() {
    const std::vector<std::pair<std::string, LossSpec>> losses = {
        {"nnce", nnlf_of(BaseLoss::ce())},
        {"nnfl", nnlf_of(BaseLoss::fl(0.5))},
        {"nce", FrameworkLossSpec::normalized(BaseLoss::ce())},
        {"nfl", FrameworkLossSpec::normalized(BaseLoss::fl(0.5))},
    };
    Outcome out;
    Detail d;
    for (const auto& [name, spec] : losses) {
        const auto r = check_boundedness(name, point_loss(spec), kSweepK, 1000, kSeed);
        out.pass = out.pass && r.passed() && r.trials == 4000;
        d.add("%s failures=%ld/%ld", name.c_str(), r.failures, r.trials);
    }
    out.detail = d.str();
    return out;
}

Outcome gradient_fidelity() {
    Outcome out;
    Detail d;
    const auto losses = gradient_check_losses();
    double worst = 0.0;
    long failures = 0;
    for (const auto& [name, spec] : losses) {
        const auto r = check_gradient_fidelity(spec, 10, 1000, 1e-4, kSeed);
        worst = std::max(worst, r.worst_error);
        failures += r.failures;
        if (!r.passed() || r.trials < 1000) {
            out.pass = false;
            d.add("%s failures=%ld/%ld", name.c_str(), r.failures, r.trials);
        }
    }
    d.add("%zu losses x 1000 points, failures=%ld worst_rel=%.3g", losses.size(), failures, worst);
    const auto mae = check_mae_gradient(10, 1000, kSeed);
    const auto nnce = check_nnce_formula(10, 1000, 1e-10, kSeed);
    out.pass = out.pass && losses.size() >= 11 && mae.passed() && nnce.passed();
    d.report(mae);
    d.report(nnce);
    out.detail = d.str();
    return out;
}

Outcome ordering() {
    Outcome out;
    Detail d;
    const auto good = check_gradient_ordering(10000, kSeed);
    out.pass = good.class_ordering.passed() && good.class_ordering.trials >= 10000 &&
               good.sample_ordering.passed() && good.sample_ordering.trials >= 1000;
    d.add("within-sample failures=%ld/%ld", good.class_ordering.failures, good.class_ordering.trials);
    d.add("across-sample failures=%ld/%ld", good.sample_ordering.failures, good.sample_ordering.trials);

    OrderingOptions swapped;
    swapped.expect_greater = false;

    // Off-label slope proportional to p_j instead of 1 / p_j.
    OrderingOptions wrong_power;
    wrong_power.gradient = [](const Eigen::VectorXd& p, Index y) {
        const double a = loss_constant_A(BaseLoss::ce(), kDefaultProbFloor);
        Eigen::VectorXd n = (a + p.array().log()).matrix();
        const double s = n.sum();
        Eigen::VectorXd g(p.size());
        for (Index j = 0; j < p.size(); ++j) {
            g[j] = j == y ? -(s - n[y]) / p[j] / (s * s) : n[y] * p[j] / (s * s);
        }
        return g;
    };

    // Every mutant must be caught somewhere, and every check must catch some mutant.
    bool within_caught = false;
    bool across_caught = false;
    for (const auto& [name, opts] : {std::pair<const char*, OrderingOptions>{"swapped", swapped},
                                     {"p_j-for-1/p_j", wrong_power}}) {
        const auto m = check_gradient_ordering(1000, kSeed, opts);
        out.pass = out.pass && m.class_ordering.failures + m.sample_ordering.failures >= 1;
        within_caught = within_caught || m.class_ordering.failures > 0;
        across_caught = across_caught || m.sample_ordering.failures > 0;
        d.add("mutant %s violations within=%ld across=%ld", name, m.class_ordering.failures,
              m.sample_ordering.failures);
    }
    out.pass = out.pass && within_caught && across_caught;
    out.detail = d.str();
    return out;
}

Outcome affine_identity() {
    Outcome out;
    Detail d;
    const PointLoss nnce = point_loss(nnlf_of(BaseLoss::ce()));
    for (double eta : {0.1, 0.3, 0.6}) {
        const auto r = check_affine_noisy_risk("nnce", nnce, eta, 10, 1000, kSeed, 1e-10);
        const auto a = check_argmin_preservation("nnce", nnce, eta, 10, 1000, 10, kSeed);
        out.pass = out.pass && r.passed() && r.trials == 1000 && a.passed() && a.trials == 1000;
        d.add("eta=%.1f identity failures=%ld/%ld worst=%.3g argmin failures=%ld/%ld", eta,
              r.failures, r.trials, r.worst_error, a.failures, a.trials);
    }
    const auto ce = check_affine_noisy_risk("ce", point_loss(LossSpec(BaseLoss::ce())), 0.3, 10, 1000,
                                            kSeed, 1e-10);
    out.pass = out.pass && ce.failures > 0;
    d.add("CE control violations=%ld/%ld", ce.failures, ce.trials);
    out.detail = d.str();
    return out;
}

Outcome noise_statistics() {
    const auto rate = check_symmetric_noise_rate(0.4, 10, 100000, 0.005, kSeed);
    const auto pair = check_pairmap_marginals(0.4, 10000, kSeed);
    Detail d;
    d.add("%s [%s]", rate.name.c_str(), rate.note.c_str());
    d.add("%s failures=%ld [%s]", pair.name.c_str(), pair.failures, pair.note.c_str());
    return {rate.passed() && pair.passed(), d.str()};
}

Outcome entropy_regularizer() {
    const auto r = check_entropy_regularizer(1000, kSeed);
    Detail d;
    d.report(r);
    if (!r.note.empty()) d.add("%s", r.note.c_str());
    return {r.passed(), d.str()};
}

// --- desk-scale training criteria -------------------------------------------

json blob_dataset() {
    return {{"classes", 10}, {"train_per_class", 500}, {"test_per_class", 100},
            {"dim", 20},     {"spread", 1.0},          {"center_distance", 4.5}};
}

ExperimentConfig desk_run(const std::string& name, json loss, json noise, double l1) {
    auto cfg = parse_experiment(json{
        {"name", name},
        {"dataset", blob_dataset()},
        {"noise", std::move(noise)},
        {"loss", std::move(loss)},
        {"model", {{"hidden", {64}}}},
        {"optimizer",
         {{"lr", 0.1}, {"momentum", 0.9}, {"batch_size", 64}, {"epochs", 60}, {"l1", l1}}},
    });
    cfg.seeds = kRunSeeds;
    return cfg;
}

SuiteResult run_all(const std::vector<ExperimentConfig>& configs) {
    SuiteOptions opts;
    opts.verify = false;
    opts.parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return run_suite(configs, opts);
}

struct CellStats {
    double mean_acc = 0.0;
    double mean_spread = 0.0;
    double mean_noisy_acc = 0.0;
    std::vector<double> accs;
    std::vector<double> spreads;
    bool ok = true;
};

CellStats cell(const SuiteResult& suite, const std::string& name) {
    CellStats s;
    int n = 0;
    for (const auto& run : suite.runs) {
        if (run.config.name != name) continue;
        if (!run.result) {
            s.ok = false;
            continue;
        }
        const auto& f = run.result->final_record();
        const auto [lo, hi] = std::minmax_element(f.pred_marginals.begin(), f.pred_marginals.end());
        s.accs.push_back(f.test_acc);
        s.spreads.push_back(*hi - *lo);
        s.mean_acc += f.test_acc;
        s.mean_spread += *hi - *lo;
        s.mean_noisy_acc += f.train_acc_noisy;
        ++n;
    }
    if (n == 0) {
        s.ok = false;
        return s;
    }
    s.mean_acc /= n;
    s.mean_spread /= n;
    s.mean_noisy_acc /= n;
    return s;
}

Outcome robustness() {
    const auto t0 = std::chrono::steady_clock::now();
    const json sym = {{"kind", "symmetric"}, {"eta", 0.6}};
    const std::vector<ExperimentConfig> configs = {
        desk_run("clean-ce", "ce", {{"kind", "none"}}, 0.0),
        desk_run("ce", "ce", sym, 0.0),
        desk_run("anl-ce", "paper-cifar10-anl-ce", sym, 5e-5),
    };
    const auto suite = run_all(configs);
    const double secs = seconds_since(t0);

    const auto clean = cell(suite, "clean-ce");
    const auto ce = cell(suite, "ce");
    const auto anl = cell(suite, "anl-ce");
    double worst_noisy = 0.0;
    for (const auto& run : suite.runs) {
        if (run.config.name == "anl-ce" && run.result) {
            worst_noisy = std::max(worst_noisy, run.result->final_record().train_acc_noisy);
        }
    }
    Detail d;
    d.add("clean CE acc=%.4f", clean.mean_acc);
    d.add("CE acc=%.4f", ce.mean_acc);
    d.add("ANL-CE acc=%.4f (+%.2f pp)", anl.mean_acc, 100.0 * (anl.mean_acc - ce.mean_acc));
    d.add("ANL-CE max final train_acc_noisy=%.4f (< %.2f)", worst_noisy, 0.1 + 0.15);
    d.add("%.1fs", secs);
    const bool pass = clean.ok && ce.ok && anl.ok && clean.mean_acc >= 0.97 &&
                      anl.mean_acc - ce.mean_acc >= 0.05 && worst_noisy < 0.1 + 0.15 && secs < 300.0;
    return {pass, d.str()};
}

Outcome imbalance() {
    const auto t0 = std::chrono::steady_clock::now();
    const json pairmap = {{"kind", "asymmetric_pairmap"},
                          {"eta", 0.4},
                          {"pair_map", {{"9", 1}, {"2", 0}, {"4", 7}, {"3", 5}}}};
    const std::vector<double> lambdas = {0.01, 0.1, 1.0, 2.0};
    std::vector<ExperimentConfig> configs = {desk_run("anl-ce", "paper-cifar10-anl-ce", pairmap, 5e-5)};
    for (double lam : lambdas) {
        configs.push_back(desk_run("anl-ce-star-" + std::to_string(lam),
                                   {{"kind", "anl_star"}, {"active", "ce"}, {"alpha", 5.0},
                                    {"beta", 5.0}, {"lambda", lam}},
                                   pairmap, 5e-5));
    }
    const auto suite = run_all(configs);
    const double secs = seconds_since(t0);

    const auto base = cell(suite, "anl-ce");
    double best_lambda = lambdas.front();
    CellStats best;
    best.mean_spread = INFINITY;
    bool all_ok = base.ok;
    Detail d;
    d.add("ANL-CE acc=%.4f spread=%.4f", base.mean_acc, base.mean_spread);
    for (double lam : lambdas) {
        const auto s = cell(suite, "anl-ce-star-" + std::to_string(lam));
        all_ok = all_ok && s.ok;
        d.add("lambda=%g acc=%.4f spread=%.4f", lam, s.mean_acc, s.mean_spread);
        if (s.ok && s.mean_spread < best.mean_spread) {
            best = s;
            best_lambda = lam;
        }
    }
    d.add("selected lambda=%g", best_lambda);
    d.add("%.1fs", secs);
    const bool pass = all_ok && best.mean_spread < base.mean_spread && best.mean_acc >= base.mean_acc;
    return {pass, d.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

Outcome reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "anl_acceptance_repro";
    fs::create_directories(dir);
    auto cfg = desk_run("repro", "paper-cifar10-anl-ce-star",
                        {{"kind", "symmetric"}, {"eta", 0.4}}, 5e-5);
    cfg.seeds.clear();
    cfg.seed = 7;
    cfg.optimizer.epochs = 10;

    Outcome out;
    Detail d;
    for (auto format : {MetricsFormat::Csv, MetricsFormat::Jsonl}) {
        const std::string ext = format == MetricsFormat::Csv ? ".csv" : ".jsonl";
        emit_metrics(run_experiment(cfg).records, dir / ("first" + ext), format);
        emit_metrics(run_experiment(cfg).records, dir / ("second" + ext), format);
        const std::string a = slurp(dir / ("first" + ext));
        const bool same = !a.empty() && a == slurp(dir / ("second" + ext));
        out.pass = out.pass && same;
        d.add("%s %s (%zu bytes)", ext.c_str() + 1, same ? "identical" : "DIFFER", a.size());
    }

    // Threaded suite against a serial run of the same seeds.
    auto multi = cfg;
    multi.seeds = kRunSeeds;
    const std::vector<ExperimentConfig> list = {multi};
    const auto threaded = run_all(list);
    bool suite_same = threaded.all_runs_ok();
    for (const auto& run : threaded.runs) {
        if (!run.result) continue;
        auto serial = cfg;
        serial.seed = run.config.seed;
        emit_metrics(run.result->records, dir / "threaded.csv", MetricsFormat::Csv);
        emit_metrics(run_experiment(serial).records, dir / "serial.csv", MetricsFormat::Csv);
        suite_same = suite_same && slurp(dir / "threaded.csv") == slurp(dir / "serial.csv");
    }
    out.pass = out.pass && suite_same;
    d.add("threaded suite vs serial %s", suite_same ? "identical" : "DIFFER");
    fs::remove_all(dir);
    out.detail = d.str();
    return out;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"symmetry of normalised negative losses", symmetry},
        {"boundedness", boundedness},
        {"gradient fidelity", gradient_fidelity},
        {"gradient ordering", ordering},
        {"affine noisy-risk identity", affine_identity},
        {"noise injector statistics", noise_statistics},
        {"entropy regulariser", entropy_regularizer},
        {"desk-scale robustness under symmetric noise", robustness},
        {"marginal balance under pair-map noise", imbalance},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
