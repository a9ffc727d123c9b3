#include "anl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "anl/error.hpp"
#include "anl/rng.hpp"

namespace anl {

using nlohmann::json;

std::string_view to_string(DataSource s) {
    switch (s) {
    case DataSource::Blobs: return "blobs";
    case DataSource::Idx: return "idx";
    case DataSource::Csv: return "csv";
    }
    return "?";
}

std::string_view to_string(MetricsFormat f) { return f == MetricsFormat::Csv ? "csv" : "jsonl"; }

MetricsFormat metrics_format_from_string(std::string_view name) {
    if (name == "csv") return MetricsFormat::Csv;
    if (name == "jsonl") return MetricsFormat::Jsonl;
    throw ConfigError("format", "expected csv or jsonl, got '" + std::string(name) + "'");
}

namespace {

// Object view that records which keys were read so leftovers can be
// reported as unknown fields.
class Block {
public:
    Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return as<T>(j_.at(key), field(key));
    }

    template <typename T>
    std::optional<T> maybe(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return as<T>(j_.at(key), field(key));
    }

    Block child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Block(j_.contains(key) ? j_.at(key) : empty, field(key));
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(field(key), "unknown field");
        }
    }

    template <typename T>
    static T as(const json& v, const std::string& where) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where, "expected a number");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                        throw ConfigError(where, "expected a nonnegative integer");
                    }
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where, "expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where, e.what());
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

LossKind base_kind(const std::string& name, const std::string& where) {
    try {
        return loss_kind_from_string(name);
    } catch (const Error&) {
        throw ConfigError(where, "unknown loss '" + name + "'");
    }
}

BaseLoss read_base(Block& b, LossKind kind) {
    BaseLoss l;
    l.kind = kind;
    l.gamma = b.get("gamma", l.gamma);
    l.q = b.get("q", l.q);
    l.a_rce = b.get("a_rce", l.a_rce);
    l.sce_alpha = b.get("sce_alpha", l.sce_alpha);
    l.sce_beta = b.get("sce_beta", l.sce_beta);
    try {
        l.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(b.field("kind"), e.what());
    }
    return l;
}

} // namespace

std::optional<LossPreset> find_preset(std::string_view name, double p_min) {
    const BaseLoss ce = BaseLoss::ce();
    if (name == "paper-cifar10-anl-ce") {
        return LossPreset{FrameworkLossSpec::anl(ce, 5.0, 5.0, p_min), 5e-5, 0.0};
    }
    if (name == "paper-cifar100-anl-ce") {
        return LossPreset{FrameworkLossSpec::anl(ce, 10.0, 1.0, p_min), 5e-7, 0.0};
    }
    if (name == "paper-cifar10-anl-fl") {
        return LossPreset{FrameworkLossSpec::anl(BaseLoss::fl(0.5), 5.0, 5.0, p_min), 5e-5, 0.0};
    }
    if (name == "paper-cifar10-anl-ce-star") {
        return LossPreset{FrameworkLossSpec::anl_star(ce, 5.0, 5.0, 2.0, p_min), 5e-5, 0.0};
    }
    if (name == "paper-cifar100-anl-ce-star") {
        return LossPreset{FrameworkLossSpec::anl_star(ce, 10.0, 1.0, 0.01, p_min), 5e-7, 0.0};
    }
    return std::nullopt;
}

std::vector<std::string> preset_names() {
    return {"paper-cifar10-anl-ce", "paper-cifar100-anl-ce", "paper-cifar10-anl-fl",
            "paper-cifar10-anl-ce-star", "paper-cifar100-anl-ce-star"};
}

namespace {

LossSpec parse_loss(Block& b, double p_min, OptimizerConfig* optimizer) {
    if (b.has("preset")) {
        const auto name = b.get<std::string>("preset", "");
        auto preset = find_preset(name, p_min);
        if (!preset) throw ConfigError(b.field("preset"), "unknown preset '" + name + "'");
        if (optimizer) {
            optimizer->l1_coeff = preset->l1_coeff;
            optimizer->weight_decay = preset->weight_decay;
        }
        b.finish();
        return preset->loss;
    }
    const auto kind = b.get<std::string>("kind", "ce");
    if (b.has("p_min") && b.get("p_min", p_min) != p_min) {
        throw ConfigError(b.field("p_min"), "must equal model.p_min");
    }
    Combiner combiner{};
    try {
        combiner = combiner_from_string(kind);
    } catch (const ConfigError&) {
        auto base = read_base(b, base_kind(kind, b.field("kind")));
        b.finish();
        return base;
    }

    const auto active_name = b.get<std::string>("active", "ce");
    const BaseLoss active = read_base(b, base_kind(active_name, b.field("active")));
    const double alpha = b.get("alpha", 1.0);
    const double beta = b.get("beta", 1.0);
    const double lambda = b.get("lambda", 0.0);
    std::optional<BaseLoss> passive;
    if (b.has("passive")) {
        const auto pname = b.get<std::string>("passive", "");
        BaseLoss p;
        p.kind = base_kind(pname, b.field("passive"));
        p.a_rce = active.a_rce;
        passive = p;
    }
    b.finish();
    if (lambda != 0.0 && combiner != Combiner::AnlStar) {
        throw ConfigError(b.field("lambda"), "only anl_star uses lambda");
    }
    return FrameworkLossSpec::make(combiner, active, alpha, beta, lambda, p_min, passive);
}

} // namespace

LossSpec loss_from_json(const json& j, double p_min, OptimizerConfig* optimizer) {
    // A bare string names a preset or a loss kind.
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        const char* key = find_preset(name, p_min) ? "preset" : "kind";
        return loss_from_json(json{{key, name}}, p_min, optimizer);
    }
    Block b(j, "loss");
    return parse_loss(b, p_min, optimizer);
}

json loss_to_json(const LossSpec& spec) {
    auto base_fields = [](json& j, const BaseLoss& l) {
        switch (l.kind) {
        case LossKind::FL: j["gamma"] = l.gamma; break;
        case LossKind::GCE: j["q"] = l.q; break;
        case LossKind::RCE: j["a_rce"] = l.a_rce; break;
        case LossKind::SCE:
            j["a_rce"] = l.a_rce;
            j["sce_alpha"] = l.sce_alpha;
            j["sce_beta"] = l.sce_beta;
            break;
        default: break;
        }
    };
    json j = json::object();
    if (const auto* b = std::get_if<BaseLoss>(&spec)) {
        j["kind"] = std::string(to_string(b->kind));
        base_fields(j, *b);
        return j;
    }
    const auto& f = std::get<FrameworkLossSpec>(spec);
    j["kind"] = std::string(to_string(f.combiner));
    j["active"] = std::string(to_string(f.active.kind));
    base_fields(j, f.active);
    j["alpha"] = f.alpha;
    j["beta"] = f.beta;
    if (f.combiner == Combiner::AnlStar) j["lambda"] = f.lambda;
    if (f.passive) {
        j["passive"] = std::string(to_string(f.passive->kind));
        if (f.passive->kind == LossKind::RCE) j["a_rce"] = f.passive->a_rce;
    }
    j["p_min"] = f.p_min;
    return j;
}

void ExperimentConfig::validate() const {
    if (name.empty()) throw ConfigError("name", "must not be empty");
    const auto& d = dataset;
    if (d.source == DataSource::Blobs) {
        if (d.classes < 2) throw ConfigError("dataset.classes", "must be >= 2");
        if (d.train_per_class < 1) throw ConfigError("dataset.train_per_class", "must be >= 1");
        if (d.test_per_class < 1) throw ConfigError("dataset.test_per_class", "must be >= 1");
        if (d.dim < 1) throw ConfigError("dataset.dim", "must be >= 1");
        if (!(d.spread > 0.0)) throw ConfigError("dataset.spread", "must be positive");
        if (!(d.center_distance >= 0.0)) throw ConfigError("dataset.center_distance", "must be >= 0");
        noise.spec.validate(d.classes);
    } else if (d.source == DataSource::Idx) {
        for (const auto& [p, f] : {std::pair{d.train_images, "dataset.train_images"},
                                   {d.train_labels, "dataset.train_labels"},
                                   {d.test_images, "dataset.test_images"},
                                   {d.test_labels, "dataset.test_labels"}}) {
            if (p.empty()) throw ConfigError(f, "path required for idx datasets");
        }
    } else {
        if (d.train_csv.empty()) throw ConfigError("dataset.train", "path required for csv datasets");
        if (d.test_csv.empty()) throw ConfigError("dataset.test", "path required for csv datasets");
    }
    if (noise.spec.kind == NoiseKind::External && noise.overlay.empty()) {
        throw ConfigError("noise.overlay", "external noise needs an overlay file");
    }
    if (noise.probe_epochs < 1) throw ConfigError("noise.probe_epochs", "must be >= 1");
    for (std::size_t i = 0; i < model.hidden.size(); ++i) {
        if (model.hidden[i] < 1) {
            throw ConfigError("model.hidden[" + std::to_string(i) + "]", "must be >= 1");
        }
    }
    if (!(model.p_min > 0.0 && model.p_min < 0.5)) throw ConfigError("model.p_min", "must lie in (0, 0.5)");
    optimizer.validate();
    if (const auto* f = std::get_if<FrameworkLossSpec>(&loss)) {
        f->validate();
        if (f->p_min != model.p_min) throw ConfigError("loss.p_min", "must equal model.p_min");
    } else {
        std::get<BaseLoss>(loss).validate();
    }
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    Block root(j, "");
    cfg.name = root.get<std::string>("name", cfg.name);
    cfg.seed = root.get<std::uint64_t>("seed", cfg.seed);
    if (root.has("seeds")) {
        const json& s = root.raw("seeds");
        if (!s.is_array()) throw ConfigError("seeds", "expected an array of integers");
        for (std::size_t i = 0; i < s.size(); ++i) {
            cfg.seeds.push_back(Block::as<std::uint64_t>(s[i], "seeds[" + std::to_string(i) + "]"));
        }
    }
    if (root.has("output")) cfg.output = resolve(base_dir, root.get<std::string>("output", ""));
    cfg.format = metrics_format_from_string(root.get<std::string>("format", "csv"));

    {
        Block d = root.child("dataset");
        auto& ds = cfg.dataset;
        const auto src = d.get<std::string>("source", "blobs");
        if (src == "blobs") {
            ds.source = DataSource::Blobs;
            ds.classes = d.get("classes", ds.classes);
            ds.train_per_class = d.get("train_per_class", ds.train_per_class);
            ds.test_per_class = d.get("test_per_class", ds.test_per_class);
            ds.dim = d.get("dim", ds.dim);
            ds.spread = d.get("spread", ds.spread);
            ds.center_distance = d.get("center_distance", ds.center_distance);
            ds.seed = d.maybe<std::uint64_t>("seed");
        } else if (src == "idx") {
            ds.source = DataSource::Idx;
            ds.train_images = resolve(base_dir, d.get<std::string>("train_images", ""));
            ds.train_labels = resolve(base_dir, d.get<std::string>("train_labels", ""));
            ds.test_images = resolve(base_dir, d.get<std::string>("test_images", ""));
            ds.test_labels = resolve(base_dir, d.get<std::string>("test_labels", ""));
        } else if (src == "csv") {
            ds.source = DataSource::Csv;
            ds.train_csv = resolve(base_dir, d.get<std::string>("train", ""));
            ds.test_csv = resolve(base_dir, d.get<std::string>("test", ""));
        } else {
            throw ConfigError("dataset.source", "expected blobs, idx or csv, got '" + src + "'");
        }
        ds.standardize = d.get("standardize", ds.standardize);
        d.finish();
    }

    {
        Block n = root.child("noise");
        auto& spec = cfg.noise.spec;
        spec.kind = noise_kind_from_string(n.get<std::string>("kind", "none"));
        spec.eta = n.get("eta", spec.eta);
        if (n.has("seed")) {
            spec.seed = n.get<std::uint64_t>("seed", 0);
            cfg.noise.seed_given = true;
        }
        if (n.has("pair_map")) {
            const json& m = n.raw("pair_map");
            if (!m.is_object()) throw ConfigError("noise.pair_map", "expected an object of \"src\": dst");
            spec.pair_map.clear();
            for (const auto& [k, v] : m.items()) {
                int src = 0;
                try {
                    std::size_t used = 0;
                    src = std::stoi(k, &used);
                    if (used != k.size()) throw std::invalid_argument(k);
                } catch (const std::exception&) {
                    throw ConfigError("noise.pair_map", "key '" + k + "' is not a class index");
                }
                spec.pair_map[src] = Block::as<int>(v, "noise.pair_map." + k);
            }
        }
        spec.superclass_size = n.get("superclass_size", spec.superclass_size);
        if (n.has("overlay")) cfg.noise.overlay = resolve(base_dir, n.get<std::string>("overlay", ""));
        cfg.noise.probe_epochs = n.get("probe_epochs", cfg.noise.probe_epochs);
        if (!(spec.eta >= 0.0 && spec.eta < 1.0)) throw ConfigError("noise.eta", "must lie in [0, 1)");
        n.finish();
    }

    {
        Block m = root.child("model");
        if (m.has("hidden")) {
            const json& h = m.raw("hidden");
            if (!h.is_array()) throw ConfigError("model.hidden", "expected an array of widths");
            cfg.model.hidden.clear();
            for (std::size_t i = 0; i < h.size(); ++i) {
                cfg.model.hidden.push_back(
                    Block::as<Index>(h[i], "model.hidden[" + std::to_string(i) + "]"));
            }
        }
        if (m.has("activation")) {
            const auto a = m.get<std::string>("activation", "relu");
            try {
                cfg.model.activation = activation_from_string(a);
            } catch (const Error&) {
                throw ConfigError("model.activation", "expected relu or tanh, got '" + a + "'");
            }
        }
        cfg.model.p_min = m.get("p_min", cfg.model.p_min);
        if (!(cfg.model.p_min > 0.0 && cfg.model.p_min < 0.5)) {
            throw ConfigError("model.p_min", "must lie in (0, 0.5)");
        }
        m.finish();
    }

    // The loss block may set optimizer defaults (presets); explicit optimizer
    // fields override them.
    if (root.has("loss")) {
        const json& l = root.raw("loss");
        try {
            cfg.loss = loss_from_json(l, cfg.model.p_min, &cfg.optimizer);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError("loss", e.what());
        }
    }

    {
        Block o = root.child("optimizer");
        auto& opt = cfg.optimizer;
        opt.lr0 = o.get("lr", opt.lr0);
        opt.momentum = o.get("momentum", opt.momentum);
        opt.weight_decay = o.get("weight_decay", opt.weight_decay);
        opt.l1_coeff = o.get("l1", opt.l1_coeff);
        opt.clip_norm = o.get("clip_norm", opt.clip_norm);
        opt.epochs = o.get("epochs", opt.epochs);
        opt.batch_size = o.get("batch_size", opt.batch_size);
        o.finish();
    }

    {
        Block e = root.child("eval");
        const auto cadence = e.get<std::string>("cadence", "epoch");
        if (cadence != "epoch" && cadence != "batch") {
            throw ConfigError("eval.cadence", "expected epoch or batch, got '" + cadence + "'");
        }
        cfg.eval.per_batch = cadence == "batch";
        cfg.eval.record_wall_time = e.get("record_wall_time", cfg.eval.record_wall_time);
        e.finish();
    }

    root.finish();
    cfg.validate();
    return cfg;
}

namespace {

json read_json(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("config", "cannot open '" + path.string() + "'");
    try {
        return json::parse(is, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", path.string() + ": " + e.what());
    }
}

} // namespace

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return parse_experiment(read_json(path), path.parent_path());
}

std::vector<ExperimentConfig> load_suite(const std::filesystem::path& path) {
    const json j = read_json(path);
    const json* list = &j;
    if (j.is_object()) {
        for (const auto& [k, _] : j.items()) {
            if (k != "configs") throw ConfigError(k, "unknown field");
        }
        if (!j.contains("configs")) throw ConfigError("configs", "missing");
        list = &j.at("configs");
    }
    if (!list->is_array()) throw ConfigError("configs", "expected an array");
    std::vector<ExperimentConfig> out;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& item = (*list)[i];
        const std::string where = "configs[" + std::to_string(i) + "]";
        try {
            if (item.is_string()) {
                out.push_back(load_experiment(resolve(path.parent_path(), item.get<std::string>())));
            } else {
                out.push_back(parse_experiment(item, path.parent_path()));
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + "." + e.field(), e.what());
        }
    }
    return out;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    if (!cfg.seeds.empty()) j["seeds"] = cfg.seeds;
    if (!cfg.output.empty()) j["output"] = cfg.output.string();
    j["format"] = std::string(to_string(cfg.format));

    json d;
    const auto& ds = cfg.dataset;
    d["source"] = std::string(to_string(ds.source));
    switch (ds.source) {
    case DataSource::Blobs:
        d["classes"] = ds.classes;
        d["train_per_class"] = ds.train_per_class;
        d["test_per_class"] = ds.test_per_class;
        d["dim"] = ds.dim;
        d["spread"] = ds.spread;
        d["center_distance"] = ds.center_distance;
        if (ds.seed) d["seed"] = *ds.seed;
        break;
    case DataSource::Idx:
        d["train_images"] = ds.train_images.string();
        d["train_labels"] = ds.train_labels.string();
        d["test_images"] = ds.test_images.string();
        d["test_labels"] = ds.test_labels.string();
        break;
    case DataSource::Csv:
        d["train"] = ds.train_csv.string();
        d["test"] = ds.test_csv.string();
        break;
    }
    d["standardize"] = ds.standardize;
    j["dataset"] = d;

    json n;
    const auto& spec = cfg.noise.spec;
    n["kind"] = std::string(to_string(spec.kind));
    n["eta"] = spec.eta;
    if (cfg.noise.seed_given) n["seed"] = spec.seed;
    if (spec.kind == NoiseKind::AsymmetricPairmap) {
        json m = json::object();
        for (const auto& [s, t] : spec.pair_map) m[std::to_string(s)] = t;
        n["pair_map"] = m;
    }
    if (spec.kind == NoiseKind::AsymmetricCircular) n["superclass_size"] = spec.superclass_size;
    if (spec.kind == NoiseKind::External) n["overlay"] = cfg.noise.overlay.string();
    if (spec.kind == NoiseKind::InstanceDependent) n["probe_epochs"] = cfg.noise.probe_epochs;
    j["noise"] = n;

    j["model"] = {{"hidden", cfg.model.hidden},
                  {"activation", std::string(to_string(cfg.model.activation))},
                  {"p_min", cfg.model.p_min}};
    j["loss"] = loss_to_json(cfg.loss);
    const auto& o = cfg.optimizer;
    j["optimizer"] = {{"lr", o.lr0},           {"momentum", o.momentum},
                      {"weight_decay", o.weight_decay}, {"l1", o.l1_coeff},
                      {"clip_norm", o.clip_norm}, {"epochs", o.epochs},
                      {"batch_size", o.batch_size}};
    j["eval"] = {{"cadence", cfg.eval.per_batch ? "batch" : "epoch"},
                 {"record_wall_time", cfg.eval.record_wall_time}};
    return j;
}

std::vector<ExperimentConfig> expand_seeds(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) return {cfg};
    std::vector<ExperimentConfig> out;
    for (std::uint64_t s : cfg.seeds) {
        ExperimentConfig c = cfg;
        c.seed = s;
        c.seeds.clear();
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace anl
