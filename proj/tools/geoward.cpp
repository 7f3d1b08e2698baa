// geoward: weight-damage resilience analysis for small MLPs.
//
// Subcommands: train, spectrum, perturb, damage-path, recover, reconfigure,
// replay. Every run writes a manifest.json next to its outputs; replaying a
// manifest reproduces all numeric outputs bit-for-bit at a fixed thread
// count.

#include "geoward/damage.hpp"
#include "geoward/dataset.hpp"
#include "geoward/errors.hpp"
#include "geoward/geodesic.hpp"
#include "geoward/metric.hpp"
#include "geoward/network.hpp"
#include "geoward/paths.hpp"
#include "geoward/threads.hpp"
#include "geoward/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geoward;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// small utilities

std::string fnv1a_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw invalid_input_error("cannot open " + path + " for hashing");
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!f) break;
    }
    char out[20];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string timestamp_utc()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_json(const json& j, const fs::path& path)
{
    std::ofstream f(path);
    if (!f) throw invalid_input_error("cannot open " + path.string() + " for writing");
    f << j.dump(2) << "\n";
}

json read_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw invalid_input_error("cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw format_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

std::vector<int> parse_arch(const std::string& s)
{
    std::vector<int> sizes;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, '-')) {
        try {
            sizes.push_back(std::stoi(tok));
        } catch (...) {
            throw invalid_input_error("bad --arch token '" + tok + "' in '" + s + "'");
        }
    }
    if (sizes.size() < 2) throw invalid_input_error("--arch needs at least two layers");
    return sizes;
}

// ---------------------------------------------------------------------------
// dataset specs: "synth:classes=3,dim=2,per_class=200,sep=6,seed=1"
//            or  "idx:images.idx,labels.idx[,pool=2]"

struct DataSpec {
    std::string raw;
    Dataset load() const;
    void add_input_hashes(json& hashes) const;
};

Dataset DataSpec::load() const
{
    const auto colon = raw.find(':');
    if (colon == std::string::npos)
        throw invalid_input_error("--data must be synth:... or idx:..., got '" + raw + "'");
    const std::string kind = raw.substr(0, colon);
    const std::string rest = raw.substr(colon + 1);

    if (kind == "synth") {
        int classes = 3, dim = 2, per_class = 200;
        double sep = 6.0;
        std::uint64_t seed = 1;
        std::stringstream ss(rest);
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw invalid_input_error("bad synth spec token '" + kv + "'");
            const std::string key = kv.substr(0, eq);
            const std::string val = kv.substr(eq + 1);
            if (key == "classes") classes = std::stoi(val);
            else if (key == "dim") dim = std::stoi(val);
            else if (key == "per_class") per_class = std::stoi(val);
            else if (key == "sep") sep = std::stod(val);
            else if (key == "seed") seed = std::stoull(val);
            else throw invalid_input_error("unknown synth key '" + key + "'");
        }
        return synth_gaussians(classes, dim, per_class, sep, seed);
    }
    if (kind == "idx") {
        std::vector<std::string> parts;
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, ',')) parts.push_back(tok);
        if (parts.size() < 2) throw invalid_input_error("idx spec needs images,labels");
        int pool = 1;
        for (std::size_t i = 2; i < parts.size(); ++i) {
            if (parts[i].rfind("pool=", 0) == 0)
                pool = std::stoi(parts[i].substr(5));
            else
                throw invalid_input_error("unknown idx option '" + parts[i] + "'");
        }
        Dataset d = load_idx(parts[0], parts[1]);
        if (pool > 1) d = average_pool(d, pool);
        return d;
    }
    throw invalid_input_error("unknown data kind '" + kind + "'");
}

void DataSpec::add_input_hashes(json& hashes) const
{
    if (raw.rfind("idx:", 0) != 0) return;
    std::stringstream ss(raw.substr(4));
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',') && i < 2) {
        hashes[tok] = fnv1a_file(tok);
        ++i;
    }
}

// ---------------------------------------------------------------------------
// plan specs: a JSON file path, or "layer:nodes" shorthand like "1:0-7,12"

struct PlanSpec {
    std::string raw;

    bool is_shorthand() const { return raw.find(':') != std::string::npos && !fs::exists(raw); }

    std::pair<std::size_t, std::set<int>> parse_shorthand() const
    {
        const auto colon = raw.find(':');
        std::size_t layer = 0;
        try {
            layer = std::stoul(raw.substr(0, colon));
        } catch (...) {
            throw invalid_input_error("bad plan layer in '" + raw + "'");
        }
        std::set<int> nodes;
        std::stringstream ss(raw.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto dash = tok.find('-');
            try {
                if (dash == std::string::npos) {
                    nodes.insert(std::stoi(tok));
                } else {
                    const int lo = std::stoi(tok.substr(0, dash));
                    const int hi = std::stoi(tok.substr(dash + 1));
                    for (int v = lo; v <= hi; ++v) nodes.insert(v);
                }
            } catch (const invalid_input_error&) {
                throw;
            } catch (...) {
                throw invalid_input_error("bad plan node token '" + tok + "'");
            }
        }
        if (nodes.empty()) throw invalid_input_error("plan '" + raw + "' names no nodes");
        return {layer, nodes};
    }

    DamagePlan resolve(const NetworkSpec& spec) const
    {
        if (raw.empty()) return {};
        if (is_shorthand()) {
            const auto [layer, nodes] = parse_shorthand();
            return node_deletion_plan(spec, layer, nodes);
        }
        return load_plan_json(raw);
    }

    // Per-node groups for stepwise modes; only defined for shorthand plans.
    std::vector<DamagePlan> resolve_groups(const NetworkSpec& spec) const
    {
        if (!is_shorthand())
            throw invalid_input_error(
                "stepwise deletion needs a layer:nodes plan, not a file: '" + raw + "'");
        const auto [layer, nodes] = parse_shorthand();
        std::vector<DamagePlan> groups;
        for (int nd : nodes) groups.push_back(node_deletion_plan(spec, layer, {nd}));
        return groups;
    }
};

// ---------------------------------------------------------------------------
// manifest plumbing

struct ManifestWriter {
    json params;
    json input_hashes = json::object();
    std::string command;
    int threads = 0;

    void emit(const fs::path& out_dir) const
    {
        json m;
        m["tool"] = "geoward";
        m["version"] = kVersion;
        m["command"] = command;
        m["parameters"] = params;
        m["threads"] = threads;
        m["input_hashes"] = input_hashes;
        m["timestamp"] = timestamp_utc();
        write_json(m, out_dir / "manifest.json");
    }
};

fs::path prepare_out_dir(const std::string& out)
{
    if (out.empty()) throw invalid_input_error("--out is required");
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

Checkpoint load_model(const std::string& path, json& hashes)
{
    const Checkpoint ck = load_checkpoint(path);
    hashes[path] = fnv1a_file(path);
    const json manifest = read_json(path);
    const fs::path blob = fs::path(path).parent_path() / manifest.at("blob").get<std::string>();
    hashes[blob.string()] = fnv1a_file(blob.string());
    return ck;
}

// ---------------------------------------------------------------------------
// subcommand parameter blocks (serialized into manifests for replay)

struct TrainParams {
    std::string data, arch, activation = "tanh", output_mode = "softmax",
                loss = "cross_entropy", out;
    int epochs = 200, batch_size = 32;
    double lr = 0.1;
    std::uint64_t seed = 0;
    bool export_data = false;
};

struct SpectrumParams {
    std::string model, data, out;
    int batch = 64;
    double threshold = kVulnerableThreshold;
};

struct PerturbParams {
    std::string model, data, mode = "random", out;
    double sigma = 1.0;
    int trials = 100, top_k = 1, batch = 64;
    std::uint64_t seed = 0;
};

struct DamagePathParams {
    std::string model, data, plan, mode = "linear", out;
    int steps = 51, batch = 64;
};

struct RecoverParams {
    std::string model, data, plan, out, beta_sweep;
    double beta = 0.0, cap = 0.01, tol = 1e-6;
    int max_steps = 400, batch = 64, naive_steps = 51;
    bool with_naive = false;
};

struct ReconfigureParams {
    std::string model, data, old_plan, new_plan, out, beta_sweep;
    double beta = 0.0, cap = 0.01, tol = 1e-6;
    int max_steps = 400, batch = 64;
};

void to_json(json& j, const TrainParams& p)
{
    j = {{"data", p.data},       {"arch", p.arch},
         {"activation", p.activation}, {"output_mode", p.output_mode},
         {"loss", p.loss},       {"out", p.out},
         {"epochs", p.epochs},   {"batch_size", p.batch_size},
         {"lr", p.lr},           {"seed", p.seed},
         {"export_data", p.export_data}};
}
void from_json(const json& j, TrainParams& p)
{
    j.at("data").get_to(p.data);
    j.at("arch").get_to(p.arch);
    j.at("activation").get_to(p.activation);
    j.at("output_mode").get_to(p.output_mode);
    j.at("loss").get_to(p.loss);
    j.at("out").get_to(p.out);
    j.at("epochs").get_to(p.epochs);
    j.at("batch_size").get_to(p.batch_size);
    j.at("lr").get_to(p.lr);
    j.at("seed").get_to(p.seed);
    p.export_data = j.value("export_data", false);
}

void to_json(json& j, const SpectrumParams& p)
{
    j = {{"model", p.model}, {"data", p.data}, {"out", p.out}, {"batch", p.batch},
         {"threshold", p.threshold}};
}
void from_json(const json& j, SpectrumParams& p)
{
    j.at("model").get_to(p.model);
    j.at("data").get_to(p.data);
    j.at("out").get_to(p.out);
    j.at("batch").get_to(p.batch);
    j.at("threshold").get_to(p.threshold);
}

void to_json(json& j, const PerturbParams& p)
{
    j = {{"model", p.model}, {"data", p.data}, {"mode", p.mode},   {"out", p.out},
         {"sigma", p.sigma}, {"trials", p.trials}, {"top_k", p.top_k}, {"batch", p.batch},
         {"seed", p.seed}};
}
void from_json(const json& j, PerturbParams& p)
{
    j.at("model").get_to(p.model);
    j.at("data").get_to(p.data);
    j.at("mode").get_to(p.mode);
    j.at("out").get_to(p.out);
    j.at("sigma").get_to(p.sigma);
    j.at("trials").get_to(p.trials);
    j.at("top_k").get_to(p.top_k);
    j.at("batch").get_to(p.batch);
    j.at("seed").get_to(p.seed);
}

void to_json(json& j, const DamagePathParams& p)
{
    j = {{"model", p.model}, {"data", p.data}, {"plan", p.plan}, {"mode", p.mode},
         {"out", p.out},     {"steps", p.steps}, {"batch", p.batch}};
}
void from_json(const json& j, DamagePathParams& p)
{
    j.at("model").get_to(p.model);
    j.at("data").get_to(p.data);
    j.at("plan").get_to(p.plan);
    j.at("mode").get_to(p.mode);
    j.at("out").get_to(p.out);
    j.at("steps").get_to(p.steps);
    j.at("batch").get_to(p.batch);
}

void to_json(json& j, const RecoverParams& p)
{
    j = {{"model", p.model},         {"data", p.data},
         {"plan", p.plan},           {"out", p.out},
         {"beta_sweep", p.beta_sweep}, {"beta", p.beta},
         {"cap", p.cap},             {"tol", p.tol},
         {"max_steps", p.max_steps}, {"batch", p.batch},
         {"naive_steps", p.naive_steps}, {"with_naive", p.with_naive}};
}
void from_json(const json& j, RecoverParams& p)
{
    j.at("model").get_to(p.model);
    j.at("data").get_to(p.data);
    j.at("plan").get_to(p.plan);
    j.at("out").get_to(p.out);
    j.at("beta_sweep").get_to(p.beta_sweep);
    j.at("beta").get_to(p.beta);
    j.at("cap").get_to(p.cap);
    j.at("tol").get_to(p.tol);
    j.at("max_steps").get_to(p.max_steps);
    j.at("batch").get_to(p.batch);
    j.at("naive_steps").get_to(p.naive_steps);
    j.at("with_naive").get_to(p.with_naive);
}

void to_json(json& j, const ReconfigureParams& p)
{
    j = {{"model", p.model},         {"data", p.data},
         {"old_plan", p.old_plan},   {"new_plan", p.new_plan},
         {"out", p.out},             {"beta_sweep", p.beta_sweep},
         {"beta", p.beta},           {"cap", p.cap},
         {"tol", p.tol},             {"max_steps", p.max_steps},
         {"batch", p.batch}};
}
void from_json(const json& j, ReconfigureParams& p)
{
    j.at("model").get_to(p.model);
    j.at("data").get_to(p.data);
    j.at("old_plan").get_to(p.old_plan);
    j.at("new_plan").get_to(p.new_plan);
    j.at("out").get_to(p.out);
    j.at("beta_sweep").get_to(p.beta_sweep);
    j.at("beta").get_to(p.beta);
    j.at("cap").get_to(p.cap);
    j.at("tol").get_to(p.tol);
    j.at("max_steps").get_to(p.max_steps);
    j.at("batch").get_to(p.batch);
}

std::vector<double> parse_sweep(const std::string& s)
{
    std::vector<double> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (...) {
            throw invalid_input_error("bad --beta-sweep token '" + tok + "'");
        }
    }
    return out;
}

RecoveryConfig make_recovery_config(double beta, const std::string& sweep, double cap,
                                    double tol, int max_steps, int batch)
{
    RecoveryConfig cfg;
    cfg.beta = beta;
    cfg.beta_sweep = parse_sweep(sweep);
    cfg.step_norm_sq_cap = cap;
    cfg.hyperplane_tol = tol;
    cfg.max_steps = max_steps;
    cfg.metric_batch = static_cast<std::size_t>(batch);
    return cfg;
}

// ---------------------------------------------------------------------------
// subcommand bodies

void run_train(const TrainParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "train";
    mw.params = p;
    mw.threads = thread_count();

    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);
    mw.params["dataset_fingerprint"] = dataset_fingerprint(d);

    NetworkSpec spec;
    spec.layer_sizes = parse_arch(p.arch);
    spec.hidden_activation = activation_from_string(p.activation);
    spec.output_mode = output_mode_from_string(p.output_mode);
    spec.validate();

    TrainConfig cfg;
    cfg.epochs = p.epochs;
    cfg.batch_size = p.batch_size;
    cfg.learning_rate = p.lr;
    cfg.seed = p.seed;
    cfg.loss = loss_from_string(p.loss);

    const TrainResult res = train(spec, d, cfg);
    save_checkpoint((out / "model.json").string(), spec, res.weights, dataset_fingerprint(d));
    save_training_log_csv(res.log, (out / "training_log.csv").string());
    if (p.export_data) save_csv(d, (out / "dataset.csv").string());
    mw.emit(out);

    std::printf("trained %s on %s: final accuracy %.4f (loss %.6f)\n", p.arch.c_str(),
                d.name.c_str(), res.log.back().accuracy, res.log.back().loss);
}

void run_spectrum(const SpectrumParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "spectrum";
    mw.params = p;
    mw.threads = thread_count();

    const Checkpoint ck = load_model(p.model, mw.input_hashes);
    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);

    const Batch batch = round_robin_batch(d, static_cast<std::size_t>(p.batch), 0);
    const MetricTensor mt = assemble_metric(ck.spec, ck.weights, batch);
    const Spectrum sp = spectrum(mt, p.threshold);

    std::ofstream csv(out / "spectrum.csv");
    csv.precision(17);
    csv << "index,eigenvalue\n";
    for (std::size_t i = 0; i < sp.decomposition.eigenvalues.size(); ++i)
        csv << i << "," << sp.decomposition.eigenvalues[i] << "\n";

    json summary;
    summary["rho"] = sp.rho;
    summary["lambda1"] = sp.decomposition.eigenvalues.front();
    summary["trace"] = mt.g.trace();
    summary["threshold"] = sp.threshold;
    summary["n"] = mt.g.dim();
    summary["vulnerable_count"] = sp.vulnerable_count;
    summary["resilient_count"] = sp.resilient_count;
    summary["batch_ids"] = mt.batch_ids;
    write_json(summary, out / "spectrum_summary.json");
    mw.emit(out);

    std::printf("spectrum: n=%zu lambda1=%.6g rho=%.6g\n", mt.g.dim(),
                sp.decomposition.eigenvalues.front(), sp.rho);
}

void run_perturb(const PerturbParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "perturb";
    mw.params = p;
    mw.threads = thread_count();

    const Checkpoint ck = load_model(p.model, mw.input_hashes);
    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);

    if (p.mode != "random" && p.mode != "adversarial" && p.mode != "both")
        throw invalid_input_error("--mode must be random, adversarial or both");
    if (p.sigma < 0.0) throw invalid_input_error("--sigma must be >= 0");

    const Batch batch = round_robin_batch(d, static_cast<std::size_t>(p.batch), 0);
    const MetricTensor mt = assemble_metric(ck.spec, ck.weights, batch);

    std::ofstream csv(out / "perturb.csv");
    csv.precision(17);
    csv << "trial,kind,norm,functional_distance,accuracy\n";

    int row = 0;
    if (p.mode == "adversarial" || p.mode == "both") {
        const Spectrum sp = spectrum(mt);
        const Perturbation adv = adversarial_perturbation(sp, p.sigma, p.top_k);
        const double fd = quadratic_form(mt, adv.du);
        const double acc = perturbed_accuracy_worst_sign(ck.spec, ck.weights, adv, d);
        csv << row++ << ",adversarial," << adv.norm << "," << fd << "," << acc << "\n";
    }
    if (p.mode == "random" || p.mode == "both") {
        for (int trial = 0; trial < p.trials; ++trial) {
            const Perturbation rp =
                random_ball_perturbation(ck.weights.size(), p.sigma, p.seed + trial);
            const double fd = quadratic_form(mt, rp.du);
            FlatWeights w = ck.weights;
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += rp.du[i];
            const double acc = evaluate(ck.spec, w, d).accuracy;
            csv << row++ << ",random," << rp.norm << "," << fd << "," << acc << "\n";
        }
    }
    mw.emit(out);
    std::printf("perturb: wrote %d rows\n", row);
}

void run_damage_path(const DamagePathParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "damage-path";
    mw.params = p;
    mw.threads = thread_count();

    const Checkpoint ck = load_model(p.model, mw.input_hashes);
    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);

    const PlanSpec plan_spec{p.plan};
    const DamagePlan plan = plan_spec.resolve(ck.spec);
    mw.params["resolved_plan_indices"] = plan.indices;
    if (!plan_spec.is_shorthand() && fs::exists(p.plan))
        mw.input_hashes[p.plan] = fnv1a_file(p.plan);

    const Batch batch = round_robin_batch(d, static_cast<std::size_t>(p.batch), 0);

    PathTrace trace;
    if (p.mode == "linear") {
        const auto points = naive_linear_path(ck.weights, plan, p.steps);
        trace = trace_path(ck.spec, batch, d, points, PathKind::naive_linear);
    } else if (p.mode == "stepwise") {
        const auto groups = plan_spec.resolve_groups(ck.spec);
        const auto points = stepwise_deletion_path(ck.weights, groups);
        trace = trace_path(ck.spec, batch, d, points, PathKind::stepwise_deletion);
    } else {
        throw invalid_input_error("--mode must be linear or stepwise");
    }

    save_trace_csv(trace, (out / "trace.csv").string());
    json extra;
    extra["plan_description"] = plan.description;
    extra["plan_indices"] = plan.indices;
    extra["batch_ids"] = batch.ids;
    save_trace_metadata(trace, (out / "trace_meta.json").string(), extra.dump());
    mw.emit(out);

    std::printf("damage-path (%s): %zu samples, final accuracy %.4f\n", p.mode.c_str(),
                trace.samples.size(), trace.final_accuracy());
}

json recovery_summary(const RecoveryResult& res)
{
    json j;
    j["beta"] = res.beta_used;
    j["steps"] = res.steps_used;
    j["energy"] = res.total_energy;
    j["endpoint_accuracy"] = res.trace.final_accuracy();
    j["mean_accuracy"] = res.trace.mean_accuracy();
    j["peak_abs_acceleration"] = res.trace.peak_abs_acceleration();
    j["work_epochs"] = res.trace.samples.back().work_epochs;
    if (!res.swept_betas.empty()) {
        json sweep = json::array();
        for (std::size_t i = 0; i < res.swept_betas.size(); ++i) {
            json e;
            e["beta"] = res.swept_betas[i];
            e["energy"] = res.swept_energies[i];
            e["winner"] = res.swept_betas[i] == res.beta_used;
            sweep.push_back(e);
        }
        j["sweep"] = sweep;
    }
    return j;
}

void run_recover(const RecoverParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "recover";
    mw.params = p;
    mw.threads = thread_count();

    const Checkpoint ck = load_model(p.model, mw.input_hashes);
    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);

    const PlanSpec plan_spec{p.plan};
    const DamagePlan plan = plan_spec.resolve(ck.spec);
    mw.params["resolved_plan_indices"] = plan.indices;
    if (!plan_spec.is_shorthand() && fs::exists(p.plan))
        mw.input_hashes[p.plan] = fnv1a_file(p.plan);

    const RecoveryConfig cfg =
        make_recovery_config(p.beta, p.beta_sweep, p.cap, p.tol, p.max_steps, p.batch);
    const RecoveryResult res = recover(ck.spec, ck.weights, plan, d, cfg);

    save_trace_csv(res.trace, (out / "recovery_trace.csv").string());
    write_json(recovery_summary(res), out / "recovery_summary.json");

    if (p.with_naive) {
        const Batch batch = round_robin_batch(d, cfg.metric_batch, 0);
        const auto points = naive_linear_path(ck.weights, plan, p.naive_steps);
        const PathTrace naive = trace_path(ck.spec, batch, d, points, PathKind::naive_linear);
        save_trace_csv(naive, (out / "naive_trace.csv").string());
    }
    mw.emit(out);

    std::printf("recover: beta=%.6g steps=%d energy=%.6g endpoint accuracy %.4f\n",
                res.beta_used, res.steps_used, res.total_energy, res.trace.final_accuracy());
}

void run_reconfigure(const ReconfigureParams& p)
{
    const fs::path out = prepare_out_dir(p.out);
    ManifestWriter mw;
    mw.command = "reconfigure";
    mw.params = p;
    mw.threads = thread_count();

    const Checkpoint ck = load_model(p.model, mw.input_hashes);
    const DataSpec ds{p.data};
    const Dataset d = ds.load();
    ds.add_input_hashes(mw.input_hashes);

    const DamagePlan old_plan = PlanSpec{p.old_plan}.resolve(ck.spec);
    const DamagePlan new_plan = PlanSpec{p.new_plan}.resolve(ck.spec);
    mw.params["resolved_old_plan_indices"] = old_plan.indices;
    mw.params["resolved_new_plan_indices"] = new_plan.indices;

    const RecoveryConfig cfg =
        make_recovery_config(p.beta, p.beta_sweep, p.cap, p.tol, p.max_steps, p.batch);
    const RecoveryResult res = reconfigure(ck.spec, ck.weights, old_plan, new_plan, d, cfg);

    save_trace_csv(res.trace, (out / "recovery_trace.csv").string());
    write_json(recovery_summary(res), out / "recovery_summary.json");
    mw.emit(out);

    std::printf("reconfigure: steps=%d endpoint accuracy %.4f\n", res.steps_used,
                res.trace.final_accuracy());
}

int run_replay(const std::string& manifest_path, const std::string& out_override)
{
    const json m = read_json(manifest_path);
    if (m.value("tool", "") != "geoward")
        throw invalid_input_error("not a geoward manifest: " + manifest_path);
    const std::string command = m.at("command").get<std::string>();
    json params = m.at("parameters");
    if (!out_override.empty()) params["out"] = out_override;

    if (command == "train") run_train(params.get<TrainParams>());
    else if (command == "spectrum") run_spectrum(params.get<SpectrumParams>());
    else if (command == "perturb") run_perturb(params.get<PerturbParams>());
    else if (command == "damage-path") run_damage_path(params.get<DamagePathParams>());
    else if (command == "recover") run_recover(params.get<RecoverParams>());
    else if (command == "reconfigure") run_reconfigure(params.get<ReconfigureParams>());
    else throw invalid_input_error("manifest has unknown command '" + command + "'");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    init_threads_from_env();

    CLI::App app{"geoward: pullback-metric resilience analysis and geodesic recovery for MLPs"};
    app.set_version_flag("--version", kVersion);
    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (default: machine parallelism)");

    TrainParams tp;
    auto* ct = app.add_subcommand("train", "train an MLP and write a checkpoint");
    ct->add_option("--data", tp.data, "synth:... or idx:images,labels[,pool=N]")->required();
    ct->add_option("--arch", tp.arch, "layer sizes, e.g. 2-16-3")->required();
    ct->add_option("--activation", tp.activation, "tanh|relu");
    ct->add_option("--output-mode", tp.output_mode, "softmax|identity");
    ct->add_option("--loss", tp.loss, "cross_entropy|mse");
    ct->add_option("--epochs", tp.epochs);
    ct->add_option("--lr", tp.lr);
    ct->add_option("--batch-size", tp.batch_size);
    ct->add_option("--seed", tp.seed);
    ct->add_flag("--export-data", tp.export_data, "also write the dataset as CSV");
    ct->add_option("--out", tp.out, "output directory")->required();

    SpectrumParams sp;
    auto* cs = app.add_subcommand("spectrum", "metric tensor eigen-spectrum and rho");
    cs->add_option("--model", sp.model)->required();
    cs->add_option("--data", sp.data)->required();
    cs->add_option("--batch", sp.batch, "metric batch size");
    cs->add_option("--threshold", sp.threshold, "vulnerability threshold");
    cs->add_option("--out", sp.out)->required();

    PerturbParams pp;
    auto* cp = app.add_subcommand("perturb", "random / adversarial weight perturbation report");
    cp->add_option("--model", pp.model)->required();
    cp->add_option("--data", pp.data)->required();
    cp->add_option("--mode", pp.mode, "random|adversarial|both");
    cp->add_option("--sigma", pp.sigma, "perturbation norm");
    cp->add_option("--trials", pp.trials, "number of random trials");
    cp->add_option("--top-k", pp.top_k, "eigenvectors in the adversarial mix");
    cp->add_option("--batch", pp.batch, "metric batch size");
    cp->add_option("--seed", pp.seed);
    cp->add_option("--out", pp.out)->required();

    DamagePathParams dp;
    auto* cd = app.add_subcommand("damage-path", "trace performance along a damage path");
    cd->add_option("--model", dp.model)->required();
    cd->add_option("--data", dp.data)->required();
    cd->add_option("--plan", dp.plan, "plan file or layer:nodes (e.g. 1:0-7)")->required();
    cd->add_option("--steps", dp.steps);
    cd->add_option("--mode", dp.mode, "linear|stepwise");
    cd->add_option("--batch", dp.batch, "metric batch size");
    cd->add_option("--out", dp.out)->required();

    RecoverParams rp;
    auto* cr = app.add_subcommand("recover", "geodesic recovery to a damage hyperplane");
    cr->add_option("--model", rp.model)->required();
    cr->add_option("--data", rp.data)->required();
    cr->add_option("--plan", rp.plan)->required();
    cr->add_option("--beta", rp.beta, "QP trade-off (0 = default sweep)");
    cr->add_option("--beta-sweep", rp.beta_sweep, "comma list of betas");
    cr->add_option("--cap", rp.cap, "step norm^2 cap");
    cr->add_option("--tol", rp.tol, "hyperplane tolerance");
    cr->add_option("--max-steps", rp.max_steps);
    cr->add_option("--batch", rp.batch, "metric batch size");
    cr->add_flag("--with-naive", rp.with_naive, "also emit the paired naive trace");
    cr->add_option("--naive-steps", rp.naive_steps);
    cr->add_option("--out", rp.out)->required();

    ReconfigureParams qp;
    auto* cq = app.add_subcommand("reconfigure", "move between damage configurations");
    cq->add_option("--model", qp.model, "checkpoint currently on the old hyperplane")
        ->required();
    cq->add_option("--data", qp.data)->required();
    cq->add_option("--old-plan", qp.old_plan)->required();
    cq->add_option("--new-plan", qp.new_plan)->required();
    cq->add_option("--beta", qp.beta);
    cq->add_option("--beta-sweep", qp.beta_sweep);
    cq->add_option("--cap", qp.cap);
    cq->add_option("--tol", qp.tol);
    cq->add_option("--max-steps", qp.max_steps);
    cq->add_option("--batch", qp.batch);
    cq->add_option("--out", qp.out)->required();

    std::string manifest_path, replay_out;
    auto* cy = app.add_subcommand("replay", "re-run a command from its manifest");
    cy->add_option("manifest", manifest_path, "manifest.json path")->required();
    cy->add_option("--out", replay_out, "override output directory");

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) set_threads(threads);

    try {
        if (ct->parsed()) run_train(tp);
        else if (cs->parsed()) run_spectrum(sp);
        else if (cp->parsed()) run_perturb(pp);
        else if (cd->parsed()) run_damage_path(dp);
        else if (cr->parsed()) run_recover(rp);
        else if (cq->parsed()) run_reconfigure(qp);
        else if (cy->parsed()) return run_replay(manifest_path, replay_out);
    } catch (const invalid_input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const non_convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const numerical_failure_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
