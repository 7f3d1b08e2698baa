#include "geoward/network.hpp"

#include "geoward/damage.hpp"
#include "geoward/errors.hpp"
#include "geoward/rng.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace geoward {

std::string to_string(Activation a)
{
    return a == Activation::tanh_act ? "tanh" : "relu";
}

std::string to_string(OutputMode m)
{
    return m == OutputMode::softmax ? "softmax" : "identity";
}

Activation activation_from_string(const std::string& s)
{
    if (s == "tanh") return Activation::tanh_act;
    if (s == "relu") return Activation::relu;
    throw invalid_input_error("unknown activation: " + s);
}

OutputMode output_mode_from_string(const std::string& s)
{
    if (s == "softmax") return OutputMode::softmax;
    if (s == "identity") return OutputMode::identity;
    throw invalid_input_error("unknown output mode: " + s);
}

void NetworkSpec::validate() const
{
    if (layer_sizes.size() < 2)
        throw invalid_input_error("NetworkSpec: need at least 2 layers");
    for (int s : layer_sizes)
        if (s < 1) throw invalid_input_error("NetworkSpec: all layer sizes must be >= 1");
}

WeightLayout::WeightLayout(const NetworkSpec& spec) : sizes_(spec.layer_sizes)
{
    spec.validate();
    offsets_.resize(spec.weight_layers());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_[l] = off;
        off += static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
    }
    total_ = off;
}

std::size_t WeightLayout::weight_index(std::size_t layer, std::size_t out, std::size_t in) const
{
    return offsets_[layer] + out * static_cast<std::size_t>(sizes_[layer] + 1) + in;
}

std::size_t WeightLayout::bias_index(std::size_t layer, std::size_t out) const
{
    return offsets_[layer] + out * static_cast<std::size_t>(sizes_[layer] + 1) +
           static_cast<std::size_t>(sizes_[layer]);
}

FlatWeights::FlatWeights(const NetworkSpec& spec)
    : layout_(spec), values_(layout_.size(), 0.0)
{
}

FlatWeights::FlatWeights(const NetworkSpec& spec, std::vector<double> values) : layout_(spec)
{
    if (values.size() != layout_.size())
        throw invalid_input_error("FlatWeights: expected " + std::to_string(layout_.size()) +
                                  " values, got " + std::to_string(values.size()));
    values_ = std::move(values);
}

namespace {

inline double activate(Activation a, double z)
{
    return a == Activation::tanh_act ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative at the realized activation pattern; for relu the kink at z=0
// takes the right-hand value.
inline double activate_deriv(Activation a, double z, double act)
{
    return a == Activation::tanh_act ? 1.0 - act * act : (z > 0.0 ? 1.0 : 0.0);
}

void softmax_inplace(std::vector<double>& z)
{
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

void check_finite(const std::vector<double>& v, std::size_t layer)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw numerical_failure_error("forward: non-finite value at layer " +
                                          std::to_string(layer));
}

} // namespace

ForwardCache forward_cached(const NetworkSpec& spec, const FlatWeights& w,
                            const std::vector<double>& x)
{
    spec.validate();
    if (static_cast<int>(x.size()) != spec.input_dim())
        throw invalid_input_error("forward: input has dim " + std::to_string(x.size()) +
                                  ", spec expects " + std::to_string(spec.input_dim()));
    if (w.size() != w.layout().size() || w.layout().layer_sizes() != spec.layer_sizes)
        throw invalid_input_error("forward: weight vector does not match spec");

    const auto& layout = w.layout();
    const std::size_t L = spec.weight_layers();

    ForwardCache cache;
    cache.activations.resize(L);
    cache.preacts.resize(L);
    cache.activations[0] = x;

    std::vector<double> a = x;
    for (std::size_t l = 0; l < L; ++l) {
        cache.activations[l] = a;
        const int in_n = spec.layer_sizes[l];
        const int out_n = spec.layer_sizes[l + 1];
        std::vector<double> z(out_n);
        for (int o = 0; o < out_n; ++o) {
            const double* row = w.values().data() + layout.weight_index(l, o, 0);
            double s = row[in_n]; // bias sits after the input weights
            for (int i = 0; i < in_n; ++i) s += row[i] * a[i];
            z[o] = s;
        }
        check_finite(z, l + 1);
        cache.preacts[l] = z;
        if (l + 1 < L) {
            a.resize(out_n);
            for (int o = 0; o < out_n; ++o) a[o] = activate(spec.hidden_activation, z[o]);
        } else {
            a = z;
        }
    }

    cache.logits = cache.preacts.back();
    cache.output = cache.logits;
    if (spec.output_mode == OutputMode::softmax) softmax_inplace(cache.output);
    check_finite(cache.output, L);
    return cache;
}

std::vector<double> forward(const NetworkSpec& spec, const FlatWeights& w,
                            const std::vector<double>& x)
{
    return forward_cached(spec, w, x).output;
}

std::vector<double> backprop_logits(const NetworkSpec& spec, const FlatWeights& w,
                                    const ForwardCache& cache,
                                    const std::vector<double>& dlogits)
{
    const auto& layout = w.layout();
    const std::size_t L = spec.weight_layers();
    std::vector<double> grad(w.size(), 0.0);

    std::vector<double> delta = dlogits;
    for (std::size_t li = L; li-- > 0;) {
        const int in_n = spec.layer_sizes[li];
        const int out_n = spec.layer_sizes[li + 1];
        const auto& a = cache.activations[li];
        for (int o = 0; o < out_n; ++o) {
            double* grow = grad.data() + layout.weight_index(li, o, 0);
            const double d = delta[o];
            for (int i = 0; i < in_n; ++i) grow[i] += d * a[i];
            grow[in_n] += d;
        }
        if (li == 0) break;
        std::vector<double> prev(in_n, 0.0);
        for (int o = 0; o < out_n; ++o) {
            const double* row = w.values().data() + layout.weight_index(li, o, 0);
            const double d = delta[o];
            for (int i = 0; i < in_n; ++i) prev[i] += row[i] * d;
        }
        const auto& z = cache.preacts[li - 1];
        const auto& act = cache.activations[li];
        for (int i = 0; i < in_n; ++i)
            prev[i] *= activate_deriv(spec.hidden_activation, z[i], act[i]);
        delta = std::move(prev);
    }
    return grad;
}

std::vector<double> backprop_output(const NetworkSpec& spec, const FlatWeights& w,
                                    const ForwardCache& cache,
                                    const std::vector<double>& doutput)
{
    if (spec.output_mode == OutputMode::identity)
        return backprop_logits(spec, w, cache, doutput);
    // d softmax / d logits = diag(p) - p p^T
    const auto& p = cache.output;
    const int m = spec.output_dim();
    double pd = 0.0;
    for (int k = 0; k < m; ++k) pd += p[k] * doutput[k];
    std::vector<double> dlogits(m);
    for (int k = 0; k < m; ++k) dlogits[k] = p[k] * (doutput[k] - pd);
    return backprop_logits(spec, w, cache, dlogits);
}

JacobianBlock jacobian(const NetworkSpec& spec, const FlatWeights& w,
                       const std::vector<double>& x, int input_id)
{
    const ForwardCache cache = forward_cached(spec, w, x);
    const int m = spec.output_dim();
    const std::size_t n = w.size();

    JacobianBlock jb;
    jb.rows = m;
    jb.cols = static_cast<int>(n);
    jb.matrix.resize(static_cast<std::size_t>(m) * n);
    jb.input_id = input_id;
    jb.base_point = w;

    // One reverse sweep per output component.
    for (int i = 0; i < m; ++i) {
        std::vector<double> seed(m, 0.0);
        seed[i] = 1.0;
        const std::vector<double> row = backprop_output(spec, w, cache, seed);
        std::memcpy(jb.matrix.data() + static_cast<std::size_t>(i) * n, row.data(),
                    n * sizeof(double));
    }
    return jb;
}

FlatWeights apply_mask(const FlatWeights& w, const DamagePlan& plan)
{
    FlatWeights out = w;
    for (std::size_t idx : plan.indices) {
        if (idx >= w.size())
            throw invalid_input_error("apply_mask: index " + std::to_string(idx) +
                                      " out of range for n = " + std::to_string(w.size()));
        out[idx] = 0.0;
    }
    return out;
}

namespace {

void write_u64_le(std::ofstream& f, std::uint64_t v)
{
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::ifstream& f)
{
    unsigned char buf[8];
    f.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void save_checkpoint(const std::string& json_path, const NetworkSpec& spec,
                     const FlatWeights& w, const std::string& dataset_fingerprint)
{
    spec.validate();
    namespace fs = std::filesystem;
    const fs::path jpath(json_path);
    const std::string blob_name = jpath.stem().string() + ".blob";
    const fs::path bpath = jpath.parent_path() / blob_name;

    nlohmann::json manifest;
    manifest["format"] = "geoward-checkpoint";
    manifest["version"] = 1;
    manifest["layer_sizes"] = spec.layer_sizes;
    manifest["hidden_activation"] = to_string(spec.hidden_activation);
    manifest["output_mode"] = to_string(spec.output_mode);
    manifest["n"] = w.size();
    manifest["dataset_fingerprint"] = dataset_fingerprint;
    manifest["blob"] = blob_name;

    std::ofstream jf(jpath);
    if (!jf) throw invalid_input_error("save_checkpoint: cannot open " + json_path);
    jf << manifest.dump(2) << "\n";

    std::ofstream bf(bpath, std::ios::binary);
    if (!bf) throw invalid_input_error("save_checkpoint: cannot open " + bpath.string());
    for (double v : w.values()) write_u64_le(bf, std::bit_cast<std::uint64_t>(v));
}

Checkpoint load_checkpoint(const std::string& json_path)
{
    namespace fs = std::filesystem;
    std::ifstream jf(json_path);
    if (!jf) throw invalid_input_error("load_checkpoint: cannot open " + json_path);
    nlohmann::json manifest;
    try {
        jf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("load_checkpoint: bad manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "geoward-checkpoint")
        throw format_error("load_checkpoint: not a geoward checkpoint manifest");

    Checkpoint ck;
    ck.spec.layer_sizes = manifest.at("layer_sizes").get<std::vector<int>>();
    ck.spec.hidden_activation =
        activation_from_string(manifest.at("hidden_activation").get<std::string>());
    ck.spec.output_mode = output_mode_from_string(manifest.at("output_mode").get<std::string>());
    ck.spec.validate();
    ck.dataset_fingerprint = manifest.value("dataset_fingerprint", "");

    const fs::path bpath =
        fs::path(json_path).parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream bf(bpath, std::ios::binary);
    if (!bf) throw invalid_input_error("load_checkpoint: cannot open blob " + bpath.string());

    const std::size_t n = manifest.at("n").get<std::size_t>();
    const WeightLayout layout(ck.spec);
    if (layout.size() != n)
        throw format_error("load_checkpoint: manifest n does not match layer sizes");

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = std::bit_cast<double>(read_u64_le(bf));
        if (!bf) throw format_error("load_checkpoint: blob truncated at value " +
                                    std::to_string(i));
    }
    ck.weights = FlatWeights(ck.spec, std::move(values));
    return ck;
}

FlatWeights init_weights(const NetworkSpec& spec, std::uint64_t seed)
{
    FlatWeights w(spec);
    Rng rng(seed);
    const auto& layout = w.layout();
    for (std::size_t l = 0; l < spec.weight_layers(); ++l) {
        const int in_n = spec.layer_sizes[l];
        const int out_n = spec.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_n));
        for (int o = 0; o < out_n; ++o)
            for (int i = 0; i < in_n; ++i)
                w[layout.weight_index(l, o, i)] = rng.uniform(-bound, bound);
    }
    return w;
}

} // namespace geoward
