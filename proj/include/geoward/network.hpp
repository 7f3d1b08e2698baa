#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geoward {

enum class Activation { tanh_act, relu };
enum class OutputMode { softmax, identity };

std::string to_string(Activation a);
std::string to_string(OutputMode m);
Activation activation_from_string(const std::string& s);
OutputMode output_mode_from_string(const std::string& s);

// Layered MLP architecture: layer_sizes[0] is the input dimension,
// layer_sizes.back() the output dimension.
struct NetworkSpec {
    std::vector<int> layer_sizes;
    Activation hidden_activation = Activation::tanh_act;
    OutputMode output_mode = OutputMode::softmax;

    void validate() const;
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t weight_layers() const { return layer_sizes.size() - 1; }
};

// Bijection between (layer, unit, unit) coordinates and flat indices.
// Weight layer l connects layer_sizes[l] -> layer_sizes[l+1]; each output
// unit owns a contiguous run of its input weights followed by its bias.
class WeightLayout {
public:
    WeightLayout() = default;
    explicit WeightLayout(const NetworkSpec& spec);

    std::size_t size() const { return total_; }
    std::size_t weight_index(std::size_t layer, std::size_t out, std::size_t in) const;
    std::size_t bias_index(std::size_t layer, std::size_t out) const;
    std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }
    const std::vector<int>& layer_sizes() const { return sizes_; }

private:
    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

// All network parameters as one flat coordinate vector w in R^n.
class FlatWeights {
public:
    FlatWeights() = default;
    explicit FlatWeights(const NetworkSpec& spec);
    FlatWeights(const NetworkSpec& spec, std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const WeightLayout& layout() const { return layout_; }

private:
    WeightLayout layout_;
    std::vector<double> values_;
};

struct DamagePlan; // damage.hpp

// Exact Jacobian of the (post-output-mode) outputs with respect to all
// weights at one input: m x n row-major.
struct JacobianBlock {
    std::vector<double> matrix; // m*n
    int rows = 0;
    int cols = 0;
    int input_id = -1;
    FlatWeights base_point;

    double at(int i, int j) const { return matrix[static_cast<std::size_t>(i) * cols + j]; }
};

// Per-layer activations cached by a forward pass, enough to run any number
// of reverse sweeps afterwards.
struct ForwardCache {
    std::vector<std::vector<double>> activations; // a_0 = x .. a_{L-1}
    std::vector<std::vector<double>> preacts;     // z_l per weight layer
    std::vector<double> logits;                   // alias of preacts.back()
    std::vector<double> output;                   // post output-mode
};

std::vector<double> forward(const NetworkSpec& spec, const FlatWeights& w,
                            const std::vector<double>& x);
ForwardCache forward_cached(const NetworkSpec& spec, const FlatWeights& w,
                            const std::vector<double>& x);

// Reverse sweep from a seed on the logits (pre-output-mode). Returns the
// gradient with respect to all weights.
std::vector<double> backprop_logits(const NetworkSpec& spec, const FlatWeights& w,
                                    const ForwardCache& cache,
                                    const std::vector<double>& dlogits);

// Reverse sweep from a seed on the post-output-mode output; chains through
// softmax when the spec uses it.
std::vector<double> backprop_output(const NetworkSpec& spec, const FlatWeights& w,
                                    const ForwardCache& cache,
                                    const std::vector<double>& doutput);

JacobianBlock jacobian(const NetworkSpec& spec, const FlatWeights& w,
                       const std::vector<double>& x, int input_id = -1);

// Returns a copy of w with the plan's indices forced to exactly zero.
FlatWeights apply_mask(const FlatWeights& w, const DamagePlan& plan);

// Checkpoint = JSON manifest + sidecar blob of n little-endian float64 in
// flat-index order. Round-trips are bit-exact.
struct Checkpoint {
    NetworkSpec spec;
    FlatWeights weights;
    std::string dataset_fingerprint;
};

void save_checkpoint(const std::string& json_path, const NetworkSpec& spec,
                     const FlatWeights& w, const std::string& dataset_fingerprint);
Checkpoint load_checkpoint(const std::string& json_path);

// Deterministic initialization: uniform in +-1/sqrt(fan_in), biases zero.
FlatWeights init_weights(const NetworkSpec& spec, std::uint64_t seed);

} // namespace geoward
