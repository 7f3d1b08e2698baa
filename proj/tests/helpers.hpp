#pragma once

#include "geoward/dataset.hpp"
#include "geoward/linalg.hpp"
#include "geoward/network.hpp"
#include "geoward/rng.hpp"

#include <cmath>
#include <vector>

namespace geoward::testing {

inline SymMatrix random_symmetric(std::size_t n, Rng& rng, double scale = 1.0)
{
    SymMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) a.set(i, j, scale * rng.normal());
    return a;
}

// Random PSD matrix as B^T B / n.
inline SymMatrix random_psd(std::size_t n, Rng& rng, double scale = 1.0)
{
    std::vector<double> b(n * n);
    for (auto& v : b) v = scale * rng.normal();
    SymMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b[k * n + i] * b[k * n + j];
            a.set(i, j, s / static_cast<double>(n));
        }
    return a;
}

inline std::vector<double> random_unit_vector(std::size_t n, Rng& rng)
{
    std::vector<double> v = rng.normal_vector(n);
    const double nrm = norm2(v);
    for (auto& x : v) x /= nrm;
    return v;
}

inline FlatWeights random_weights(const NetworkSpec& spec, Rng& rng, double scale = 0.7)
{
    FlatWeights w(spec);
    for (auto& v : w.values()) v = scale * rng.normal();
    return w;
}

// Independent straight-line forward pass used as an oracle against the
// library implementation. Deliberately naive: explicit loops over nested
// vectors, no shared code with geoward::forward.
inline std::vector<double> naive_forward(const NetworkSpec& spec, const FlatWeights& w,
                                         const std::vector<double>& x)
{
    std::vector<double> act = x;
    const auto& layout = w.layout();
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int in_n = spec.layer_sizes[l];
        const int out_n = spec.layer_sizes[l + 1];
        std::vector<double> next(out_n, 0.0);
        for (int o = 0; o < out_n; ++o) {
            double acc = w.values()[layout.bias_index(l, o)];
            for (int i = 0; i < in_n; ++i)
                acc += w.values()[layout.weight_index(l, o, i)] * act[i];
            next[o] = acc;
        }
        const bool is_last = (l + 2 == spec.layer_sizes.size());
        if (!is_last) {
            for (auto& v : next)
                v = spec.hidden_activation == Activation::tanh_act ? std::tanh(v)
                                                                   : (v > 0.0 ? v : 0.0);
        } else if (spec.output_mode == OutputMode::softmax) {
            double mx = next[0];
            for (double v : next) mx = std::max(mx, v);
            double sum = 0.0;
            for (auto& v : next) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (auto& v : next) v /= sum;
        }
        act = next;
    }
    return act;
}

// Central finite-difference Jacobian entry d f_i / d w_j.
inline double fd_jacobian_entry(const NetworkSpec& spec, const FlatWeights& w,
                                const std::vector<double>& x, int i, std::size_t j,
                                double eps = 1e-6)
{
    FlatWeights wp = w;
    FlatWeights wm = w;
    wp[j] += eps;
    wm[j] -= eps;
    const std::vector<double> fp = forward(spec, wp, x);
    const std::vector<double> fm = forward(spec, wm, x);
    return (fp[i] - fm[i]) / (2.0 * eps);
}

// Small deterministic three-blob dataset most tests train on.
inline Dataset desk_dataset(std::uint64_t seed = 7, int per_class = 60, double sep = 6.0)
{
    return synth_gaussians(3, 2, per_class, sep, seed);
}

} // namespace geoward::testing
