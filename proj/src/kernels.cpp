#include "geoward/kernels.hpp"

#include "geoward/errors.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace geoward {

std::string to_string(LossKind k)
{
    return k == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

LossKind loss_from_string(const std::string& s)
{
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "mse") return LossKind::mse;
    throw invalid_input_error("unknown loss: " + s);
}

std::vector<double> jacobian_matrix(const NetworkSpec& spec, const FlatWeights& w,
                                    const double* x)
{
    const int m = spec.output_dim();
    const std::size_t n = w.size();
    const std::vector<double> xv(x, x + spec.input_dim());
    const ForwardCache cache = forward_cached(spec, w, xv);

    std::vector<double> jac(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        std::vector<double> seed(m, 0.0);
        seed[i] = 1.0;
        const std::vector<double> row = backprop_output(spec, w, cache, seed);
        std::memcpy(jac.data() + static_cast<std::size_t>(i) * n, row.data(),
                    n * sizeof(double));
    }
    return jac;
}

namespace {

// Accumulates J^T J of one example into the upper triangle of `gram`.
// Row-parallel: each thread owns whole rows, so entries have a unique
// writer and a fixed per-entry summation order.
void add_gram_upper(const std::vector<double>& jac, int m, std::size_t n,
                    std::vector<double>& gram, bool parallel)
{
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
#endif
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double* grow = gram.data() + i * n;
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < m; ++k)
                s += jac[static_cast<std::size_t>(k) * n + i] *
                     jac[static_cast<std::size_t>(k) * n + j];
            grow[j] += s;
        }
    }
    (void)parallel;
}

void gram_accumulate_impl(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                          std::vector<double>& gram, bool parallel)
{
    const std::size_t n = w.size();
    if (gram.size() != n * n) throw invalid_input_error("gram buffer size mismatch");
    const int m = spec.output_dim();
    // Sequential over examples (ids ascending), parallel inside each term.
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const std::vector<double> jac = jacobian_matrix(spec, w, batch.input(k));
        add_gram_upper(jac, m, n, gram, parallel);
    }
    // Mirror the upper triangle.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) gram[j * n + i] = gram[i * n + j];
}

} // namespace

void gram_accumulate_serial(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                            std::vector<double>& gram)
{
    gram_accumulate_impl(spec, w, batch, gram, false);
}

void gram_accumulate_parallel(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                              std::vector<double>& gram)
{
    gram_accumulate_impl(spec, w, batch, gram, true);
}

double directional_sq_one(const NetworkSpec& spec, const FlatWeights& w, const double* x,
                          const std::vector<double>& du)
{
    // Forward-tangent sweep: propagate (a, da) through the layers, where da
    // carries the effect of moving the weights along du.
    const auto& layout = w.layout();
    const std::size_t L = spec.weight_layers();

    std::vector<double> a(x, x + spec.input_dim());
    std::vector<double> da(a.size(), 0.0);

    for (std::size_t l = 0; l < L; ++l) {
        const int in_n = spec.layer_sizes[l];
        const int out_n = spec.layer_sizes[l + 1];
        std::vector<double> z(out_n), dz(out_n);
        for (int o = 0; o < out_n; ++o) {
            const std::size_t base = layout.weight_index(l, o, 0);
            const double* wr = w.values().data() + base;
            const double* dur = du.data() + base;
            double s = wr[in_n];
            double ds = dur[in_n];
            for (int i = 0; i < in_n; ++i) {
                s += wr[i] * a[i];
                ds += dur[i] * a[i] + wr[i] * da[i];
            }
            z[o] = s;
            dz[o] = ds;
        }
        if (l + 1 < L) {
            a.resize(out_n);
            da.resize(out_n);
            for (int o = 0; o < out_n; ++o) {
                const double act = spec.hidden_activation == Activation::tanh_act
                                       ? std::tanh(z[o])
                                       : (z[o] > 0.0 ? z[o] : 0.0);
                const double deriv = spec.hidden_activation == Activation::tanh_act
                                         ? 1.0 - act * act
                                         : (z[o] > 0.0 ? 1.0 : 0.0);
                a[o] = act;
                da[o] = deriv * dz[o];
            }
        } else {
            a = z;
            da = dz;
        }
    }

    if (spec.output_mode == OutputMode::softmax) {
        // dy = (diag(p) - p p^T) dz on the logits.
        std::vector<double> p = a;
        double mx = p[0];
        for (double v : p) mx = std::max(mx, v);
        double sum = 0.0;
        for (auto& v : p) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto& v : p) v /= sum;
        double pd = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) pd += p[k] * da[k];
        double out = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double dy = p[k] * (da[k] - pd);
            out += dy * dy;
        }
        return out;
    }
    double out = 0.0;
    for (double v : da) out += v * v;
    return out;
}

namespace {

std::vector<double> directional_sq_impl(const NetworkSpec& spec, const FlatWeights& w,
                                        const Batch& batch, const std::vector<double>& du,
                                        bool parallel)
{
    if (du.size() != w.size())
        throw invalid_input_error("directional_sq: du has wrong length");
    std::vector<double> slots(batch.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (long long k = 0; k < static_cast<long long>(batch.size()); ++k)
        slots[static_cast<std::size_t>(k)] =
            directional_sq_one(spec, w, batch.input(static_cast<std::size_t>(k)), du);
    (void)parallel;
    return slots;
}

} // namespace

std::vector<double> directional_sq_serial(const NetworkSpec& spec, const FlatWeights& w,
                                          const Batch& batch, const std::vector<double>& du)
{
    return directional_sq_impl(spec, w, batch, du, false);
}

std::vector<double> directional_sq_parallel(const NetworkSpec& spec, const FlatWeights& w,
                                            const Batch& batch, const std::vector<double>& du)
{
    return directional_sq_impl(spec, w, batch, du, true);
}

double EvalSums::mean_loss() const
{
    // Sequential sum in example order regardless of how slots were filled.
    double s = 0.0;
    for (double v : per_example_loss) s += v;
    return s / static_cast<double>(per_example_loss.size());
}

int argmax_lowest_tie(const std::vector<double>& v)
{
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double example_loss(const NetworkSpec& spec, const std::vector<double>& output, int label,
                    LossKind loss)
{
    if (loss == LossKind::cross_entropy) {
        if (spec.output_mode != OutputMode::softmax)
            throw invalid_input_error("cross_entropy loss requires softmax outputs");
        const double p = std::max(output[label], std::numeric_limits<double>::min());
        return -std::log(p);
    }
    double s = 0.0;
    for (int k = 0; k < static_cast<int>(output.size()); ++k) {
        const double target = (k == label) ? 1.0 : 0.0;
        const double d = output[k] - target;
        s += d * d;
    }
    return s;
}

namespace {

EvalSums eval_impl(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                   LossKind loss, bool parallel)
{
    EvalSums sums;
    sums.per_example_loss.resize(d.size());
    long correct = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : correct) if (parallel)
#endif
    for (long long i = 0; i < static_cast<long long>(d.size()); ++i) {
        const std::size_t e = static_cast<std::size_t>(i);
        const std::vector<double> out = forward(spec, w, d.input_vector(e));
        sums.per_example_loss[e] = example_loss(spec, out, d.labels[e], loss);
        if (argmax_lowest_tie(out) == d.labels[e]) correct += 1;
    }
    (void)parallel;
    sums.correct = correct;
    return sums;
}

} // namespace

EvalSums eval_serial(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                     LossKind loss)
{
    return eval_impl(spec, w, d, loss, false);
}

EvalSums eval_parallel(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                       LossKind loss)
{
    return eval_impl(spec, w, d, loss, true);
}

} // namespace geoward
