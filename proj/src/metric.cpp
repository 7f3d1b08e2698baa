#include "geoward/metric.hpp"

#include "geoward/errors.hpp"

#include <cmath>
#include <string>

namespace geoward {

MetricTensor assemble_metric(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch)
{
    const std::size_t n = w.size();
    if (n > kMetricDimCap)
        throw capacity_error("assemble_metric: n = " + std::to_string(n) +
                             " exceeds the dense cap of " + std::to_string(kMetricDimCap) +
                             "; use quadratic_form_matfree instead");
    if (batch.size() == 0) throw invalid_input_error("assemble_metric: empty batch");

    std::vector<double> gram(n * n, 0.0);
    gram_accumulate_parallel(spec, w, batch, gram);

    MetricTensor mt{SymMatrix(n), w, batch.ids, spec};
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < n * n; ++i) mt.g.data()[i] = gram[i] * inv;
    return mt;
}

double quadratic_form(const MetricTensor& gt, const std::vector<double>& du)
{
    if (du.size() != gt.g.dim())
        throw invalid_input_error("quadratic_form: du has length " + std::to_string(du.size()) +
                                  ", metric dim is " + std::to_string(gt.g.dim()));
    const std::vector<double> gdu = gt.g.multiply(du);
    return dot(du, gdu);
}

double quadratic_form_matfree(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                              const std::vector<double>& du)
{
    const std::vector<double> slots = directional_sq_parallel(spec, w, batch, du);
    double s = 0.0;
    for (double v : slots) s += v;
    return s / static_cast<double>(slots.size());
}

Spectrum spectrum(const MetricTensor& gt, double threshold)
{
    Spectrum sp;
    sp.decomposition = sym_eigen(gt.g);
    sp.threshold = threshold;

    const auto& ev = sp.decomposition.eigenvalues;
    const double lambda1 = ev.empty() ? 0.0 : ev.front();
    const double floor = -1e-10 * std::max(lambda1, 1.0);
    for (double l : ev)
        if (l < floor)
            throw numerical_failure_error("spectrum: eigenvalue " + std::to_string(l) +
                                          " below the PSD floor " + std::to_string(floor));

    for (double l : ev) {
        if (l >= threshold)
            ++sp.vulnerable_count;
        else
            ++sp.resilient_count;
    }
    sp.rho = static_cast<double>(sp.vulnerable_count) / static_cast<double>(ev.size());
    return sp;
}

double gaussian_expectation(const MetricTensor& gt, double sigma, GaussianConvention convention)
{
    if (sigma <= 0.0) throw invalid_input_error("gaussian_expectation: sigma must be > 0");
    const double n = static_cast<double>(gt.g.dim());
    const double tr = gt.g.trace();
    switch (convention) {
    case GaussianConvention::coordinate_variance_sigma_sq_over_n:
        return sigma * sigma / n * tr;
    case GaussianConvention::paper_sigma_over_d:
        return sigma / n * tr;
    }
    return 0.0;
}

} // namespace geoward
