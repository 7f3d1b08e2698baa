#pragma once

#include "geoward/dataset.hpp"
#include "geoward/kernels.hpp"
#include "geoward/linalg.hpp"
#include "geoward/network.hpp"

#include <vector>

namespace geoward {

// Pullback metric g = (1/|batch|) sum_x J_x^T J_x at a base point in weight
// space. Immutable after assembly.
struct MetricTensor {
    SymMatrix g;
    FlatWeights base_point;
    std::vector<int> batch_ids;
    NetworkSpec spec;
};

// Eigenvalues above the threshold mark vulnerable directions, below it
// resilient ones; boundary values count as vulnerable.
struct Spectrum {
    EigenDecomposition decomposition;
    int vulnerable_count = 0;
    int resilient_count = 0;
    double rho = 0.0;
    double threshold = 0.0;
};

inline constexpr double kVulnerableThreshold = 1e-3;
inline constexpr std::size_t kMetricDimCap = 5000;

MetricTensor assemble_metric(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch);

// du^T g du.
double quadratic_form(const MetricTensor& gt, const std::vector<double>& du);

// mean_x ||J_x du||^2 without forming g; agrees with the dense form to
// 1e-10 whenever both are computable.
double quadratic_form_matfree(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                              const std::vector<double>& du);

Spectrum spectrum(const MetricTensor& gt, double threshold = kVulnerableThreshold);

enum class GaussianConvention {
    coordinate_variance_sigma_sq_over_n, // per-coordinate variance sigma^2/n
    paper_sigma_over_d,                  // per-coordinate variance sigma/n as printed
};

// Expected functional change under Gaussian coordinate perturbations:
// (sigma^2/n) * trace(g) under the default convention.
double gaussian_expectation(const MetricTensor& gt, double sigma,
                            GaussianConvention convention =
                                GaussianConvention::coordinate_variance_sigma_sq_over_n);

} // namespace geoward
