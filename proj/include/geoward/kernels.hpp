#pragma once

#include "geoward/dataset.hpp"
#include "geoward/network.hpp"

#include <vector>

namespace geoward {

enum class LossKind { cross_entropy, mse };

std::string to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

// Data-parallel inner loops. Every kernel ships in two variants: a plain
// serial reference and an OpenMP version. The OpenMP variants write to
// disjoint per-item slots (or disjoint matrix rows) and reduce sequentially
// in item order, so serial and parallel results are bit-identical at any
// thread count. Tests hold the pair to exact equality; tools/bench_kernels
// compares their throughput.

// Adds sum_x J_x^T J_x over the batch (in ascending id order) into the
// row-major n x n buffer `gram`.
void gram_accumulate_serial(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                            std::vector<double>& gram);
void gram_accumulate_parallel(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                              std::vector<double>& gram);

// ||J_x du||^2 per example, via one forward-tangent sweep each.
std::vector<double> directional_sq_serial(const NetworkSpec& spec, const FlatWeights& w,
                                          const Batch& batch, const std::vector<double>& du);
std::vector<double> directional_sq_parallel(const NetworkSpec& spec, const FlatWeights& w,
                                            const Batch& batch, const std::vector<double>& du);

struct EvalSums {
    std::vector<double> per_example_loss;
    long correct = 0;

    double mean_loss() const;
};

EvalSums eval_serial(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                     LossKind loss);
EvalSums eval_parallel(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                       LossKind loss);

// Internal single-example pieces reused by the kernels and by training.
std::vector<double> jacobian_matrix(const NetworkSpec& spec, const FlatWeights& w,
                                    const double* x); // m*n row-major
double directional_sq_one(const NetworkSpec& spec, const FlatWeights& w, const double* x,
                          const std::vector<double>& du);
double example_loss(const NetworkSpec& spec, const std::vector<double>& output, int label,
                    LossKind loss);
int argmax_lowest_tie(const std::vector<double>& v);

} // namespace geoward
