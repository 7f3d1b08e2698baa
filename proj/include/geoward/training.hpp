#pragma once

#include "geoward/damage.hpp"
#include "geoward/dataset.hpp"
#include "geoward/kernels.hpp"
#include "geoward/network.hpp"
#include "geoward/paths.hpp"
#include "geoward/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geoward {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::cross_entropy;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    FlatWeights weights;
    std::vector<EpochLog> log;
};

// Mini-batch SGD, deterministic under the seed. Training runs
// single-threaded; per-epoch evaluation uses the parallel kernel (which is
// thread-count invariant).
TrainResult train(const NetworkSpec& spec, const Dataset& d, const TrainConfig& cfg);
TrainResult train_from(const NetworkSpec& spec, const FlatWeights& start, const Dataset& d,
                       const TrainConfig& cfg);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Pure: same (w, d) gives bit-identical outputs. Argmax ties break to the
// lowest class index.
EvalResult evaluate(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                    LossKind loss = LossKind::cross_entropy);

// SGD epochs with the gradient forced to zero on `frozen` coordinates, so
// those coordinates never move. Used by the prune/fine-tune baseline.
void sgd_epochs(const NetworkSpec& spec, FlatWeights& w, const Dataset& d,
                const TrainConfig& cfg, int epochs, const std::vector<std::size_t>& frozen,
                Rng& rng);

// Prune/fine-tune baseline: deletes node groups one at a time and retrains
// the undamaged coordinates after each deletion. The trace records accuracy
// and cumulative update epochs after every step.
PathTrace fine_tune_recovery(const NetworkSpec& spec, const FlatWeights& w_t,
                             const DamagePlan& plan, const std::vector<DamagePlan>& node_order,
                             const Dataset& d, int epochs_per_step, const TrainConfig& cfg,
                             const Batch& metric_batch);

// Evaluates accuracy at w + du and w - du and returns the lower one (the
// quadratic form is sign-blind but accuracy is not).
double perturbed_accuracy_worst_sign(const NetworkSpec& spec, const FlatWeights& w,
                                     const Perturbation& p, const Dataset& eval_set,
                                     LossKind loss = LossKind::cross_entropy);

void save_training_log_csv(const std::vector<EpochLog>& log, const std::string& path);

} // namespace geoward
