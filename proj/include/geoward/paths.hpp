#pragma once

#include "geoward/damage.hpp"
#include "geoward/dataset.hpp"
#include "geoward/kernels.hpp"
#include "geoward/network.hpp"

#include <string>
#include <vector>

namespace geoward {

enum class PathKind { naive_linear, stepwise_deletion, geodesic, fine_tune };

std::string to_string(PathKind k);

struct PathSample {
    double t = 0.0;
    FlatWeights w;
    double loss = 0.0;
    double accuracy = 0.0;
    double speed = 0.0;
    double acceleration = 0.0;
    double work_epochs = 0.0; // cumulative gradient-equivalent work
};

// Sampled path gamma(t) in weight space with per-sample performance and
// break-down quantities. t is strictly increasing from 0 to 1 (a zero-step
// result may degenerate to the single sample t = 0).
struct PathTrace {
    std::vector<PathSample> samples;
    PathKind kind = PathKind::naive_linear;

    double mean_accuracy() const;
    double final_accuracy() const { return samples.back().accuracy; }
    double peak_abs_acceleration() const;
};

// Straight path: damaged coordinates interpolate linearly to 0, undamaged
// coordinates stay fixed. Returns `steps` points at uniform t.
std::vector<FlatWeights> naive_linear_path(const FlatWeights& w_t, const DamagePlan& plan,
                                           int steps);

// Node-at-a-time deletion staircase: one point per cumulative group, plus
// the undamaged start.
std::vector<FlatWeights> stepwise_deletion_path(const FlatWeights& w_t,
                                                const std::vector<DamagePlan>& node_groups);

// Integral of the speed along the path (no square root), midpoint rule per
// segment. `use_sqrt` switches to Riemannian length for comparisons.
double path_energy(const NetworkSpec& spec, const Batch& batch,
                   const std::vector<FlatWeights>& path, bool use_sqrt = false);

// s = <velocity, velocity>_w, the metric quadratic form of the velocity.
double breakdown_speed(const NetworkSpec& spec, const Batch& batch, const FlatWeights& w,
                       const std::vector<double>& velocity);

// ds/dt along the path direction, by central difference of the speed:
// (s(w + h v) - s(w - h v)) / 2h. h = 0 picks the default step
// 1e-4 * ||w|| / max(||v||, 1e-12).
double breakdown_acceleration(const NetworkSpec& spec, const Batch& batch, const FlatWeights& w,
                              const std::vector<double>& velocity, double h = 0.0);

// Full trace: loss/accuracy on eval_set, speed and acceleration from
// segment velocities against the metric batch.
PathTrace trace_path(const NetworkSpec& spec, const Batch& batch, const Dataset& eval_set,
                     const std::vector<FlatWeights>& path, PathKind kind,
                     LossKind loss = LossKind::cross_entropy);

// CSV export (t, loss, accuracy, speed, acceleration, work_epochs) plus a
// JSON metadata sidecar.
void save_trace_csv(const PathTrace& trace, const std::string& path);
void save_trace_metadata(const PathTrace& trace, const std::string& path,
                         const std::string& extra_json = "");

} // namespace geoward
