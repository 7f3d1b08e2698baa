#pragma once

#include "geoward/damage.hpp"
#include "geoward/dataset.hpp"
#include "geoward/errors.hpp"
#include "geoward/metric.hpp"
#include "geoward/network.hpp"
#include "geoward/paths.hpp"
#include "geoward/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace geoward {

struct RecoveryConfig {
    double beta = 0.0;              // <= 0 selects the default beta sweep
    std::vector<double> beta_sweep; // explicit sweep overrides beta
    double step_norm_sq_cap = 0.01;
    double hyperplane_tol = 1e-6; // on max |w_i| over damaged i
    int max_steps = 400;
    std::size_t metric_batch = 64;
    LossKind loss = LossKind::cross_entropy;

    void validate() const;
};

struct RecoveryResult {
    PathTrace trace;
    double total_energy = 0.0;
    int steps_used = 0;
    double beta_used = 0.0;
    std::vector<double> swept_betas;    // empty when a single beta ran
    std::vector<double> swept_energies; // aligned with swept_betas
};

// Thrown when max_steps runs out before the hyperplane tolerance is met;
// carries the partial path.
class recovery_non_convergence_error : public non_convergence_error {
public:
    recovery_non_convergence_error(const std::string& msg, RecoveryResult partial)
        : non_convergence_error(msg), partial_result(std::move(partial))
    {
    }
    RecoveryResult partial_result;
};

// Unit vector with components -w_i at damaged indices, 0 elsewhere.
// Returns nullopt when w is already on the hyperplane within tol (the
// recovery loop treats that as converged).
std::optional<std::vector<double>> hyperplane_direction(const FlatWeights& w,
                                                        const DamagePlan& plan,
                                                        double tol = 1e-6);

struct QpSolution {
    std::vector<double> theta;
    double mu = 0.0;
    double kkt_residual = 0.0;
    bool constraint_active = false;
};

// Solves  min theta^T g theta - beta theta^T v  s.t.  theta^T theta <= cap
// via the stationarity condition (g + mu I) theta = (beta/2) v with mu >= 0
// found by monotone bisection on ||theta(mu)||. KKT residuals are verified
// on every call.
QpSolution qp_step_dense(const SymMatrix& g, const std::vector<double>& v, double beta,
                         double cap, const EigenDecomposition* precomputed = nullptr);

// Spec-facing wrapper: assembles the metric at w over the batch, then
// solves the QP for the step toward the hyperplane direction v_w.
std::vector<double> qp_step(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                            const std::vector<double>& v_w, const RecoveryConfig& cfg);

// Iterative geodesic recovery: fresh metric batch per step (deterministic
// round-robin), QP step, monotone approach to the damage hyperplane,
// exact final snap of the damaged coordinates to zero. When a beta sweep is
// configured, all betas run and the minimum-energy path wins.
RecoveryResult recover(const NetworkSpec& spec, const FlatWeights& w_t, const DamagePlan& plan,
                       const Dataset& d, const RecoveryConfig& cfg);

// Dynamic reconfiguration between damage masks: coordinates damaged only in
// new_plan are driven to zero; coordinates freed by new_plan start at zero
// and participate in the QP compensation.
RecoveryResult reconfigure(const NetworkSpec& spec, const FlatWeights& w_current,
                           const DamagePlan& old_plan, const DamagePlan& new_plan,
                           const Dataset& d, const RecoveryConfig& cfg);

struct StrategyReport {
    double final_accuracy = 0.0;
    double mean_accuracy = 0.0;
    double work_epochs = 0.0;
};

struct RecoveryComparison {
    StrategyReport geodesic;
    StrategyReport fine_tune;
    PathTrace geodesic_trace;
    PathTrace fine_tune_trace;
};

// Paired geodesic-vs-fine-tune comparison on one damage plan. One QP step
// with metric batch B counts as B/|train| gradient-equivalent epochs.
RecoveryComparison compare_recovery(const NetworkSpec& spec, const FlatWeights& w_t,
                                    const DamagePlan& plan,
                                    const std::vector<DamagePlan>& node_order, const Dataset& d,
                                    const RecoveryConfig& cfg, int ft_epochs_per_step,
                                    const TrainConfig& ft_cfg);

} // namespace geoward
