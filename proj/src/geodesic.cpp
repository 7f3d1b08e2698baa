#include "geoward/geodesic.hpp"

#include "geoward/errors.hpp"
#include "geoward/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace geoward {

void RecoveryConfig::validate() const
{
    if (step_norm_sq_cap <= 0.0)
        throw invalid_input_error("RecoveryConfig: step_norm_sq_cap must be > 0");
    if (hyperplane_tol <= 0.0)
        throw invalid_input_error("RecoveryConfig: hyperplane_tol must be > 0");
    if (max_steps < 1) throw invalid_input_error("RecoveryConfig: max_steps must be >= 1");
    if (metric_batch < 1) throw invalid_input_error("RecoveryConfig: metric_batch must be >= 1");
}

std::optional<std::vector<double>> hyperplane_direction(const FlatWeights& w,
                                                        const DamagePlan& plan, double tol)
{
    double maxabs = 0.0;
    for (std::size_t idx : plan.indices) {
        if (idx >= w.size())
            throw invalid_input_error("hyperplane_direction: plan index out of range");
        maxabs = std::max(maxabs, std::fabs(w[idx]));
    }
    if (plan.empty() || maxabs <= tol) return std::nullopt;

    std::vector<double> v(w.size(), 0.0);
    double nrm_sq = 0.0;
    for (std::size_t idx : plan.indices) {
        v[idx] = -w[idx];
        nrm_sq += w[idx] * w[idx];
    }
    const double inv = 1.0 / std::sqrt(nrm_sq);
    for (std::size_t idx : plan.indices) v[idx] *= inv;
    return v;
}

QpSolution qp_step_dense(const SymMatrix& g, const std::vector<double>& v, double beta,
                         double cap, const EigenDecomposition* precomputed)
{
    const std::size_t n = g.dim();
    if (v.size() != n) throw invalid_input_error("qp_step: v length mismatch");
    if (beta <= 0.0) throw invalid_input_error("qp_step: beta must be > 0");
    if (cap <= 0.0) throw invalid_input_error("qp_step: cap must be > 0");

    EigenDecomposition local;
    const EigenDecomposition* eig = precomputed;
    if (!eig) {
        local = sym_eigen(g);
        eig = &local;
    }

    const double half_beta = 0.5 * beta;
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = dot(eig->eigenvectors[i], v);

    // Round-off can leave tiny negative eigenvalues on a PSD metric; the
    // solve clamps them at zero.
    std::vector<double> lam(n);
    for (std::size_t i = 0; i < n; ++i) lam[i] = std::max(eig->eigenvalues[i], 0.0);

    auto theta_norm_sq = [&](double mu) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (c[i] == 0.0) continue;
            const double t = half_beta * c[i] / (lam[i] + mu);
            s += t * t;
        }
        return s;
    };

    // Interior solution: mu = 0 feasible only if every excited direction has
    // positive curvature and the unconstrained step fits in the ball.
    bool interior_defined = true;
    for (std::size_t i = 0; i < n; ++i)
        if (c[i] != 0.0 && lam[i] <= 0.0) {
            interior_defined = false;
            break;
        }

    double mu = 0.0;
    bool active = false;
    if (!(interior_defined && theta_norm_sq(0.0) <= cap)) {
        active = true;
        // Bracket: mu_hi doubled from lambda_1 until the step fits.
        double lo = 0.0;
        double hi = std::max(lam.empty() ? 1.0 : lam[0], 1e-30);
        int doublings = 0;
        while (theta_norm_sq(hi) > cap) {
            hi *= 2.0;
            if (++doublings > 400)
                throw numerical_failure_error(
                    "qp_step: bisection bracket failed (mu_hi = " + std::to_string(hi) +
                    ", ||theta||^2 = " + std::to_string(theta_norm_sq(hi)) + ")");
        }
        for (int it = 0; it < 300 && (hi - lo) > 1e-16 * std::max(hi, 1.0); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (theta_norm_sq(mid) > cap)
                lo = mid;
            else
                hi = mid;
        }
        mu = hi; // feasible side: ||theta||^2 <= cap
    }

    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = half_beta * v[i];

    auto assemble_theta = [&](double m) {
        std::vector<double> theta(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (c[i] == 0.0) continue;
            axpy(half_beta * c[i] / (lam[i] + m), eig->eigenvectors[i], theta);
        }
        return theta;
    };
    auto kkt_residual = [&](const std::vector<double>& theta, double m) {
        std::vector<double> r = g.multiply(theta);
        for (std::size_t i = 0; i < n; ++i) r[i] += m * theta[i] - rhs[i];
        return norm2(r);
    };

    const double tol = 1e-8 * half_beta;
    std::vector<double> theta = assemble_theta(mu);
    double res = kkt_residual(theta, mu);

    if (res > tol) {
        // Eigen-reconstruction error dominates when beta is tiny relative to
        // the metric scale; fall back to a verified direct solve, bumping mu
        // upward if the solution drifts past the cap (||theta(mu)|| is
        // strictly decreasing in mu).
        for (int tries = 0; tries < 12; ++tries) {
            theta = solve_shifted(g, mu, rhs);
            const double nsq = dot(theta, theta);
            if (nsq <= cap + 1e-12) break;
            mu *= 1.0 + std::max(2.0 * (nsq - cap) / cap, 1e-15);
        }
        res = kkt_residual(theta, mu);
        if (res > tol)
            throw numerical_failure_error("qp_step: KKT residual " + std::to_string(res) +
                                          " above tolerance " + std::to_string(tol));
    }

    const double nsq = dot(theta, theta);
    if (nsq > cap + 1e-12)
        throw numerical_failure_error("qp_step: step norm^2 " + std::to_string(nsq) +
                                      " exceeds cap " + std::to_string(cap));
    // Complementary slackness, normalized by the natural mu*cap scale so the
    // check stays meaningful for extreme beta.
    const double slack = mu * (nsq - cap);
    if (active && std::fabs(slack) > 1e-8 * std::max(1.0, mu * cap))
        throw numerical_failure_error("qp_step: complementary slackness violated: " +
                                      std::to_string(slack));

    return {std::move(theta), mu, res, active};
}

std::vector<double> qp_step(const NetworkSpec& spec, const FlatWeights& w, const Batch& batch,
                            const std::vector<double>& v_w, const RecoveryConfig& cfg)
{
    cfg.validate();
    const MetricTensor mt = assemble_metric(spec, w, batch);
    const double beta = cfg.beta > 0.0 ? cfg.beta : 1.0;
    return qp_step_dense(mt.g, v_w, beta, cfg.step_norm_sq_cap).theta;
}

namespace {

double max_abs_damaged(const FlatWeights& w, const DamagePlan& plan)
{
    double m = 0.0;
    for (std::size_t idx : plan.indices) m = std::max(m, std::fabs(w[idx]));
    return m;
}

double dist_sq_damaged(const FlatWeights& w, const DamagePlan& plan)
{
    double s = 0.0;
    for (std::size_t idx : plan.indices) s += w[idx] * w[idx];
    return s;
}

struct SingleRunOutcome {
    std::vector<FlatWeights> points;
    int steps_used = 0;
    bool converged = false;
};

SingleRunOutcome run_recovery_loop(const NetworkSpec& spec, const FlatWeights& w_t,
                                   const DamagePlan& plan, const Dataset& d,
                                   const RecoveryConfig& cfg, double beta)
{
    SingleRunOutcome out;
    out.points.push_back(w_t);

    FlatWeights w = w_t;
    for (int step = 0; step < cfg.max_steps; ++step) {
        const double maxabs = max_abs_damaged(w, plan);
        if (maxabs <= cfg.hyperplane_tol) {
            out.converged = true;
            return out;
        }

        const Batch batch = round_robin_batch(d, cfg.metric_batch, step);
        const MetricTensor mt = assemble_metric(spec, w, batch);
        const EigenDecomposition eig = sym_eigen(mt.g);
        const auto vopt = hyperplane_direction(w, plan, cfg.hyperplane_tol);
        if (!vopt) {
            out.converged = true;
            return out;
        }
        const std::vector<double>& v = *vopt;

        // Never step past the hyperplane: shrink the trust region to the
        // remaining distance.
        const double cap_eff = std::min(cfg.step_norm_sq_cap, dist_sq_damaged(w, plan));

        // Monotone approach: if a step would grow the damaged coordinates,
        // double beta (more pull toward the hyperplane) and resolve.
        double beta_step = beta;
        std::vector<double> theta;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            QpSolution sol = qp_step_dense(mt.g, v, beta_step, cap_eff, &eig);
            FlatWeights cand = w;
            for (std::size_t i = 0; i < w.size(); ++i) cand[i] += sol.theta[i];
            if (max_abs_damaged(cand, plan) <= maxabs + 1e-15) {
                theta = std::move(sol.theta);
                accepted = true;
                break;
            }
            beta_step *= 2.0;
        }
        if (!accepted) {
            // beta -> infinity limit: pure descent to the hyperplane.
            const double s = std::sqrt(cap_eff);
            theta.assign(w.size(), 0.0);
            for (std::size_t i = 0; i < w.size(); ++i) theta[i] = s * v[i];
        }

        for (std::size_t i = 0; i < w.size(); ++i) w[i] += theta[i];
        out.points.push_back(w);
        out.steps_used = step + 1;
    }
    out.converged = max_abs_damaged(w, plan) <= cfg.hyperplane_tol;
    return out;
}

RecoveryResult finish_result(const NetworkSpec& spec, const DamagePlan& plan, const Dataset& d,
                             const RecoveryConfig& cfg, SingleRunOutcome&& run, double beta)
{
    // Exact final projection onto the hyperplane; the loop guarantees the
    // snap distance is within tolerance.
    if (run.converged && !plan.empty()) {
        FlatWeights& last = run.points.back();
        for (std::size_t idx : plan.indices) last[idx] = 0.0;
    }

    const Batch energy_batch = round_robin_batch(d, cfg.metric_batch, 0);
    RecoveryResult res;
    res.trace = trace_path(spec, energy_batch, d, run.points, PathKind::geodesic, cfg.loss);
    res.total_energy =
        run.points.size() > 1 ? path_energy(spec, energy_batch, run.points) : 0.0;
    res.steps_used = run.steps_used;
    res.beta_used = beta;

    const double work_per_step =
        static_cast<double>(std::min<std::size_t>(cfg.metric_batch, d.size())) /
        static_cast<double>(d.size());
    for (std::size_t i = 0; i < res.trace.samples.size(); ++i)
        res.trace.samples[i].work_epochs = static_cast<double>(i) * work_per_step;
    return res;
}

} // namespace

RecoveryResult recover(const NetworkSpec& spec, const FlatWeights& w_t, const DamagePlan& plan,
                       const Dataset& d, const RecoveryConfig& cfg)
{
    cfg.validate();
    d.validate();
    for (std::size_t idx : plan.indices)
        if (idx >= w_t.size()) throw invalid_input_error("recover: plan index out of range");

    // Nothing to do: single-sample trace at w_t.
    if (plan.empty() || max_abs_damaged(w_t, plan) <= cfg.hyperplane_tol) {
        SingleRunOutcome run;
        run.points.push_back(w_t);
        run.converged = true;
        RecoveryResult res = finish_result(spec, plan, d, cfg, std::move(run),
                                           cfg.beta > 0.0 ? cfg.beta : 0.0);
        return res;
    }

    std::vector<double> betas;
    if (!cfg.beta_sweep.empty()) {
        betas = cfg.beta_sweep;
    } else if (cfg.beta > 0.0) {
        betas = {cfg.beta};
    } else {
        // Default sweep scaled to the metric magnitude at the start point:
        // {0.1, 1, 10} * 2 sqrt(cap) lambda_1.
        const Batch batch0 = round_robin_batch(d, cfg.metric_batch, 0);
        const MetricTensor mt0 = assemble_metric(spec, w_t, batch0);
        const EigenDecomposition eig0 = sym_eigen(mt0.g);
        const double lambda1 = std::max(eig0.eigenvalues.front(), 1e-12);
        const double base = 2.0 * std::sqrt(cfg.step_norm_sq_cap) * lambda1;
        betas = {0.1 * base, base, 10.0 * base};
    }

    RecoveryResult best;
    bool have_best = false;
    std::vector<double> swept_betas;
    std::vector<double> swept_energies;
    std::string failures;

    for (double beta : betas) {
        SingleRunOutcome run = run_recovery_loop(spec, w_t, plan, d, cfg, beta);
        if (!run.converged) {
            failures += (failures.empty() ? "" : "; ") + std::string("beta=") +
                        std::to_string(beta) + " hit max_steps";
            if (betas.size() == 1) {
                RecoveryResult partial =
                    finish_result(spec, plan, d, cfg, std::move(run), beta);
                throw recovery_non_convergence_error(
                    "recover: max_steps = " + std::to_string(cfg.max_steps) +
                        " exhausted before hyperplane_tol (" + failures + ")",
                    std::move(partial));
            }
            continue;
        }
        RecoveryResult res = finish_result(spec, plan, d, cfg, std::move(run), beta);
        swept_betas.push_back(beta);
        swept_energies.push_back(res.total_energy);
        if (!have_best || res.total_energy < best.total_energy) {
            best = std::move(res);
            have_best = true;
        }
    }

    if (!have_best)
        throw recovery_non_convergence_error("recover: no beta in the sweep converged (" +
                                                 failures + ")",
                                             RecoveryResult{});
    if (swept_betas.size() > 1) {
        best.swept_betas = std::move(swept_betas);
        best.swept_energies = std::move(swept_energies);
    }
    return best;
}

RecoveryResult reconfigure(const NetworkSpec& spec, const FlatWeights& w_current,
                           const DamagePlan& old_plan, const DamagePlan& new_plan,
                           const Dataset& d, const RecoveryConfig& cfg)
{
    cfg.validate();
    const double off = max_abs_damaged(w_current, old_plan);
    if (off > cfg.hyperplane_tol)
        throw invalid_input_error(
            "reconfigure: current weights are not on the old plan's hyperplane (max |w_i| = " +
            std::to_string(off) + ")");
    // Freed coordinates (in old_plan but not new_plan) are already zero and
    // simply become unconstrained QP participants.
    return recover(spec, w_current, new_plan, d, cfg);
}

RecoveryComparison compare_recovery(const NetworkSpec& spec, const FlatWeights& w_t,
                                    const DamagePlan& plan,
                                    const std::vector<DamagePlan>& node_order, const Dataset& d,
                                    const RecoveryConfig& cfg, int ft_epochs_per_step,
                                    const TrainConfig& ft_cfg)
{
    RecoveryComparison cmp;

    RecoveryResult geo = recover(spec, w_t, plan, d, cfg);
    cmp.geodesic_trace = std::move(geo.trace);
    cmp.geodesic.final_accuracy = cmp.geodesic_trace.final_accuracy();
    cmp.geodesic.mean_accuracy = cmp.geodesic_trace.mean_accuracy();
    cmp.geodesic.work_epochs = cmp.geodesic_trace.samples.back().work_epochs;

    const Batch metric_batch = round_robin_batch(d, cfg.metric_batch, 0);
    cmp.fine_tune_trace = fine_tune_recovery(spec, w_t, plan, node_order, d,
                                             ft_epochs_per_step, ft_cfg, metric_batch);
    cmp.fine_tune.final_accuracy = cmp.fine_tune_trace.final_accuracy();
    cmp.fine_tune.mean_accuracy = cmp.fine_tune_trace.mean_accuracy();
    cmp.fine_tune.work_epochs = cmp.fine_tune_trace.samples.back().work_epochs;
    return cmp;
}

} // namespace geoward
