#include "geoward/geodesic.hpp"

#include "geoward/errors.hpp"
#include "geoward/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace geoward;
using namespace geoward::testing;

namespace {

double qp_objective(const SymMatrix& g, const std::vector<double>& theta,
                    const std::vector<double>& v, double beta)
{
    const auto gtheta = g.multiply(theta);
    return dot(theta, gtheta) - beta * dot(theta, v);
}

// Independent QP oracle: projected gradient descent on the ball constraint.
// Shares no code with qp_step_dense.
std::vector<double> projected_gradient_qp(const SymMatrix& g, const std::vector<double>& v,
                                          double beta, double cap, int iters = 200000)
{
    const std::size_t n = g.dim();
    std::vector<double> theta(n, 0.0);
    // Step size below 1/L with L = 2*lambda_max; bound lambda_max by trace.
    const double lr = 0.45 / std::max(g.trace(), 1e-12);
    const double radius = std::sqrt(cap);
    for (int it = 0; it < iters; ++it) {
        const auto gtheta = g.multiply(theta);
        for (std::size_t i = 0; i < n; ++i)
            theta[i] -= lr * (2.0 * gtheta[i] - beta * v[i]);
        const double nrm = norm2(theta);
        if (nrm > radius)
            for (auto& x : theta) x *= radius / nrm;
    }
    return theta;
}

} // namespace

TEST_CASE("hyperplane direction closed forms")
{
    NetworkSpec spec{{2, 3, 2}, Activation::tanh_act, OutputMode::softmax};
    FlatWeights w(spec);

    SUBCASE("single damaged coordinate")
    {
        w[4] = 3.0;
        const DamagePlan plan = DamagePlan::from_indices({4}, "one");
        const auto v = hyperplane_direction(w, plan);
        REQUIRE(v.has_value());
        CHECK((*v)[4] == doctest::Approx(-1.0).epsilon(1e-15));
        for (std::size_t i = 0; i < w.size(); ++i)
            if (i != 4) CHECK((*v)[i] == 0.0);
    }
    SUBCASE("masked network signals convergence")
    {
        const DamagePlan plan = DamagePlan::from_indices({4, 7}, "two");
        CHECK_FALSE(hyperplane_direction(w, plan).has_value());
    }
    SUBCASE("two damaged coordinates normalize")
    {
        w[1] = 3.0;
        w[6] = 4.0;
        const DamagePlan plan = DamagePlan::from_indices({1, 6}, "two");
        const auto v = hyperplane_direction(w, plan);
        REQUIRE(v.has_value());
        CHECK((*v)[1] == doctest::Approx(-0.6).epsilon(1e-15));
        CHECK((*v)[6] == doctest::Approx(-0.8).epsilon(1e-15));
    }
}

TEST_CASE("qp_step identity-metric closed form")
{
    SymMatrix g(3);
    for (std::size_t i = 0; i < 3; ++i) g.set(i, i, 1.0);
    std::vector<double> v{1.0, 0.0, 0.0};

    // Unconstrained theta = e1 (norm 1 > 0.1) so the cap binds at 0.1 e1.
    const QpSolution sol = qp_step_dense(g, v, 2.0, 0.01);
    CHECK(sol.constraint_active);
    CHECK(sol.theta[0] == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(std::fabs(sol.theta[1]) <= 1e-12);
    CHECK(std::fabs(sol.theta[2]) <= 1e-12);
    CHECK(sol.mu >= 0.0);
}

TEST_CASE("qp_step diagonal-metric interior closed form")
{
    SymMatrix g(3);
    g.set(0, 0, 2.0);
    g.set(1, 1, 5.0);
    g.set(2, 2, 10.0);
    std::vector<double> v{0.6, 0.0, 0.8};

    // Small beta keeps the unconstrained solution inside the ball:
    // theta_i = (beta/2) v_i / lambda_i.
    const double beta = 0.1;
    const QpSolution sol = qp_step_dense(g, v, beta, 0.01);
    CHECK_FALSE(sol.constraint_active);
    CHECK(sol.mu == 0.0);
    CHECK(sol.theta[0] == doctest::Approx(0.05 * 0.6 / 2.0).epsilon(1e-10));
    CHECK(sol.theta[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.theta[2] == doctest::Approx(0.05 * 0.8 / 10.0).epsilon(1e-10));
}

TEST_CASE("qp_step matches a projected-gradient oracle on random PSD metrics")
{
    Rng rng(71);
    for (int trial = 0; trial < 3; ++trial) {
        const SymMatrix g = random_psd(20, rng);
        const auto v = random_unit_vector(20, rng);
        // Mix of binding and interior cases across trials.
        const double beta = (trial == 0) ? 0.05 : 2.0 + trial;
        const double cap = 0.01;

        const QpSolution sol = qp_step_dense(g, v, beta, cap);
        const auto oracle = projected_gradient_qp(g, v, beta, cap);

        const double got = qp_objective(g, sol.theta, v, beta);
        const double want = qp_objective(g, oracle, v, beta);
        CHECK(got <= want + 1e-4);
        CHECK(std::fabs(got - want) <= 1e-4);

        CHECK(dot(sol.theta, sol.theta) <= cap + 1e-12);
        CHECK(sol.kkt_residual <= 1e-8 * (beta / 2.0));
    }
}

TEST_CASE("qp_step large beta recovers pure descent toward the hyperplane")
{
    Rng rng(72);
    const SymMatrix g = random_psd(12, rng);
    const auto v = random_unit_vector(12, rng);
    const QpSolution sol = qp_step_dense(g, v, 1e9, 0.01);
    CHECK(sol.constraint_active);
    // theta -> sqrt(cap) * v in the beta -> infinity limit.
    const double cosine = dot(sol.theta, v) / norm2(sol.theta);
    CHECK(cosine == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(norm2(sol.theta) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("qp_step rejects bad inputs")
{
    SymMatrix g(2);
    g.set(0, 0, 1.0);
    g.set(1, 1, 1.0);
    CHECK_THROWS_AS(qp_step_dense(g, {1.0}, 1.0, 0.01), invalid_input_error);
    CHECK_THROWS_AS(qp_step_dense(g, {1.0, 0.0}, -1.0, 0.01), invalid_input_error);
    CHECK_THROWS_AS(qp_step_dense(g, {1.0, 0.0}, 1.0, 0.0), invalid_input_error);
}

namespace {

struct RecoveryFixture {
    NetworkSpec spec{{2, 16, 3}, Activation::tanh_act, OutputMode::softmax};
    Dataset d = desk_dataset(81, 60, 3.0);
    FlatWeights trained;
    DamagePlan plan;
    RecoveryConfig cfg;

    RecoveryFixture() : trained(spec)
    {
        TrainConfig tc;
        tc.epochs = 200;
        tc.learning_rate = 0.1;
        tc.seed = 81;
        trained = train(spec, d, tc).weights;
        // Delete 12 of 16 hidden nodes; severe enough that the naive
        // baselines visibly degrade.
        std::set<int> nodes;
        for (int nd = 0; nd < 12; ++nd) nodes.insert(nd);
        plan = node_deletion_plan(spec, 1, nodes);
        cfg.metric_batch = 32;
        cfg.max_steps = 400;
    }
};

} // namespace

TEST_CASE("recover with an empty plan returns a zero-step result")
{
    RecoveryFixture fx;
    const DamagePlan empty;
    const RecoveryResult res = recover(fx.spec, fx.trained, empty, fx.d, fx.cfg);
    CHECK(res.steps_used == 0);
    CHECK(res.total_energy == 0.0);
    REQUIRE(res.trace.samples.size() == 1);
    CHECK(res.trace.samples[0].w.values() == fx.trained.values());
}

TEST_CASE("recover reaches the hyperplane with a monotone approach")
{
    RecoveryFixture fx;
    fx.cfg.beta = 0.0; // default sweep
    const RecoveryResult res = recover(fx.spec, fx.trained, fx.plan, fx.d, fx.cfg);

    // Endpoint is exactly on the hyperplane.
    const auto& final_w = res.trace.samples.back().w;
    for (std::size_t idx : fx.plan.indices) CHECK(final_w[idx] == 0.0);

    // max |w_i| over damaged coordinates never increases along the trace.
    double prev = 1e300;
    for (const auto& s : res.trace.samples) {
        double maxabs = 0.0;
        for (std::size_t idx : fx.plan.indices)
            maxabs = std::max(maxabs, std::fabs(s.w[idx]));
        CHECK(maxabs <= prev + 1e-12);
        prev = maxabs;
    }

    // Sweep bookkeeping: the winner has minimum energy among converged betas.
    REQUIRE(res.swept_betas.size() >= 1);
    for (double e : res.swept_energies) CHECK(res.total_energy <= e + 1e-12);
    CHECK(res.steps_used >= 1);
    CHECK(res.trace.samples.front().t == 0.0);
    CHECK(res.trace.samples.back().t == 1.0);

    // Work accounting: steps * B / N epochs.
    const double expected_work =
        res.steps_used * 32.0 / static_cast<double>(fx.d.size());
    CHECK(res.trace.samples.back().work_epochs == doctest::Approx(expected_work));
}

TEST_CASE("recover raises non-convergence with a partial trace")
{
    RecoveryFixture fx;
    fx.cfg.beta = 1.0;
    fx.cfg.max_steps = 3; // the plan needs far more steps at this cap
    try {
        recover(fx.spec, fx.trained, fx.plan, fx.d, fx.cfg);
        FAIL("expected recovery_non_convergence_error");
    } catch (const recovery_non_convergence_error& e) {
        CHECK(e.partial_result.trace.samples.size() >= 1);
        CHECK(std::string(e.what()).find("max_steps") != std::string::npos);
    }
}

TEST_CASE("reconfigure between damage masks")
{
    RecoveryFixture fx;
    fx.cfg.beta = 0.0;
    const RecoveryResult first = recover(fx.spec, fx.trained, fx.plan, fx.d, fx.cfg);
    const FlatWeights& on_plane = first.trace.samples.back().w;

    SUBCASE("same plan is a zero-step reconfiguration")
    {
        const RecoveryResult res =
            reconfigure(fx.spec, on_plane, fx.plan, fx.plan, fx.d, fx.cfg);
        CHECK(res.steps_used == 0);
        CHECK(res.trace.samples.size() == 1);
    }
    SUBCASE("full restore converges immediately")
    {
        const DamagePlan none;
        const RecoveryResult res =
            reconfigure(fx.spec, on_plane, fx.plan, none, fx.d, fx.cfg);
        CHECK(res.steps_used == 0);
    }
    SUBCASE("moving to a different mask hits the new hyperplane")
    {
        const DamagePlan next = node_deletion_plan(fx.spec, 1, {12, 13, 14, 15});
        const RecoveryResult res =
            reconfigure(fx.spec, on_plane, fx.plan, next, fx.d, fx.cfg);
        for (std::size_t idx : next.indices)
            CHECK(res.trace.samples.back().w[idx] == 0.0);
    }
    SUBCASE("rejects a start point off the old hyperplane")
    {
        CHECK_THROWS_AS(reconfigure(fx.spec, fx.trained, fx.plan, fx.plan, fx.d, fx.cfg),
                        invalid_input_error);
    }
}

TEST_CASE("compare_recovery pairs geodesic and fine-tune reports")
{
    RecoveryFixture fx;
    fx.cfg.beta = 0.0;
    std::vector<DamagePlan> node_order;
    for (int node = 0; node < 12; ++node)
        node_order.push_back(node_deletion_plan(fx.spec, 1, {node}));

    TrainConfig ft_cfg;
    ft_cfg.learning_rate = 0.1;
    ft_cfg.seed = 82;

    const RecoveryComparison cmp =
        compare_recovery(fx.spec, fx.trained, fx.plan, node_order, fx.d, fx.cfg, 0, ft_cfg);

    CHECK(std::isfinite(cmp.geodesic.final_accuracy));
    CHECK(std::isfinite(cmp.fine_tune.final_accuracy));
    CHECK(cmp.fine_tune.work_epochs == 0.0);
    CHECK(cmp.geodesic.work_epochs > 0.0);
    // With zero retraining the baseline is stepwise deletion; the geodesic
    // compensation must dominate its mean accuracy.
    CHECK(cmp.geodesic.mean_accuracy > cmp.fine_tune.mean_accuracy);
}
