#include "geoward/paths.hpp"

#include "geoward/damage.hpp"
#include "geoward/errors.hpp"
#include "geoward/metric.hpp"
#include "geoward/training.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace geoward;
using namespace geoward::testing;

namespace {

struct PathFixture {
    NetworkSpec spec{{2, 8, 3}, Activation::tanh_act, OutputMode::softmax};
    Dataset d = desk_dataset(61, 40, 4.0);
    FlatWeights trained;
    DamagePlan plan;
    Batch batch;

    PathFixture() : trained(spec), batch(d, {0})
    {
        TrainConfig cfg;
        cfg.epochs = 150;
        cfg.learning_rate = 0.1;
        cfg.seed = 61;
        trained = train(spec, d, cfg).weights;
        plan = node_deletion_plan(spec, 1, {0, 1, 2});
        batch = round_robin_batch(d, 24, 0);
    }
};

} // namespace

TEST_CASE("naive linear path endpoints and midpoint")
{
    PathFixture fx;
    const auto path = naive_linear_path(fx.trained, fx.plan, 5);
    REQUIRE(path.size() == 5);
    CHECK(path.front().values() == fx.trained.values());
    CHECK(path.back().values() == apply_mask(fx.trained, fx.plan).values());
    // Midpoint: damaged coordinates at w/2, undamaged untouched.
    for (std::size_t idx : fx.plan.indices)
        CHECK(path[2][idx] == doctest::Approx(fx.trained[idx] * 0.5).epsilon(1e-15));
    std::size_t probe = 0;
    while (std::count(fx.plan.indices.begin(), fx.plan.indices.end(), probe)) ++probe;
    CHECK(path[2][probe] == fx.trained[probe]);

    CHECK_THROWS_AS(naive_linear_path(fx.trained, fx.plan, 1), invalid_input_error);
}

TEST_CASE("path energy of a constant path is zero")
{
    PathFixture fx;
    const std::vector<FlatWeights> constant{fx.trained, fx.trained, fx.trained};
    CHECK(path_energy(fx.spec, fx.batch, constant) == 0.0);
}

TEST_CASE("path energy on a purely affine net equals the closed form")
{
    // No hidden layer and identity outputs: J depends only on x, so the
    // metric is constant along any path.
    Rng rng(62);
    NetworkSpec spec{{3, 2}, Activation::tanh_act, OutputMode::identity};
    const FlatWeights w0 = random_weights(spec, rng);
    const Dataset d = synth_gaussians(2, 3, 10, 2.0, 63);
    const Batch batch(d);

    FlatWeights w1 = w0;
    std::vector<double> dw(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
        dw[i] = rng.normal();
        w1[i] += dw[i];
    }

    const MetricTensor mt = assemble_metric(spec, w0, batch);
    const double closed = quadratic_form(mt, dw);

    for (int steps : {2, 5, 9}) {
        std::vector<FlatWeights> path;
        for (int s = 0; s < steps; ++s) {
            const double t = static_cast<double>(s) / (steps - 1);
            FlatWeights w = w0;
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += t * dw[i];
            path.push_back(std::move(w));
        }
        CHECK(path_energy(spec, batch, path) == doctest::Approx(closed).epsilon(1e-10));
    }
}

TEST_CASE("path energy refinement self-consistency on tanh nets")
{
    PathFixture fx;
    const auto coarse = naive_linear_path(fx.trained, fx.plan, 21);
    const auto fine = naive_linear_path(fx.trained, fx.plan, 41);
    const double e1 = path_energy(fx.spec, fx.batch, coarse);
    const double e2 = path_energy(fx.spec, fx.batch, fine);
    CHECK(std::fabs(e1 - e2) <= 0.01 * std::max(e1, e2));
}

TEST_CASE("length variant is exactly additive over concatenation")
{
    PathFixture fx;
    const auto path = naive_linear_path(fx.trained, fx.plan, 9);
    const std::vector<FlatWeights> h1(path.begin(), path.begin() + 5);
    const std::vector<FlatWeights> h2(path.begin() + 4, path.end());

    const double full = path_energy(fx.spec, fx.batch, path, true);
    const double parts =
        path_energy(fx.spec, fx.batch, h1, true) + path_energy(fx.spec, fx.batch, h2, true);
    CHECK(full == doctest::Approx(parts).epsilon(1e-12));

    // Energy is parametrization-dependent: each standalone half covers its
    // segments at half the velocity of the full traversal, so the halves sum
    // to half the full energy.
    const double efull = path_energy(fx.spec, fx.batch, path);
    const double eparts =
        path_energy(fx.spec, fx.batch, h1) + path_energy(fx.spec, fx.batch, h2);
    CHECK(eparts == doctest::Approx(0.5 * efull).epsilon(1e-9));
    CHECK(efull >= 0.0);
}

TEST_CASE("breakdown speed equals the dense quadratic form")
{
    PathFixture fx;
    const std::vector<double> zero(fx.trained.size(), 0.0);
    CHECK(breakdown_speed(fx.spec, fx.batch, fx.trained, zero) == 0.0);

    // Velocity of the naive path at t=0: -w on damaged coordinates.
    std::vector<double> vel(fx.trained.size(), 0.0);
    for (std::size_t idx : fx.plan.indices) vel[idx] = -fx.trained[idx];

    const MetricTensor mt = assemble_metric(fx.spec, fx.trained, fx.batch);
    const double dense = quadratic_form(mt, vel);
    const double s = breakdown_speed(fx.spec, fx.batch, fx.trained, vel);
    CHECK(std::fabs(s - dense) <= 1e-10 * std::max(1.0, dense));

    std::vector<double> vel2 = vel;
    for (auto& v : vel2) v *= 2.0;
    CHECK(breakdown_speed(fx.spec, fx.batch, fx.trained, vel2) ==
          doctest::Approx(4.0 * s).epsilon(1e-12));
}

TEST_CASE("breakdown acceleration vanishes on affine nets")
{
    Rng rng(64);
    NetworkSpec spec{{3, 2}, Activation::tanh_act, OutputMode::identity};
    const FlatWeights w = random_weights(spec, rng);
    const Dataset d = synth_gaussians(2, 3, 10, 2.0, 65);
    const Batch batch(d);
    const std::vector<double> vel = rng.normal_vector(w.size());
    CHECK(std::fabs(breakdown_acceleration(spec, batch, w, vel)) <= 1e-8);
}

TEST_CASE("breakdown acceleration converges at second order in h")
{
    PathFixture fx;
    std::vector<double> vel(fx.trained.size(), 0.0);
    for (std::size_t idx : fx.plan.indices) vel[idx] = -fx.trained[idx];

    const double a3 = breakdown_acceleration(fx.spec, fx.batch, fx.trained, vel, 1e-3);
    const double a4 = breakdown_acceleration(fx.spec, fx.batch, fx.trained, vel, 1e-4);
    const double a5 = breakdown_acceleration(fx.spec, fx.batch, fx.trained, vel, 1e-5);

    const double d1 = std::fabs(a3 - a4);
    const double d2 = std::fabs(a4 - a5);
    const double floor = 1e-9 * std::max(std::fabs(a5), 1.0);
    CHECK(d2 <= 0.1 * d1 + floor);
}

TEST_CASE("trace of a constant path")
{
    PathFixture fx;
    const std::vector<FlatWeights> constant{fx.trained, fx.trained, fx.trained};
    const PathTrace trace =
        trace_path(fx.spec, fx.batch, fx.d, constant, PathKind::naive_linear);
    REQUIRE(trace.samples.size() == 3);
    for (const auto& s : trace.samples) {
        CHECK(s.accuracy == trace.samples[0].accuracy);
        CHECK(s.speed == 0.0);
    }
    CHECK(trace.samples.front().t == 0.0);
    CHECK(trace.samples.back().t == 1.0);
}

TEST_CASE("trace endpoint accuracy equals the masked network's")
{
    PathFixture fx;
    const auto path = naive_linear_path(fx.trained, fx.plan, 11);
    const PathTrace trace = trace_path(fx.spec, fx.batch, fx.d, path, PathKind::naive_linear);

    const FlatWeights masked = apply_mask(fx.trained, fx.plan);
    const EvalResult er = evaluate(fx.spec, masked, fx.d);
    CHECK(trace.samples.back().accuracy == er.accuracy);
    CHECK(trace.samples.back().loss == er.loss);

    // Strictly increasing t with non-negative speeds.
    for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i) {
        CHECK(trace.samples[i].t < trace.samples[i + 1].t);
        CHECK(trace.samples[i].speed >= -1e-12);
    }
}

TEST_CASE("stepwise deletion path masks groups cumulatively")
{
    PathFixture fx;
    std::vector<DamagePlan> groups;
    for (int node : {0, 1, 2}) groups.push_back(node_deletion_plan(fx.spec, 1, {node}));
    const auto path = stepwise_deletion_path(fx.trained, groups);
    REQUIRE(path.size() == 4);
    CHECK(path[0].values() == fx.trained.values());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t idx : groups[g].indices) CHECK(path[g + 1][idx] == 0.0);
    // Earlier groups stay masked.
    for (std::size_t idx : groups[0].indices) CHECK(path[3][idx] == 0.0);
}
