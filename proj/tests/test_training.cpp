#include "geoward/training.hpp"

#include "geoward/damage.hpp"
#include "geoward/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace geoward;
using namespace geoward::testing;

namespace {

NetworkSpec desk_spec()
{
    return {{2, 16, 3}, Activation::tanh_act, OutputMode::softmax};
}

TrainConfig quick_cfg(int epochs = 60, double lr = 0.1, std::uint64_t seed = 7)
{
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("training on separable data reaches high accuracy")
{
    const Dataset d = desk_dataset(7);
    const TrainResult res = train(desk_spec(), d, quick_cfg(200));
    CHECK(res.log.size() == 200);
    CHECK(res.log.back().accuracy >= 0.95);
}

TEST_CASE("zero learning rate leaves weights unchanged")
{
    const Dataset d = desk_dataset(8, 20);
    const NetworkSpec spec = desk_spec();
    TrainConfig cfg = quick_cfg(3, 0.0);
    const FlatWeights start = init_weights(spec, cfg.seed);
    const TrainResult res = train(spec, d, cfg);
    CHECK(res.weights.values() == start.values());
}

TEST_CASE("same seed trains to identical weights")
{
    const Dataset d = desk_dataset(9, 20);
    const TrainResult a = train(desk_spec(), d, quick_cfg(10));
    const TrainResult b = train(desk_spec(), d, quick_cfg(10));
    CHECK(a.weights.values() == b.weights.values());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].loss == b.log[e].loss);
        CHECK(a.log[e].accuracy == b.log[e].accuracy);
    }
}

TEST_CASE("evaluate is a pure function")
{
    const Dataset d = desk_dataset(10, 20);
    const NetworkSpec spec = desk_spec();
    const FlatWeights w = init_weights(spec, 3);
    const EvalResult a = evaluate(spec, w, d);
    const EvalResult b = evaluate(spec, w, d);
    CHECK(a.loss == b.loss);
    CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("uniform-output network scores 1/m on a balanced set under the tie rule")
{
    const Dataset d = desk_dataset(11, 30); // balanced, 3 classes
    NetworkSpec spec = desk_spec();
    const FlatWeights w(spec); // all-zero weights: identical logits
    const EvalResult r = evaluate(spec, w, d);
    CHECK(r.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("evaluate accuracy matches a hand count")
{
    const Dataset full = desk_dataset(12, 20);
    const Dataset d = subsample(full, 10, 1);
    const NetworkSpec spec = desk_spec();
    const FlatWeights w = init_weights(spec, 5);

    int correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto out = forward(spec, w, d.input_vector(i));
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (out[k] > out[best]) best = k;
        if (best == d.labels[i]) ++correct;
    }
    const EvalResult r = evaluate(spec, w, d);
    CHECK(r.accuracy == doctest::Approx(correct / 10.0).epsilon(1e-15));
}

TEST_CASE("training divergence raises a numerical failure with epoch index")
{
    const Dataset d = desk_dataset(13, 20);
    // Unbounded identity outputs with mse and an absurd learning rate blow
    // up super-exponentially.
    NetworkSpec spec{{2, 8, 3}, Activation::tanh_act, OutputMode::identity};
    TrainConfig cfg = quick_cfg(50, 1e8);
    cfg.loss = LossKind::mse;
    try {
        train(spec, d, cfg);
        FAIL("expected numerical_failure_error");
    } catch (const numerical_failure_error& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("mse training works with identity outputs")
{
    const Dataset d = desk_dataset(14, 30);
    NetworkSpec spec{{2, 12, 3}, Activation::tanh_act, OutputMode::identity};
    TrainConfig cfg = quick_cfg(150, 0.05);
    cfg.loss = LossKind::mse;
    const TrainResult res = train(spec, d, cfg);
    CHECK(res.log.back().accuracy >= 0.9);
}

TEST_CASE("cross entropy training requires softmax")
{
    const Dataset d = desk_dataset(15, 10);
    NetworkSpec spec{{2, 4, 3}, Activation::tanh_act, OutputMode::identity};
    CHECK_THROWS_AS(train(spec, d, quick_cfg(1)), invalid_input_error);
}

namespace {

struct FineTuneFixture {
    NetworkSpec spec = desk_spec();
    // Moderate separation so node deletion actually hurts.
    Dataset d = desk_dataset(16, 60, 3.0);
    FlatWeights trained;
    std::vector<DamagePlan> node_order;
    DamagePlan plan;
    Batch metric_batch;

    FineTuneFixture() : trained(spec), metric_batch(d, {0, 1, 2, 3})
    {
        trained = train(spec, d, quick_cfg(200)).weights;
        // Delete 12 of the 16 hidden nodes, one at a time.
        for (int node = 0; node < 12; ++node)
            node_order.push_back(node_deletion_plan(spec, 1, {node}));
        plan = node_order[0];
        for (std::size_t i = 1; i < node_order.size(); ++i)
            plan = merge_plans(plan, node_order[i]);
        metric_batch = round_robin_batch(d, 32, 0);
    }
};

} // namespace

TEST_CASE("fine-tune recovery")
{
    FineTuneFixture fx;
    TrainConfig ft_cfg = quick_cfg(1, 0.1, 21);

    SUBCASE("zero retraining equals the stepwise deletion trace")
    {
        const PathTrace ft = fine_tune_recovery(fx.spec, fx.trained, fx.plan, fx.node_order,
                                                fx.d, 0, ft_cfg, fx.metric_batch);
        const auto points = stepwise_deletion_path(fx.trained, fx.node_order);
        const PathTrace naive =
            trace_path(fx.spec, fx.metric_batch, fx.d, points, PathKind::stepwise_deletion);
        REQUIRE(ft.samples.size() == naive.samples.size());
        for (std::size_t i = 0; i < ft.samples.size(); ++i) {
            CHECK(ft.samples[i].w.values() == naive.samples[i].w.values());
            CHECK(ft.samples[i].accuracy == naive.samples[i].accuracy);
        }
    }

    SUBCASE("damaged coordinates stay exactly zero through retraining")
    {
        const PathTrace ft = fine_tune_recovery(fx.spec, fx.trained, fx.plan, fx.node_order,
                                                fx.d, 2, ft_cfg, fx.metric_batch);
        const auto& last = ft.samples.back().w;
        for (std::size_t idx : fx.plan.indices) CHECK(last[idx] == 0.0);
        // Intermediate steps freeze only the already-pruned groups.
        for (std::size_t idx : fx.node_order[0].indices)
            CHECK(ft.samples[1].w[idx] == 0.0);
    }

    SUBCASE("retraining beats no retraining on mean path accuracy")
    {
        const PathTrace none = fine_tune_recovery(fx.spec, fx.trained, fx.plan, fx.node_order,
                                                  fx.d, 0, ft_cfg, fx.metric_batch);
        const PathTrace two = fine_tune_recovery(fx.spec, fx.trained, fx.plan, fx.node_order,
                                                 fx.d, 2, ft_cfg, fx.metric_batch);
        CHECK(two.mean_accuracy() > none.mean_accuracy());
    }

    SUBCASE("work epochs accumulate per step")
    {
        const PathTrace ft = fine_tune_recovery(fx.spec, fx.trained, fx.plan, fx.node_order,
                                                fx.d, 3, ft_cfg, fx.metric_batch);
        CHECK(ft.samples.front().work_epochs == 0.0);
        CHECK(ft.samples.back().work_epochs ==
              doctest::Approx(3.0 * static_cast<double>(fx.node_order.size())));
    }

    SUBCASE("node order must partition the plan")
    {
        auto partial = fx.node_order;
        partial.pop_back();
        CHECK_THROWS_AS(fine_tune_recovery(fx.spec, fx.trained, fx.plan, partial, fx.d, 1,
                                           ft_cfg, fx.metric_batch),
                        invalid_input_error);
    }
}

TEST_CASE("pruning the whole hidden layer collapses to chance")
{
    FineTuneFixture fx;
    std::vector<DamagePlan> all_nodes;
    for (int node = 0; node < 16; ++node)
        all_nodes.push_back(node_deletion_plan(fx.spec, 1, {node}));
    DamagePlan full = all_nodes[0];
    for (std::size_t i = 1; i < all_nodes.size(); ++i) full = merge_plans(full, all_nodes[i]);

    TrainConfig ft_cfg = quick_cfg(1, 0.1, 22);
    const PathTrace ft = fine_tune_recovery(fx.spec, fx.trained, full, all_nodes, fx.d, 0,
                                            ft_cfg, fx.metric_batch);
    // Severed network: identical logits for every input, tie rule gives 1/3
    // on the balanced set.
    CHECK(ft.samples.back().accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}
