#include "geoward/training.hpp"

#include "geoward/errors.hpp"
#include "geoward/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace geoward {

void TrainConfig::validate() const
{
    if (epochs < 1) throw invalid_input_error("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw invalid_input_error("TrainConfig: batch_size must be >= 1");
    if (learning_rate < 0.0) throw invalid_input_error("TrainConfig: learning_rate must be >= 0");
}

namespace {

void check_dims(const NetworkSpec& spec, const Dataset& d)
{
    if (spec.input_dim() != d.dim)
        throw invalid_input_error("network input dim " + std::to_string(spec.input_dim()) +
                                  " != dataset dim " + std::to_string(d.dim));
    if (spec.output_dim() < d.num_classes)
        throw invalid_input_error("network output dim " + std::to_string(spec.output_dim()) +
                                  " < dataset classes " + std::to_string(d.num_classes));
}

// Loss gradient seed for one example, accumulated into grad.
void accumulate_example_gradient(const NetworkSpec& spec, const FlatWeights& w,
                                 const double* x, int label, LossKind loss,
                                 std::vector<double>& grad)
{
    const std::vector<double> xv(x, x + spec.input_dim());
    const ForwardCache cache = forward_cached(spec, w, xv);
    const int m = spec.output_dim();

    std::vector<double> g;
    if (loss == LossKind::cross_entropy) {
        if (spec.output_mode != OutputMode::softmax)
            throw invalid_input_error("cross_entropy training requires softmax outputs");
        // softmax + CE collapses to (p - onehot) on the logits
        std::vector<double> dlogits = cache.output;
        dlogits[label] -= 1.0;
        g = backprop_logits(spec, w, cache, dlogits);
    } else {
        std::vector<double> dout(m);
        for (int k = 0; k < m; ++k) {
            const double target = (k == label) ? 1.0 : 0.0;
            dout[k] = 2.0 * (cache.output[k] - target);
        }
        g = backprop_output(spec, w, cache, dout);
    }
    axpy(1.0, g, grad);
}

} // namespace

void sgd_epochs(const NetworkSpec& spec, FlatWeights& w, const Dataset& d,
                const TrainConfig& cfg, int epochs, const std::vector<std::size_t>& frozen,
                Rng& rng)
{
    std::vector<char> is_frozen(w.size(), 0);
    for (std::size_t idx : frozen) {
        if (idx >= w.size()) throw invalid_input_error("sgd_epochs: frozen index out of range");
        is_frozen[idx] = 1;
    }

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(w.size());

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k)
                accumulate_example_gradient(spec, w, d.input(order[k]), d.labels[order[k]],
                                            cfg.loss, grad);
            const double scale = cfg.learning_rate / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < w.size(); ++i)
                if (!is_frozen[i]) w[i] -= scale * grad[i];
        }
    }
}

TrainResult train_from(const NetworkSpec& spec, const FlatWeights& start, const Dataset& d,
                       const TrainConfig& cfg)
{
    spec.validate();
    cfg.validate();
    d.validate();
    check_dims(spec, d);

    TrainResult res;
    res.weights = start;
    res.log.reserve(cfg.epochs);
    Rng rng(cfg.seed);

    for (int e = 0; e < cfg.epochs; ++e) {
        try {
            sgd_epochs(spec, res.weights, d, cfg, 1, {}, rng);
            const EvalResult er = evaluate(spec, res.weights, d, cfg.loss);
            if (!std::isfinite(er.loss))
                throw numerical_failure_error("loss non-finite");
            res.log.push_back({e, er.loss, er.accuracy});
        } catch (const numerical_failure_error& ex) {
            throw numerical_failure_error("train: diverged at epoch " + std::to_string(e) +
                                          ": " + ex.what());
        }
    }
    return res;
}

TrainResult train(const NetworkSpec& spec, const Dataset& d, const TrainConfig& cfg)
{
    return train_from(spec, init_weights(spec, cfg.seed), d, cfg);
}

EvalResult evaluate(const NetworkSpec& spec, const FlatWeights& w, const Dataset& d,
                    LossKind loss)
{
    check_dims(spec, d);
    const EvalSums sums = eval_parallel(spec, w, d, loss);
    return {sums.mean_loss(),
            static_cast<double>(sums.correct) / static_cast<double>(d.size())};
}

PathTrace fine_tune_recovery(const NetworkSpec& spec, const FlatWeights& w_t,
                             const DamagePlan& plan, const std::vector<DamagePlan>& node_order,
                             const Dataset& d, int epochs_per_step, const TrainConfig& cfg,
                             const Batch& metric_batch)
{
    if (epochs_per_step < 0)
        throw invalid_input_error("fine_tune_recovery: epochs_per_step must be >= 0");

    // node_order must partition the plan.
    std::set<std::size_t> covered;
    for (const auto& group : node_order)
        covered.insert(group.indices.begin(), group.indices.end());
    const std::set<std::size_t> planned(plan.indices.begin(), plan.indices.end());
    if (covered != planned)
        throw invalid_input_error(
            "fine_tune_recovery: node_order does not partition the damage plan");

    Rng rng(cfg.seed);
    std::vector<FlatWeights> points;
    points.push_back(w_t);

    FlatWeights w = w_t;
    std::vector<std::size_t> frozen;
    for (const auto& group : node_order) {
        w = apply_mask(w, group);
        frozen.insert(frozen.end(), group.indices.begin(), group.indices.end());
        if (epochs_per_step > 0) sgd_epochs(spec, w, d, cfg, epochs_per_step, frozen, rng);
        points.push_back(w);
    }

    PathTrace trace = trace_path(spec, metric_batch, d, points, PathKind::fine_tune, cfg.loss);
    for (std::size_t i = 0; i < trace.samples.size(); ++i)
        trace.samples[i].work_epochs =
            static_cast<double>(i == 0 ? 0 : i) * epochs_per_step;
    return trace;
}

double perturbed_accuracy_worst_sign(const NetworkSpec& spec, const FlatWeights& w,
                                     const Perturbation& p, const Dataset& eval_set,
                                     LossKind loss)
{
    FlatWeights plus = w;
    FlatWeights minus = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        plus[i] += p.du[i];
        minus[i] -= p.du[i];
    }
    const double a = evaluate(spec, plus, eval_set, loss).accuracy;
    const double b = evaluate(spec, minus, eval_set, loss).accuracy;
    return std::min(a, b);
}

void save_training_log_csv(const std::vector<EpochLog>& log, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw invalid_input_error("save_training_log_csv: cannot open " + path);
    f.precision(17);
    f << "epoch,loss,accuracy\n";
    for (const auto& e : log) f << e.epoch << "," << e.loss << "," << e.accuracy << "\n";
}

} // namespace geoward
