#include "geoward/paths.hpp"

#include "geoward/errors.hpp"
#include "geoward/linalg.hpp"
#include "geoward/metric.hpp"
#include "geoward/training.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace geoward {

std::string to_string(PathKind k)
{
    switch (k) {
    case PathKind::naive_linear: return "naive_linear";
    case PathKind::stepwise_deletion: return "stepwise_deletion";
    case PathKind::geodesic: return "geodesic";
    case PathKind::fine_tune: return "fine_tune";
    }
    return "unknown";
}

double PathTrace::mean_accuracy() const
{
    double s = 0.0;
    for (const auto& smp : samples) s += smp.accuracy;
    return s / static_cast<double>(samples.size());
}

double PathTrace::peak_abs_acceleration() const
{
    double p = 0.0;
    for (const auto& smp : samples) p = std::max(p, std::fabs(smp.acceleration));
    return p;
}

std::vector<FlatWeights> naive_linear_path(const FlatWeights& w_t, const DamagePlan& plan,
                                           int steps)
{
    if (steps < 2) throw invalid_input_error("naive_linear_path: steps must be >= 2");
    for (std::size_t idx : plan.indices)
        if (idx >= w_t.size())
            throw invalid_input_error("naive_linear_path: plan index out of range");

    std::vector<FlatWeights> path;
    path.reserve(steps);
    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / (steps - 1);
        FlatWeights w = w_t;
        for (std::size_t idx : plan.indices) w[idx] = w_t[idx] * (1.0 - t);
        path.push_back(std::move(w));
    }
    return path;
}

std::vector<FlatWeights> stepwise_deletion_path(const FlatWeights& w_t,
                                                const std::vector<DamagePlan>& node_groups)
{
    std::vector<FlatWeights> path;
    path.reserve(node_groups.size() + 1);
    path.push_back(w_t);
    FlatWeights w = w_t;
    for (const auto& group : node_groups) {
        w = apply_mask(w, group);
        path.push_back(w);
    }
    return path;
}

double path_energy(const NetworkSpec& spec, const Batch& batch,
                   const std::vector<FlatWeights>& path, bool use_sqrt)
{
    if (path.size() < 2) throw invalid_input_error("path_energy: need >= 2 points");
    const std::size_t segs = path.size() - 1;
    const double inv_dt = static_cast<double>(segs);

    double total = 0.0;
    for (std::size_t s = 0; s < segs; ++s) {
        const auto& a = path[s].values();
        const auto& b = path[s + 1].values();
        FlatWeights mid = path[s];
        std::vector<double> dw(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            mid[i] = 0.5 * (a[i] + b[i]);
            dw[i] = b[i] - a[i];
        }
        const double q = quadratic_form_matfree(spec, mid, batch, dw);
        // q(dw/dt)*dt = q(dw)/dt for the energy; sqrt(q(dw/dt))*dt = sqrt(q(dw))
        // for the length variant.
        total += use_sqrt ? std::sqrt(q) : q * inv_dt;
    }
    return total;
}

double breakdown_speed(const NetworkSpec& spec, const Batch& batch, const FlatWeights& w,
                       const std::vector<double>& velocity)
{
    if (velocity.size() != w.size())
        throw invalid_input_error("breakdown_speed: velocity length mismatch");
    return quadratic_form_matfree(spec, w, batch, velocity);
}

double breakdown_acceleration(const NetworkSpec& spec, const Batch& batch, const FlatWeights& w,
                              const std::vector<double>& velocity, double h)
{
    if (h < 0.0) throw invalid_input_error("breakdown_acceleration: h must be > 0");
    if (h == 0.0) {
        const double vn = norm2(velocity);
        h = 1e-4 * norm2(w.values()) / std::max(vn, 1e-12);
        if (h == 0.0) h = 1e-4;
    }
    FlatWeights plus = w;
    FlatWeights minus = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        plus[i] += h * velocity[i];
        minus[i] -= h * velocity[i];
    }
    const double sp = breakdown_speed(spec, batch, plus, velocity);
    const double sm = breakdown_speed(spec, batch, minus, velocity);
    const double a = (sp - sm) / (2.0 * h);
    if (!std::isfinite(a))
        throw numerical_failure_error("breakdown_acceleration: non-finite estimate");
    return a;
}

PathTrace trace_path(const NetworkSpec& spec, const Batch& batch, const Dataset& eval_set,
                     const std::vector<FlatWeights>& path, PathKind kind, LossKind loss)
{
    if (path.empty()) throw invalid_input_error("trace_path: empty path");

    PathTrace trace;
    trace.kind = kind;
    trace.samples.resize(path.size());

    const std::size_t N = path.size();
    const double dt = N > 1 ? 1.0 / static_cast<double>(N - 1) : 1.0;

    for (std::size_t i = 0; i < N; ++i) {
        PathSample& smp = trace.samples[i];
        smp.t = N > 1 ? static_cast<double>(i) / static_cast<double>(N - 1) : 0.0;
        smp.w = path[i];
        const EvalResult er = evaluate(spec, path[i], eval_set, loss);
        smp.loss = er.loss;
        smp.accuracy = er.accuracy;

        if (N > 1) {
            const std::size_t seg = (i + 1 < N) ? i : i - 1;
            std::vector<double> vel(path[i].size());
            const auto& a = path[seg].values();
            const auto& b = path[seg + 1].values();
            for (std::size_t j = 0; j < vel.size(); ++j) vel[j] = (b[j] - a[j]) / dt;
            smp.speed = breakdown_speed(spec, batch, path[i], vel);
            smp.acceleration = breakdown_acceleration(spec, batch, path[i], vel);
        }
    }
    return trace;
}

void save_trace_csv(const PathTrace& trace, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw invalid_input_error("save_trace_csv: cannot open " + path);
    f.precision(17);
    f << "t,loss,accuracy,speed,acceleration,work_epochs\n";
    for (const auto& s : trace.samples)
        f << s.t << "," << s.loss << "," << s.accuracy << "," << s.speed << ","
          << s.acceleration << "," << s.work_epochs << "\n";
}

void save_trace_metadata(const PathTrace& trace, const std::string& path,
                         const std::string& extra_json)
{
    nlohmann::json j;
    j["kind"] = to_string(trace.kind);
    j["samples"] = trace.samples.size();
    j["final_accuracy"] = trace.samples.back().accuracy;
    j["mean_accuracy"] = trace.mean_accuracy();
    j["peak_abs_acceleration"] = trace.peak_abs_acceleration();
    if (!extra_json.empty()) j["extra"] = nlohmann::json::parse(extra_json);
    std::ofstream f(path);
    if (!f) throw invalid_input_error("save_trace_metadata: cannot open " + path);
    f << j.dump(2) << "\n";
}

} // namespace geoward
