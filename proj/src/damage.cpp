#include "geoward/damage.hpp"

#include "geoward/errors.hpp"
#include "geoward/linalg.hpp"
#include "geoward/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace geoward {

DamagePlan DamagePlan::from_indices(std::vector<std::size_t> idx, std::string description)
{
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return DamagePlan{std::move(idx), std::move(description)};
}

DamagePlan merge_plans(const DamagePlan& a, const DamagePlan& b)
{
    std::vector<std::size_t> idx = a.indices;
    idx.insert(idx.end(), b.indices.begin(), b.indices.end());
    return DamagePlan::from_indices(std::move(idx),
                                    a.description.empty() ? b.description
                                                          : a.description + " + " + b.description);
}

void save_plan_json(const DamagePlan& plan, const std::string& path)
{
    nlohmann::json j;
    j["indices"] = plan.indices;
    j["description"] = plan.description;
    std::ofstream f(path);
    if (!f) throw invalid_input_error("save_plan_json: cannot open " + path);
    f << j.dump(2) << "\n";
}

DamagePlan load_plan_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw invalid_input_error("load_plan_json: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("load_plan_json: " + std::string(e.what()));
    }
    return DamagePlan::from_indices(j.at("indices").get<std::vector<std::size_t>>(),
                                    j.value("description", ""));
}

DamagePlan node_deletion_plan(const NetworkSpec& spec, std::size_t layer,
                              const std::set<int>& nodes)
{
    spec.validate();
    const std::size_t L = spec.layer_sizes.size();
    if (layer == 0 || layer + 1 >= L)
        throw invalid_input_error(
            "node_deletion_plan: layer " + std::to_string(layer) +
            " is not a hidden layer (nodes there are data, not parameters)");
    const int width = spec.layer_sizes[layer];
    for (int nd : nodes)
        if (nd < 0 || nd >= width)
            throw invalid_input_error("node_deletion_plan: node " + std::to_string(nd) +
                                      " out of range for layer width " + std::to_string(width));

    const WeightLayout layout(spec);
    std::vector<std::size_t> idx;
    const int in_n = spec.layer_sizes[layer - 1];
    const int out_n = spec.layer_sizes[layer + 1];
    for (int nd : nodes) {
        for (int i = 0; i < in_n; ++i) idx.push_back(layout.weight_index(layer - 1, nd, i));
        idx.push_back(layout.bias_index(layer - 1, nd));
        for (int o = 0; o < out_n; ++o) idx.push_back(layout.weight_index(layer, o, nd));
    }

    std::string desc = "layer" + std::to_string(layer) + " nodes";
    for (int nd : nodes) desc += " " + std::to_string(nd);
    return DamagePlan::from_indices(std::move(idx), std::move(desc));
}

Perturbation random_ball_perturbation(std::size_t n, double sigma, std::uint64_t seed)
{
    if (n < 1) throw invalid_input_error("random_ball_perturbation: n must be >= 1");
    Rng rng(seed);
    Perturbation p;
    p.kind = PerturbationKind::random_ball;
    p.du = rng.normal_vector(n);
    double nrm = norm2(p.du);
    while (nrm < 1e-300) {
        p.du = rng.normal_vector(n);
        nrm = norm2(p.du);
    }
    const double s = sigma / nrm;
    for (auto& x : p.du) x *= s;
    p.norm = sigma;
    return p;
}

Perturbation adversarial_perturbation(const Spectrum& s, double sigma, int top_k)
{
    if (top_k < 1) throw invalid_input_error("adversarial_perturbation: top_k must be >= 1");
    const auto& ev = s.decomposition.eigenvalues;
    const std::size_t n = s.decomposition.dim();
    const int k = std::min<int>(top_k, static_cast<int>(n));
    if (ev.empty() || ev.front() <= 0.0)
        throw degenerate_input_error("adversarial_perturbation: spectrum has no positive mass");

    std::vector<double> u(n, 0.0);
    for (int i = 0; i < k; ++i) {
        const double wgt = std::sqrt(std::max(ev[i], 0.0));
        if (wgt == 0.0) continue;
        axpy(wgt, s.decomposition.eigenvectors[i], u);
    }
    const double nrm = norm2(u);
    if (nrm < 1e-300)
        throw degenerate_input_error("adversarial_perturbation: degenerate eigenvector mix");

    Perturbation p;
    p.kind = PerturbationKind::adversarial;
    p.du = std::move(u);
    const double scale = sigma / nrm;
    for (auto& x : p.du) x *= scale;
    p.norm = sigma;
    return p;
}

} // namespace geoward
