#pragma once

#include "geoward/metric.hpp"
#include "geoward/network.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace geoward {

// Flat-weight indices forced to zero; defines the damage hyperplane.
struct DamagePlan {
    std::vector<std::size_t> indices; // strictly increasing
    std::string description;

    static DamagePlan from_indices(std::vector<std::size_t> idx, std::string description);
    bool empty() const { return indices.empty(); }
};

DamagePlan merge_plans(const DamagePlan& a, const DamagePlan& b);

void save_plan_json(const DamagePlan& plan, const std::string& path);
DamagePlan load_plan_json(const std::string& path);

// Deleting a hidden node zeroes its incoming weights, its bias, and its
// outgoing weights. `layer` indexes layer_sizes; only hidden layers are
// valid targets.
DamagePlan node_deletion_plan(const NetworkSpec& spec, std::size_t layer,
                              const std::set<int>& nodes);

enum class PerturbationKind { random_ball, adversarial, custom };

struct Perturbation {
    std::vector<double> du;
    double norm = 0.0;
    PerturbationKind kind = PerturbationKind::custom;
};

// Uniform on the sphere of radius sigma (Gaussian draw then rescale).
Perturbation random_ball_perturbation(std::size_t n, double sigma, std::uint64_t seed);

// sigma times the unit combination of the top_k eigenvectors weighted by
// sqrt(lambda_i); top_k = 1 gives sigma * v_1.
Perturbation adversarial_perturbation(const Spectrum& s, double sigma, int top_k);

} // namespace geoward
