#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/pipeline.hpp"

namespace vtp::gradcheck {

/// J_{ij} = s_i (delta_ij - s_j), returned n x n row-major.
std::vector<double> softmax_jacobian(std::span<const double> x);

/// Gradient of cos(x, t) with respect to x.
std::vector<double> cosine_grad(std::span<const double> x, std::span<const double> t);

/// Gradient of cos(x, t) with respect to t.
std::vector<double> cosine_grad_wrt_t(std::span<const double> x, std::span<const double> t);

struct DiffReport {
    std::string op;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    size_t probes = 0;
    double eps = 0.0;
    double tolerance = 0.0;
    double abs_floor = 0.0;
    bool pass = false;

    nlohmann::json to_json() const;
};

enum class Fragment {
    similarity_chain, // alpha -> beta -> gamma
    gumbel_soft,      // s with fixed noise
    beta_renorm,
    gamma_renorm,
    temporal_pool,
    reweight,
    projector,
    full_soft_path,
};

std::string to_string(Fragment f);
Fragment fragment_from_name(const std::string& name); // InvalidInput on unknown
std::vector<Fragment> all_fragments();

/// A differentiation problem: flattened inputs, a scalar loss (sum of the
/// fragment's outputs), and the hand-derived gradient at the base point.
/// All arithmetic is 64-bit; 32-bit storage cannot resolve the tolerances.
struct Problem {
    std::string name;
    std::vector<double> inputs;
    std::function<double(std::span<const double>)> loss;
    std::vector<double> analytic;
};

Problem make_problem(Fragment f, uint64_t seed);

/// Geometry and frozen state behind the full-soft-path problem, exposed so
/// its 64-bit forward can be checked against the float pipeline.
struct FullPathInstance {
    size_t frames = 0, patches = 0, dim = 0, n_text = 0;
    std::vector<bool> mask;
    double temperature = 0.0;
    size_t top_k = 0;
    std::vector<double> sep_grid, sep_frame, noise;
    std::vector<size_t> selected;
};

Problem make_full_path_problem(uint64_t seed, FullPathInstance* instance_out = nullptr);

/// Projector fragment over explicit weights; `token_count` tokens of the
/// weights' input dim are read from `tokens`. Weight/bias gradients are
/// appended to the input vector when `include_weight_grads`.
Problem make_projector_problem(const ProjectorWeights& weights,
                               std::vector<double> tokens, size_t token_count,
                               bool include_weight_grads);

/// Central-difference check at `probes` random coordinates. A probe whose
/// absolute error is at or below the floor counts as relative error 0.
DiffReport run_check(const Problem& problem, size_t probes, double eps,
                     double tolerance, uint64_t seed, double abs_floor = 1e-6);

DiffReport check_path(Fragment f, size_t probes, double eps, double tolerance,
                      uint64_t seed);

} // namespace vtp::gradcheck
