#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/tensor.hpp"

namespace vtp {

/// Uniform frame sampling plan over a source of `source_length` frames.
struct FrameSamplePlan {
    size_t source_length = 0;
    size_t target_count = 0;
    std::vector<size_t> indices; // non-decreasing, endpoints covered for T >= 2
    double delta_tau = 0.0;      // index-space interval (L-1)/(T-1), 0 when T == 1

    nlohmann::json to_json() const;
};

/// index_i = round(i * (L-1) / (T-1)); T == 1 picks the middle frame.
FrameSamplePlan uniform_sample(size_t source_length, size_t target_count);

/// Selects plan.indices along the frame axis (first dimension).
Tensor apply_sample_plan(const Tensor& frames, const FrameSamplePlan& plan);

enum class EncoderKind { synthetic_hash, synthetic_random_projection, external_file };

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

/// Stand-in for a patch-based visual encoder: frames T x C x W x H in [0,1]
/// become token grids T x M x D_V. Synthetic kinds are deterministic under
/// (frames, spec); `external_file` points at precomputed features.
struct EncoderSpec {
    EncoderKind kind = EncoderKind::synthetic_hash;
    size_t patch_count = 16; // M, perfect square
    size_t embed_dim = 16;   // D_V
    uint64_t seed = 0;
    std::string feature_path; // external_file only

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderSpec from_json(const nlohmann::json& j);
};

Tensor encode_frames(const Tensor& frames, const EncoderSpec& spec);

/// Loads precomputed T x M x D_V features for an external_file spec.
Tensor load_features(const EncoderSpec& spec);

/// Token-wise MLP: GELU between layers, none after the last.
struct ProjectorWeights {
    struct Layer {
        Tensor weight;           // out_dim x in_dim
        std::vector<float> bias; // out_dim
    };
    std::vector<Layer> layers;

    size_t input_dim() const;
    size_t output_dim() const;
    void validate() const;
    nlohmann::json to_json() const;
    static ProjectorWeights from_json(const nlohmann::json& j);
    /// Seeded Gaussian init for the given dimension chain, e.g. {D_V, H, D}.
    static ProjectorWeights random(const std::vector<size_t>& dims, uint64_t seed);
};

/// Exact-erf GELU.
double gelu(double x);

Tensor project(const Tensor& tokens, const ProjectorWeights& weights);

/// Average-of-pxp-block pooling over the sqrt(M) x sqrt(M) patch grid.
/// Requires square M with sqrt(M) divisible by the stride.
Tensor spatial_pool(const Tensor& tokens, size_t stride);

/// Row lookup into a vocab x D embedding table.
Tensor embed_text(const std::vector<size_t>& token_ids, const Tensor& table);

/// Rotary position embedding with angles position * 10000^(-2i/D) per
/// dimension pair. Positions are 0-based unless `one_based_positions`.
Tensor apply_rope(const Tensor& embeddings, bool one_based_positions = false);

} // namespace vtp
