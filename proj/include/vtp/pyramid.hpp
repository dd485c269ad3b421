#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/tensor.hpp"

namespace vtp {

/// Cross-modal attention maps: alpha is the patch-text cosine tensor
/// (T x N_V x N_T, masked text columns stored as zero placeholders and
/// excluded from every downstream mean), beta the per-patch means
/// (T x N_V), gamma the per-frame means (T).
struct AttentionMaps {
    Tensor alpha;
    Tensor beta;
    std::vector<float> gamma;
};

enum class SelectionMode { train_gumbel, infer_deterministic };

std::string to_string(SelectionMode m);
SelectionMode selection_mode_from_string(const std::string& s);

/// Soft selection probabilities plus the hard top-k frame choice.
/// In train mode the logits are gamma / tau + Gumbel noise, so the hard
/// pick is distributed as softmax(gamma / tau); inference zeroes the noise.
struct SelectionResult {
    std::vector<float> probs;     // sums to 1
    std::vector<size_t> selected; // k frame indices, ascending
    double temperature = 0.2;
    SelectionMode mode = SelectionMode::infer_deterministic;
    uint64_t seed = 0;
    std::vector<float> noise; // per-frame Gumbel draw, empty in infer mode

    nlohmann::json to_json() const;
};

struct SeparatorBank {
    std::vector<float> grid;  // sep emitted after each row of spatial tokens
    std::vector<float> frame; // sep interleaving temporal tokens
};

/// Seeded unit-variance init scaled by 1/sqrt(D).
SeparatorBank make_separators(size_t dim, uint64_t seed);

enum class TokenKind { spatial, grid_sep, temporal, frame_sep };

std::string to_string(TokenKind k);

struct TokenTag {
    TokenKind kind = TokenKind::spatial;
    size_t frame = 0; // spatial / temporal only
    size_t patch = 0; // spatial only
};

/// Ordered token sequence with per-token provenance. Length is always
/// k*N_V + k*N_G + 2T - 1 for N_G = sqrt(N_V).
struct MemoryPyramid {
    Tensor tokens; // n x D
    std::vector<TokenTag> tags;

    struct Census {
        size_t spatial = 0, grid_sep = 0, temporal = 0, frame_sep = 0;
    };
    Census census() const;
};

/// alpha_{t,i,j} = cos(x_{t,i}, text_j) for unmasked j (question tokens);
/// masked columns are written as zero and never aggregated.
Tensor patch_text_similarity(const Tensor& visual, const Tensor& text,
                             const std::vector<bool>& question_mask);

/// beta = mean of alpha over unmasked text tokens; gamma = mean of beta
/// over patches.
AttentionMaps aggregate_attention(Tensor alpha, const std::vector<bool>& question_mask);

SelectionResult select_frames(std::span<const float> gamma, size_t top_k,
                              double temperature, SelectionMode mode, uint64_t seed);

struct Bank {
    Tensor tokens;
    std::vector<TokenTag> tags;
};

/// Reweights the selected frames' patches by a softmax over all k*N_V
/// patch scores and lays them out frame-major with a grid separator after
/// every row of N_G tokens. Separators are never reweighted.
Bank build_spatial_bank(const Tensor& visual, const Tensor& beta,
                        const SelectionResult& selection, const SeparatorBank& seps);

/// Mean-pools each frame, reweights by softmax(gamma) over all T frames,
/// and interleaves the frame separator (T-1 separators).
Bank build_temporal_bank(const Tensor& visual, std::span<const float> gamma,
                         const SeparatorBank& seps);

MemoryPyramid assemble_pyramid(const Bank& spatial, const Bank& temporal);

struct PyramidConfig {
    size_t top_k = 10;
    double temperature = 0.2;
    SelectionMode mode = SelectionMode::infer_deterministic;
    uint64_t seed = 0;
    SeparatorBank separators;
};

struct PyramidOutputs {
    MemoryPyramid pyramid;
    AttentionMaps attention;
    SelectionResult selection;
};

/// End-to-end constructor: similarity, aggregation, selection, both banks,
/// assembly. Deterministic given the seed.
PyramidOutputs build_memory_pyramid(const Tensor& visual, const Tensor& text,
                                    const std::vector<bool>& question_mask,
                                    const PyramidConfig& config);

/// Stable softmax helper shared by selection and renormalization.
std::vector<double> softmax(std::span<const double> logits);

} // namespace vtp
