#include "vtp/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vtp/error.hpp"
#include "vtp/rng.hpp"

namespace vtp {

std::string to_string(SelectionMode m) {
    return m == SelectionMode::train_gumbel ? "train_gumbel" : "infer_deterministic";
}

SelectionMode selection_mode_from_string(const std::string& s) {
    if (s == "train_gumbel") return SelectionMode::train_gumbel;
    if (s == "infer_deterministic") return SelectionMode::infer_deterministic;
    throw InvalidInput("selection: unknown mode '" + s + "'");
}

std::string to_string(TokenKind k) {
    switch (k) {
    case TokenKind::spatial: return "spatial";
    case TokenKind::grid_sep: return "grid_sep";
    case TokenKind::temporal: return "temporal";
    case TokenKind::frame_sep: return "frame_sep";
    }
    return "spatial";
}

nlohmann::json SelectionResult::to_json() const {
    return {{"probs", probs},
            {"selected", selected},
            {"temperature", temperature},
            {"mode", to_string(mode)},
            {"seed", seed},
            {"noise", noise}};
}

SeparatorBank make_separators(size_t dim, uint64_t seed) {
    if (dim == 0) throw InvalidInput("separators: zero dimension");
    SeparatorBank bank;
    SplitMix64 g(derive_seed(seed, 0x5E9));
    double scale = 1.0 / std::sqrt(double(dim));
    bank.grid.resize(dim);
    bank.frame.resize(dim);
    for (float& v : bank.grid) v = float(g.next_gaussian() * scale);
    for (float& v : bank.frame) v = float(g.next_gaussian() * scale);
    return bank;
}

MemoryPyramid::Census MemoryPyramid::census() const {
    Census c;
    for (const TokenTag& tag : tags) {
        switch (tag.kind) {
        case TokenKind::spatial: ++c.spatial; break;
        case TokenKind::grid_sep: ++c.grid_sep; break;
        case TokenKind::temporal: ++c.temporal; break;
        case TokenKind::frame_sep: ++c.frame_sep; break;
        }
    }
    return c;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

static double norm_of(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += double(x) * double(x);
    return std::sqrt(s);
}

Tensor patch_text_similarity(const Tensor& visual, const Tensor& text,
                             const std::vector<bool>& question_mask) {
    if (visual.rank() != 3 || text.rank() != 2)
        throw InvalidInput("similarity: expected visual T x N_V x D and text N_T x D");
    if (visual.dim(2) != text.dim(1))
        throw InvalidInput("similarity: visual and text dims differ");
    size_t frames = visual.dim(0), patches = visual.dim(1), dim = visual.dim(2);
    size_t n_text = text.dim(0);
    if (question_mask.size() != n_text)
        throw InvalidInput("similarity: mask length must equal text token count");
    if (std::none_of(question_mask.begin(), question_mask.end(), [](bool b) { return b; }))
        throw InvalidInput("similarity: all text tokens masked");

    std::vector<double> text_norms(n_text, 0.0);
    for (size_t j = 0; j < n_text; ++j) {
        if (!question_mask[j]) continue;
        text_norms[j] = norm_of(text.data().subspan(j * dim, dim));
        if (text_norms[j] == 0.0)
            throw ZeroNormToken("similarity: zero-norm text token");
    }

    Tensor alpha = Tensor::zeros({frames, patches, n_text});
    for (size_t t = 0; t < frames; ++t) {
        for (size_t i = 0; i < patches; ++i) {
            auto x = visual.data().subspan((t * patches + i) * dim, dim);
            double xn = norm_of(x);
            if (xn == 0.0) throw ZeroNormToken("similarity: zero-norm visual token");
            for (size_t j = 0; j < n_text; ++j) {
                if (!question_mask[j]) continue; // masked columns stay zero
                double dot = 0.0;
                for (size_t d = 0; d < dim; ++d)
                    dot += double(x[d]) * double(text(j, d));
                alpha(t, i, j) = float(dot / (xn * text_norms[j]));
            }
        }
    }
    return alpha;
}

AttentionMaps aggregate_attention(Tensor alpha, const std::vector<bool>& question_mask) {
    if (alpha.rank() != 3)
        throw InvalidInput("aggregate: expected alpha of shape T x N_V x N_T");
    size_t frames = alpha.dim(0), patches = alpha.dim(1), n_text = alpha.dim(2);
    if (question_mask.size() != n_text)
        throw InvalidInput("aggregate: mask length must equal text token count");
    size_t unmasked = size_t(std::count(question_mask.begin(), question_mask.end(), true));
    if (unmasked == 0) throw InvalidInput("aggregate: all text tokens masked");

    AttentionMaps maps;
    maps.beta = Tensor::zeros({frames, patches});
    maps.gamma.assign(frames, 0.0f);
    for (size_t t = 0; t < frames; ++t) {
        double frame_sum = 0.0;
        for (size_t i = 0; i < patches; ++i) {
            double acc = 0.0;
            for (size_t j = 0; j < n_text; ++j)
                if (question_mask[j]) acc += alpha(t, i, j);
            double b = acc / double(unmasked);
            maps.beta(t, i) = float(b);
            frame_sum += b;
        }
        maps.gamma[t] = float(frame_sum / double(patches));
    }
    maps.alpha = std::move(alpha);
    return maps;
}

SelectionResult select_frames(std::span<const float> gamma, size_t top_k,
                              double temperature, SelectionMode mode, uint64_t seed) {
    size_t frames = gamma.size();
    if (frames == 0) throw InvalidInput("select_frames: empty score vector");
    if (top_k == 0 || top_k > frames)
        throw InvalidInput("select_frames: k must satisfy 1 <= k <= T");
    if (!(temperature > 0.0)) throw InvalidInput("select_frames: temperature must be positive");

    SelectionResult result;
    result.temperature = temperature;
    result.mode = mode;
    result.seed = seed;

    std::vector<double> logits(frames);
    if (mode == SelectionMode::train_gumbel) {
        SplitMix64 g(derive_seed(seed, 0x6B));
        result.noise.resize(frames);
        for (size_t t = 0; t < frames; ++t) {
            double gum = -std::log(-std::log(g.next_open()));
            result.noise[t] = float(gum);
            logits[t] = double(gamma[t]) / temperature + gum;
        }
    } else {
        for (size_t t = 0; t < frames; ++t)
            logits[t] = double(gamma[t]) / temperature;
    }

    std::vector<double> s = softmax(logits);
    result.probs.resize(frames);
    for (size_t t = 0; t < frames; ++t) result.probs[t] = float(s[t]);

    // k largest probabilities, ties to the lower frame index
    std::vector<size_t> order(frames);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return result.probs[a] > result.probs[b];
    });
    result.selected.assign(order.begin(), order.begin() + std::ptrdiff_t(top_k));
    std::sort(result.selected.begin(), result.selected.end());
    return result;
}

Bank build_spatial_bank(const Tensor& visual, const Tensor& beta,
                        const SelectionResult& selection, const SeparatorBank& seps) {
    if (visual.rank() != 3 || beta.rank() != 2)
        throw InvalidInput("spatial bank: expected visual T x N_V x D and beta T x N_V");
    if (beta.dim(0) != visual.dim(0) || beta.dim(1) != visual.dim(1))
        throw InvalidInput("spatial bank: beta shape does not match visual");
    size_t patches = visual.dim(1), dim = visual.dim(2);
    if (seps.grid.size() != dim)
        throw InvalidInput("spatial bank: separator dim mismatch");
    size_t grid = size_t(std::lround(std::sqrt(double(patches))));
    if (grid * grid != patches)
        throw InvalidInput("spatial bank: N_V must be a perfect square");
    for (size_t t : selection.selected)
        if (t >= visual.dim(0))
            throw InvalidInput("spatial bank: selected frame out of range");

    // softmax over all k*N_V selected patch scores
    std::vector<double> scores;
    scores.reserve(selection.selected.size() * patches);
    for (size_t t : selection.selected)
        for (size_t i = 0; i < patches; ++i) scores.push_back(beta(t, i));
    std::vector<double> renorm = softmax(scores);

    size_t k = selection.selected.size();
    size_t total = k * patches + k * grid;
    Bank bank;
    bank.tokens = Tensor::zeros({total, dim});
    bank.tags.reserve(total);

    size_t row_out = 0, flat = 0;
    for (size_t t : selection.selected) {
        for (size_t r = 0; r < grid; ++r) {
            for (size_t c = 0; c < grid; ++c) {
                size_t i = r * grid + c;
                double w = renorm[flat++];
                for (size_t d = 0; d < dim; ++d)
                    bank.tokens(row_out, d) = float(w * visual(t, i, d));
                bank.tags.push_back({TokenKind::spatial, t, i});
                ++row_out;
            }
            for (size_t d = 0; d < dim; ++d) bank.tokens(row_out, d) = seps.grid[d];
            bank.tags.push_back({TokenKind::grid_sep, 0, 0});
            ++row_out;
        }
    }
    return bank;
}

Bank build_temporal_bank(const Tensor& visual, std::span<const float> gamma,
                         const SeparatorBank& seps) {
    if (visual.rank() != 3)
        throw InvalidInput("temporal bank: expected visual T x N_V x D");
    size_t frames = visual.dim(0), patches = visual.dim(1), dim = visual.dim(2);
    if (gamma.size() != frames)
        throw InvalidInput("temporal bank: gamma length must equal frame count");
    if (seps.frame.size() != dim)
        throw InvalidInput("temporal bank: separator dim mismatch");

    std::vector<double> logits(gamma.begin(), gamma.end());
    std::vector<double> renorm = softmax(logits);

    Bank bank;
    bank.tokens = Tensor::zeros({2 * frames - 1, dim});
    bank.tags.reserve(2 * frames - 1);
    size_t row_out = 0;
    for (size_t t = 0; t < frames; ++t) {
        for (size_t d = 0; d < dim; ++d) {
            double acc = 0.0;
            for (size_t i = 0; i < patches; ++i) acc += visual(t, i, d);
            bank.tokens(row_out, d) = float(renorm[t] * acc / double(patches));
        }
        bank.tags.push_back({TokenKind::temporal, t, 0});
        ++row_out;
        if (t + 1 < frames) {
            for (size_t d = 0; d < dim; ++d) bank.tokens(row_out, d) = seps.frame[d];
            bank.tags.push_back({TokenKind::frame_sep, 0, 0});
            ++row_out;
        }
    }
    return bank;
}

MemoryPyramid assemble_pyramid(const Bank& spatial, const Bank& temporal) {
    if (spatial.tokens.size() == 0 || temporal.tokens.size() == 0)
        throw InvalidInput("assemble: both banks must be nonempty");
    if (spatial.tokens.dim(1) != temporal.tokens.dim(1))
        throw InvalidInput("assemble: bank token dimensions differ");
    size_t dim = spatial.tokens.dim(1);
    size_t total = spatial.tokens.dim(0) + temporal.tokens.dim(0);

    MemoryPyramid pyramid;
    pyramid.tokens = Tensor::zeros({total, dim});
    auto dst = pyramid.tokens.data();
    auto s = spatial.tokens.data();
    auto t = temporal.tokens.data();
    std::copy(s.begin(), s.end(), dst.begin());
    std::copy(t.begin(), t.end(), dst.begin() + std::ptrdiff_t(s.size()));
    pyramid.tags = spatial.tags;
    pyramid.tags.insert(pyramid.tags.end(), temporal.tags.begin(), temporal.tags.end());
    return pyramid;
}

PyramidOutputs build_memory_pyramid(const Tensor& visual, const Tensor& text,
                                    const std::vector<bool>& question_mask,
                                    const PyramidConfig& config) {
    PyramidOutputs out;
    Tensor alpha = patch_text_similarity(visual, text, question_mask);
    out.attention = aggregate_attention(std::move(alpha), question_mask);
    out.selection = select_frames(out.attention.gamma, config.top_k,
                                  config.temperature, config.mode, config.seed);
    Bank spatial = build_spatial_bank(visual, out.attention.beta, out.selection,
                                      config.separators);
    Bank temporal = build_temporal_bank(visual, out.attention.gamma, config.separators);
    out.pyramid = assemble_pyramid(spatial, temporal);
    return out;
}

} // namespace vtp
