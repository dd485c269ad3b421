#include "vtp/pipeline.hpp"

#include <cmath>
#include <cstring>

#include "vtp/error.hpp"
#include "vtp/rng.hpp"

namespace vtp {

nlohmann::json FrameSamplePlan::to_json() const {
    return {{"source_length", source_length},
            {"target_count", target_count},
            {"indices", indices},
            {"delta_tau", delta_tau}};
}

FrameSamplePlan uniform_sample(size_t source_length, size_t target_count) {
    if (source_length == 0) throw InvalidInput("uniform_sample: zero source length");
    if (target_count == 0) throw InvalidInput("uniform_sample: zero target count");
    FrameSamplePlan plan;
    plan.source_length = source_length;
    plan.target_count = target_count;
    plan.indices.reserve(target_count);
    if (target_count == 1) {
        plan.indices.push_back(size_t(std::llround(double(source_length - 1) / 2.0)));
        plan.delta_tau = 0.0;
        return plan;
    }
    plan.delta_tau = double(source_length - 1) / double(target_count - 1);
    for (size_t i = 0; i < target_count; ++i)
        plan.indices.push_back(size_t(std::llround(double(i) * plan.delta_tau)));
    return plan;
}

Tensor apply_sample_plan(const Tensor& frames, const FrameSamplePlan& plan) {
    if (frames.rank() < 2 || frames.dim(0) != plan.source_length)
        throw InvalidInput("apply_sample_plan: frame axis does not match plan");
    std::vector<size_t> out_shape = frames.shape();
    out_shape[0] = plan.target_count;
    size_t frame_stride = frames.size() / frames.dim(0);
    std::vector<float> out;
    out.reserve(plan.target_count * frame_stride);
    for (size_t idx : plan.indices) {
        if (idx >= plan.source_length)
            throw InvalidInput("apply_sample_plan: index out of range");
        auto src = frames.data().subspan(idx * frame_stride, frame_stride);
        out.insert(out.end(), src.begin(), src.end());
    }
    return Tensor(std::move(out_shape), std::move(out));
}

std::string to_string(EncoderKind k) {
    switch (k) {
    case EncoderKind::synthetic_hash: return "synthetic_hash";
    case EncoderKind::synthetic_random_projection: return "synthetic_random_projection";
    case EncoderKind::external_file: return "external_file";
    }
    return "synthetic_hash";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "synthetic_hash") return EncoderKind::synthetic_hash;
    if (s == "synthetic_random_projection") return EncoderKind::synthetic_random_projection;
    if (s == "external_file") return EncoderKind::external_file;
    throw InvalidInput("encoder: unknown kind '" + s + "'");
}

static size_t integer_sqrt(size_t n) {
    size_t r = size_t(std::lround(std::sqrt(double(n))));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

void EncoderSpec::validate() const {
    if (patch_count == 0 || embed_dim == 0)
        throw InvalidInput("encoder: patch count and embed dim must be positive");
    size_t g = integer_sqrt(patch_count);
    if (g * g != patch_count)
        throw InvalidInput("encoder: patch count must be a perfect square");
    if (kind == EncoderKind::external_file && feature_path.empty())
        throw InvalidInput("encoder: external_file kind requires a feature path");
}

nlohmann::json EncoderSpec::to_json() const {
    nlohmann::json j{{"kind", to_string(kind)},
                     {"patch_count", patch_count},
                     {"embed_dim", embed_dim},
                     {"seed", seed}};
    if (!feature_path.empty()) j["feature_path"] = feature_path;
    return j;
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
    EncoderSpec spec;
    spec.kind = encoder_kind_from_string(j.value("kind", "synthetic_hash"));
    spec.patch_count = j.value("patch_count", size_t(16));
    spec.embed_dim = j.value("embed_dim", size_t(16));
    spec.seed = j.value("seed", uint64_t(0));
    spec.feature_path = j.value("feature_path", std::string());
    spec.validate();
    return spec;
}

namespace {

uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Per-patch linear features: per-channel mean plus first moments along each
// axis. Linear in the pixels, so a zero frame maps to the zero feature.
void patch_features(const Tensor& frames, size_t t, size_t grid, size_t row,
                    size_t col, std::vector<double>& out) {
    size_t channels = frames.dim(1), width = frames.dim(2), height = frames.dim(3);
    size_t pw = width / grid, ph = height / grid;
    out.assign(channels * 3, 0.0);
    for (size_t c = 0; c < channels; ++c) {
        double sum = 0.0, mx = 0.0, my = 0.0;
        for (size_t x = 0; x < pw; ++x) {
            for (size_t y = 0; y < ph; ++y) {
                double v = frames(t, c, row * pw + x, col * ph + y);
                sum += v;
                mx += v * (double(x) + 0.5) / double(pw);
                my += v * (double(y) + 0.5) / double(ph);
            }
        }
        double area = double(pw * ph);
        out[c * 3 + 0] = sum / area;
        out[c * 3 + 1] = mx / area;
        out[c * 3 + 2] = my / area;
    }
}

} // namespace

Tensor encode_frames(const Tensor& frames, const EncoderSpec& spec) {
    spec.validate();
    if (spec.kind == EncoderKind::external_file)
        throw InvalidInput("encode_frames: external_file features are loaded, not encoded");
    if (frames.rank() != 4)
        throw InvalidInput("encode_frames: expected frames of shape T x C x W x H");
    for (float v : frames.data())
        if (v < 0.0f || v > 1.0f)
            throw InvalidInput("encode_frames: pixel values must lie in [0,1]");
    size_t frame_count = frames.dim(0);
    size_t grid = integer_sqrt(spec.patch_count);
    if (frames.dim(2) % grid != 0 || frames.dim(3) % grid != 0)
        throw InvalidInput("encode_frames: frame size not divisible by patch grid");

    Tensor out = Tensor::zeros({frame_count, spec.patch_count, spec.embed_dim});

    if (spec.kind == EncoderKind::synthetic_hash) {
        size_t pw = frames.dim(2) / grid, ph = frames.dim(3) / grid;
        size_t channels = frames.dim(1);
        std::vector<float> patch_pixels(channels * pw * ph);
        for (size_t t = 0; t < frame_count; ++t) {
            for (size_t i = 0; i < spec.patch_count; ++i) {
                size_t row = i / grid, col = i % grid;
                size_t cursor = 0;
                for (size_t c = 0; c < channels; ++c)
                    for (size_t x = 0; x < pw; ++x)
                        for (size_t y = 0; y < ph; ++y)
                            patch_pixels[cursor++] =
                                frames(t, c, row * pw + x, col * ph + y);
                uint64_t h = fnv1a64(patch_pixels.data(),
                                     patch_pixels.size() * sizeof(float),
                                     0xcbf29ce484222325ull ^ spec.seed);
                SplitMix64 g(h ^ (0x9e3779b97f4a7c15ull * (i + 1)));
                for (size_t d = 0; d < spec.embed_dim; ++d)
                    out(t, i, d) = float(2.0 * g.next_double() - 1.0);
                // nudge away from the zero vector so cosines stay defined
                out(t, i, 0) += 0.01f;
            }
        }
        return out;
    }

    // synthetic_random_projection: token = A * features + b with seeded A, b.
    size_t feat_dim = frames.dim(1) * 3;
    SplitMix64 g(derive_seed(spec.seed, 0xA11CE));
    std::vector<double> proj(spec.embed_dim * feat_dim);
    for (double& w : proj) w = g.next_gaussian() / std::sqrt(double(feat_dim));
    std::vector<double> bias(spec.embed_dim);
    for (double& b : bias) b = 0.05 * g.next_gaussian();
    bias[0] += 0.05; // keep the bias itself off the zero vector

    std::vector<double> feats;
    for (size_t t = 0; t < frame_count; ++t) {
        for (size_t i = 0; i < spec.patch_count; ++i) {
            patch_features(frames, t, grid, i / grid, i % grid, feats);
            for (size_t d = 0; d < spec.embed_dim; ++d) {
                double acc = bias[d];
                for (size_t f = 0; f < feat_dim; ++f)
                    acc += proj[d * feat_dim + f] * feats[f];
                out(t, i, d) = float(acc);
            }
        }
    }
    return out;
}

Tensor load_features(const EncoderSpec& spec) {
    spec.validate();
    if (spec.kind != EncoderKind::external_file)
        throw InvalidInput("load_features: spec is not external_file");
    Tensor feats = read_tnsr(spec.feature_path);
    if (feats.rank() != 3 || feats.dim(1) != spec.patch_count ||
        feats.dim(2) != spec.embed_dim)
        throw InvalidInput("load_features: file shape does not match spec");
    return feats;
}

size_t ProjectorWeights::input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.dim(1);
}

size_t ProjectorWeights::output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.dim(0);
}

void ProjectorWeights::validate() const {
    if (layers.empty()) throw InvalidInput("projector: needs at least one layer");
    for (size_t i = 0; i < layers.size(); ++i) {
        const Layer& layer = layers[i];
        if (layer.weight.rank() != 2)
            throw InvalidInput("projector: weights must be matrices");
        if (layer.bias.size() != layer.weight.dim(0))
            throw InvalidInput("projector: bias length must match output dim");
        if (i > 0 && layer.weight.dim(1) != layers[i - 1].weight.dim(0))
            throw InvalidInput("projector: layer dimension chain is broken");
    }
}

nlohmann::json ProjectorWeights::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const Layer& layer : layers)
        arr.push_back({{"weight", tensor_to_json(layer.weight)}, {"bias", layer.bias}});
    return {{"layers", arr}};
}

ProjectorWeights ProjectorWeights::from_json(const nlohmann::json& j) {
    ProjectorWeights w;
    for (const auto& item : j.at("layers")) {
        Layer layer;
        layer.weight = tensor_from_json(item.at("weight"));
        layer.bias = item.at("bias").get<std::vector<float>>();
        w.layers.push_back(std::move(layer));
    }
    w.validate();
    return w;
}

ProjectorWeights ProjectorWeights::random(const std::vector<size_t>& dims, uint64_t seed) {
    if (dims.size() < 2) throw InvalidInput("projector: dimension chain too short");
    ProjectorWeights w;
    SplitMix64 g(derive_seed(seed, 0x9801));
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        size_t in = dims[i], out = dims[i + 1];
        std::vector<float> weight(out * in);
        for (float& v : weight) v = float(g.next_gaussian() / std::sqrt(double(in)));
        Layer layer;
        layer.weight = Tensor({out, in}, std::move(weight));
        layer.bias.resize(out);
        for (float& b : layer.bias) b = float(0.01 * g.next_gaussian());
        w.layers.push_back(std::move(layer));
    }
    return w;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Tensor project(const Tensor& tokens, const ProjectorWeights& weights) {
    weights.validate();
    if (tokens.rank() != 3)
        throw InvalidInput("project: expected tokens of shape T x M x D_V");
    if (tokens.dim(2) != weights.input_dim())
        throw InvalidInput("project: token dim does not match first layer input");

    size_t frames = tokens.dim(0), per_frame = tokens.dim(1);
    Tensor out = Tensor::zeros({frames, per_frame, weights.output_dim()});
    std::vector<double> h, next;
    for (size_t t = 0; t < frames; ++t) {
        for (size_t i = 0; i < per_frame; ++i) {
            h.assign(tokens.dim(2), 0.0);
            for (size_t d = 0; d < tokens.dim(2); ++d) h[d] = tokens(t, i, d);
            for (size_t l = 0; l < weights.layers.size(); ++l) {
                const auto& layer = weights.layers[l];
                size_t out_dim = layer.weight.dim(0), in_dim = layer.weight.dim(1);
                next.assign(out_dim, 0.0);
                for (size_t r = 0; r < out_dim; ++r) {
                    double acc = layer.bias[r];
                    for (size_t c = 0; c < in_dim; ++c)
                        acc += double(layer.weight(r, c)) * h[c];
                    next[r] = (l + 1 < weights.layers.size()) ? gelu(acc) : acc;
                }
                h.swap(next);
            }
            for (size_t d = 0; d < h.size(); ++d) out(t, i, d) = float(h[d]);
        }
    }
    return out;
}

Tensor spatial_pool(const Tensor& tokens, size_t stride) {
    if (tokens.rank() != 3)
        throw InvalidInput("spatial_pool: expected tokens of shape T x M x D");
    if (stride == 0) throw InvalidInput("spatial_pool: zero stride");
    size_t patches = tokens.dim(1);
    size_t grid = integer_sqrt(patches);
    if (grid * grid != patches)
        throw InvalidInput("spatial_pool: patch count must be a perfect square");
    if (grid % stride != 0)
        throw InvalidInput("spatial_pool: grid side not divisible by stride");

    size_t out_grid = grid / stride;
    size_t frames = tokens.dim(0), dim = tokens.dim(2);
    Tensor out = Tensor::zeros({frames, out_grid * out_grid, dim});
    double inv_block = 1.0 / double(stride * stride);
    for (size_t t = 0; t < frames; ++t) {
        for (size_t br = 0; br < out_grid; ++br) {
            for (size_t bc = 0; bc < out_grid; ++bc) {
                for (size_t d = 0; d < dim; ++d) {
                    double acc = 0.0;
                    for (size_t r = 0; r < stride; ++r)
                        for (size_t c = 0; c < stride; ++c)
                            acc += tokens(t, (br * stride + r) * grid + bc * stride + c, d);
                    out(t, br * out_grid + bc, d) = float(acc * inv_block);
                }
            }
        }
    }
    return out;
}

Tensor embed_text(const std::vector<size_t>& token_ids, const Tensor& table) {
    if (table.rank() != 2)
        throw InvalidInput("embed_text: table must be vocab x D");
    if (token_ids.empty())
        throw InvalidInput("embed_text: empty token list");
    size_t vocab = table.dim(0), dim = table.dim(1);
    Tensor out = Tensor::zeros({token_ids.size(), dim});
    for (size_t n = 0; n < token_ids.size(); ++n) {
        size_t id = token_ids[n];
        if (id >= vocab) throw InvalidInput("embed_text: token id out of vocabulary");
        for (size_t d = 0; d < dim; ++d) out(n, d) = table(id, d);
    }
    return out;
}

Tensor apply_rope(const Tensor& embeddings, bool one_based_positions) {
    if (embeddings.rank() != 2)
        throw InvalidInput("apply_rope: expected embeddings of shape N_T x D");
    size_t dim = embeddings.dim(1);
    if (dim % 2 != 0) throw InvalidInput("apply_rope: embedding dim must be even");

    size_t count = embeddings.dim(0), pairs = dim / 2;
    std::vector<double> theta(pairs);
    for (size_t i = 0; i < pairs; ++i)
        theta[i] = std::pow(10000.0, -2.0 * double(i) / double(dim));

    Tensor out = Tensor::zeros({count, dim});
    for (size_t n = 0; n < count; ++n) {
        double pos = double(n) + (one_based_positions ? 1.0 : 0.0);
        for (size_t i = 0; i < pairs; ++i) {
            double ang = pos * theta[i];
            double c = std::cos(ang), s = std::sin(ang);
            double a = embeddings(n, 2 * i), b = embeddings(n, 2 * i + 1);
            out(n, 2 * i) = float(a * c - b * s);
            out(n, 2 * i + 1) = float(a * s + b * c);
        }
    }
    return out;
}

} // namespace vtp
