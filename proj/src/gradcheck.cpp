#include "vtp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vtp/error.hpp"
#include "vtp/pyramid.hpp"
#include "vtp/rng.hpp"

namespace vtp::gradcheck {

std::vector<double> softmax_jacobian(std::span<const double> x) {
    std::vector<double> s = vtp::softmax(x);
    size_t n = x.size();
    std::vector<double> jac(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            jac[i * n + j] = s[i] * ((i == j ? 1.0 : 0.0) - s[j]);
    return jac;
}

static double norm_d(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

static double cos_d(std::span<const double> x, std::span<const double> t,
                    double nx, double nt) {
    double dot = 0.0;
    for (size_t d = 0; d < x.size(); ++d) dot += x[d] * t[d];
    return dot / (nx * nt);
}

std::vector<double> cosine_grad(std::span<const double> x, std::span<const double> t) {
    if (x.size() != t.size()) throw InvalidInput("cosine_grad: dimension mismatch");
    double nx = norm_d(x), nt = norm_d(t);
    if (nx == 0.0 || nt == 0.0) throw ZeroNormToken("cosine_grad: zero-norm vector");
    double c = cos_d(x, t, nx, nt);
    std::vector<double> g(x.size());
    for (size_t d = 0; d < x.size(); ++d)
        g[d] = t[d] / (nx * nt) - c * x[d] / (nx * nx);
    return g;
}

std::vector<double> cosine_grad_wrt_t(std::span<const double> x, std::span<const double> t) {
    return cosine_grad(t, x);
}

nlohmann::json DiffReport::to_json() const {
    return {{"op", op},
            {"max_rel_error", max_rel_error},
            {"max_abs_error", max_abs_error},
            {"probes", probes},
            {"eps", eps},
            {"tolerance", tolerance},
            {"abs_floor", abs_floor},
            {"pass", pass}};
}

std::string to_string(Fragment f) {
    switch (f) {
    case Fragment::similarity_chain: return "similarity-chain";
    case Fragment::gumbel_soft: return "gumbel-soft";
    case Fragment::beta_renorm: return "beta-renorm";
    case Fragment::gamma_renorm: return "gamma-renorm";
    case Fragment::temporal_pool: return "temporal-pool";
    case Fragment::reweight: return "reweight";
    case Fragment::projector: return "projector";
    case Fragment::full_soft_path: return "full-soft-path";
    }
    return "full-soft-path";
}

Fragment fragment_from_name(const std::string& name) {
    for (Fragment f : all_fragments())
        if (to_string(f) == name) return f;
    throw InvalidInput("gradcheck: unknown fragment '" + name + "'");
}

std::vector<Fragment> all_fragments() {
    return {Fragment::similarity_chain, Fragment::gumbel_soft, Fragment::beta_renorm,
            Fragment::gamma_renorm,     Fragment::temporal_pool, Fragment::reweight,
            Fragment::projector,        Fragment::full_soft_path};
}

namespace {

std::vector<double> gaussian_vec(SplitMix64& g, size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * g.next_gaussian();
    return v;
}

// Shared instance geometry for the attention-bearing fragments.
struct PathDims {
    size_t frames, patches, dim, n_text;
    std::vector<bool> mask;
    size_t unmasked() const {
        return size_t(std::count(mask.begin(), mask.end(), true));
    }
};

// dL/dbeta premultipliers -> gradient wrt X and text for the cosine chain.
// beta_{t,i} = mean over unmasked j of cos(x_{t,i}, text_j).
void accumulate_cosine_chain(const PathDims& pd, std::span<const double> x_flat,
                             std::span<const double> text_flat,
                             std::span<const double> dl_dbeta,
                             std::span<double> grad_x, std::span<double> grad_text) {
    size_t u = pd.unmasked();
    for (size_t t = 0; t < pd.frames; ++t) {
        for (size_t i = 0; i < pd.patches; ++i) {
            size_t base = (t * pd.patches + i) * pd.dim;
            auto x = x_flat.subspan(base, pd.dim);
            double coeff = dl_dbeta[t * pd.patches + i] / double(u);
            if (coeff == 0.0) continue;
            for (size_t j = 0; j < pd.n_text; ++j) {
                if (!pd.mask[j]) continue;
                auto tok = text_flat.subspan(j * pd.dim, pd.dim);
                std::vector<double> gx = cosine_grad(x, tok);
                std::vector<double> gt = cosine_grad_wrt_t(x, tok);
                for (size_t d = 0; d < pd.dim; ++d) {
                    grad_x[base + d] += coeff * gx[d];
                    grad_text[j * pd.dim + d] += coeff * gt[d];
                }
            }
        }
    }
}

// Forward betas/gammas from flattened inputs.
void forward_attention(const PathDims& pd, std::span<const double> x_flat,
                       std::span<const double> text_flat, std::vector<double>& beta,
                       std::vector<double>& gamma) {
    size_t u = pd.unmasked();
    beta.assign(pd.frames * pd.patches, 0.0);
    gamma.assign(pd.frames, 0.0);
    std::vector<double> text_norms(pd.n_text, 0.0);
    for (size_t j = 0; j < pd.n_text; ++j)
        if (pd.mask[j]) text_norms[j] = norm_d(text_flat.subspan(j * pd.dim, pd.dim));
    for (size_t t = 0; t < pd.frames; ++t) {
        double fsum = 0.0;
        for (size_t i = 0; i < pd.patches; ++i) {
            auto x = x_flat.subspan((t * pd.patches + i) * pd.dim, pd.dim);
            double nx = norm_d(x), acc = 0.0;
            for (size_t j = 0; j < pd.n_text; ++j) {
                if (!pd.mask[j]) continue;
                acc += cos_d(x, text_flat.subspan(j * pd.dim, pd.dim), nx, text_norms[j]);
            }
            double b = acc / double(u);
            beta[t * pd.patches + i] = b;
            fsum += b;
        }
        gamma[t] = fsum / double(pd.patches);
    }
}

Problem make_similarity_problem(uint64_t seed) {
    PathDims pd{3, 4, 5, 3, {true, true, false}};
    SplitMix64 g(derive_seed(seed, 0x51));
    size_t nx = pd.frames * pd.patches * pd.dim, nt = pd.n_text * pd.dim;
    Problem p;
    p.name = to_string(Fragment::similarity_chain);
    p.inputs = gaussian_vec(g, nx + nt);
    p.loss = [pd, nx, nt](std::span<const double> in) {
        std::vector<double> beta, gamma;
        forward_attention(pd, in.subspan(0, nx), in.subspan(nx, nt), beta, gamma);
        return std::accumulate(gamma.begin(), gamma.end(), 0.0);
    };
    p.analytic.assign(nx + nt, 0.0);
    std::vector<double> dl_dbeta(pd.frames * pd.patches, 1.0 / double(pd.patches));
    accumulate_cosine_chain(pd, std::span(p.inputs).subspan(0, nx),
                            std::span(p.inputs).subspan(nx, nt), dl_dbeta,
                            std::span(p.analytic).subspan(0, nx),
                            std::span(p.analytic).subspan(nx, nt));
    return p;
}

Problem make_softmax_sum_problem(Fragment which, size_t n, double temperature,
                                 uint64_t seed) {
    SplitMix64 g(derive_seed(seed, 0x50F + size_t(which)));
    std::vector<double> noise;
    if (which == Fragment::gumbel_soft) {
        noise.resize(n);
        for (double& v : noise) v = -std::log(-std::log(g.next_open()));
    }
    Problem p;
    p.name = to_string(which);
    p.inputs = gaussian_vec(g, n);
    double inv_tau = which == Fragment::gumbel_soft ? 1.0 / temperature : 1.0;
    p.loss = [noise, inv_tau](std::span<const double> in) {
        std::vector<double> z(in.begin(), in.end());
        for (size_t i = 0; i < z.size(); ++i) {
            z[i] *= inv_tau;
            if (!noise.empty()) z[i] += noise[i];
        }
        std::vector<double> s = vtp::softmax(z);
        return std::accumulate(s.begin(), s.end(), 0.0);
    };
    // J^T 1 scaled by the logit slope; zero in exact arithmetic, computed
    // through the chain rather than asserted, so leaks show up.
    std::vector<double> z(p.inputs);
    for (size_t i = 0; i < n; ++i) {
        z[i] *= inv_tau;
        if (!noise.empty()) z[i] += noise[i];
    }
    std::vector<double> jac = softmax_jacobian(z);
    p.analytic.assign(n, 0.0);
    for (size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) acc += jac[i * n + j];
        p.analytic[j] = acc * inv_tau;
    }
    return p;
}

Problem make_temporal_pool_problem(uint64_t seed) {
    size_t frames = 3, patches = 4, dim = 5;
    SplitMix64 g(derive_seed(seed, 0x7E0));
    Problem p;
    p.name = to_string(Fragment::temporal_pool);
    p.inputs = gaussian_vec(g, frames * patches * dim);
    p.loss = [patches](std::span<const double> in) {
        double acc = 0.0;
        for (double v : in) acc += v;
        return acc / double(patches);
    };
    p.analytic.assign(p.inputs.size(), 1.0 / double(patches));
    return p;
}

Problem make_reweight_problem(uint64_t seed) {
    size_t n = 5, dim = 4;
    SplitMix64 g(derive_seed(seed, 0x3E));
    Problem p;
    p.name = to_string(Fragment::reweight);
    p.inputs = gaussian_vec(g, n + n * dim);
    p.loss = [n, dim](std::span<const double> in) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (size_t d = 0; d < dim; ++d) row += in[n + i * dim + d];
            acc += in[i] * row;
        }
        return acc;
    };
    p.analytic.assign(p.inputs.size(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (size_t d = 0; d < dim; ++d) row += p.inputs[n + i * dim + d];
        p.analytic[i] = row;
        for (size_t d = 0; d < dim; ++d) p.analytic[n + i * dim + d] = p.inputs[i];
    }
    return p;
}

double gelu_prime(double x) {
    double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

struct MlpDims {
    std::vector<size_t> out_dim, in_dim;
    size_t token_count = 0;
    size_t weight_offset = 0; // start of weight block in the input vector
};

// Layout: [tokens | W1 row-major, b1, W2, b2, ...] when weights included.
double mlp_loss(const MlpDims& md, std::span<const double> in, bool weights_in_inputs,
                const std::vector<std::vector<double>>& fixed_w,
                const std::vector<std::vector<double>>& fixed_b) {
    size_t layers = md.out_dim.size();
    double total = 0.0;
    for (size_t tok = 0; tok < md.token_count; ++tok) {
        std::vector<double> h(in.begin() + std::ptrdiff_t(tok * md.in_dim[0]),
                              in.begin() + std::ptrdiff_t((tok + 1) * md.in_dim[0]));
        size_t cursor = md.weight_offset;
        for (size_t l = 0; l < layers; ++l) {
            size_t rows = md.out_dim[l], cols = md.in_dim[l];
            std::vector<double> next(rows);
            for (size_t r = 0; r < rows; ++r) {
                double acc = weights_in_inputs ? in[cursor + rows * cols + r]
                                               : fixed_b[l][r];
                for (size_t c = 0; c < cols; ++c) {
                    double w = weights_in_inputs ? in[cursor + r * cols + c]
                                                 : fixed_w[l][r * cols + c];
                    acc += w * h[c];
                }
                next[r] = (l + 1 < layers) ? gelu(acc) : acc;
            }
            cursor += rows * cols + rows;
            h.swap(next);
        }
        for (double v : h) total += v;
    }
    return total;
}

} // namespace

Problem make_projector_problem(const ProjectorWeights& weights,
                               std::vector<double> tokens, size_t token_count,
                               bool include_weight_grads) {
    weights.validate();
    size_t layers = weights.layers.size();
    MlpDims md;
    md.token_count = token_count;
    for (const auto& layer : weights.layers) {
        md.out_dim.push_back(layer.weight.dim(0));
        md.in_dim.push_back(layer.weight.dim(1));
    }
    if (tokens.size() != token_count * md.in_dim[0])
        throw InvalidInput("projector problem: token buffer size mismatch");

    std::vector<std::vector<double>> fixed_w(layers), fixed_b(layers);
    for (size_t l = 0; l < layers; ++l) {
        const auto& layer = weights.layers[l];
        fixed_w[l].assign(layer.weight.data().begin(), layer.weight.data().end());
        fixed_b[l].assign(layer.bias.begin(), layer.bias.end());
    }

    Problem p;
    p.name = to_string(Fragment::projector);
    p.inputs = std::move(tokens);
    md.weight_offset = p.inputs.size();
    if (include_weight_grads) {
        for (size_t l = 0; l < layers; ++l) {
            p.inputs.insert(p.inputs.end(), fixed_w[l].begin(), fixed_w[l].end());
            p.inputs.insert(p.inputs.end(), fixed_b[l].begin(), fixed_b[l].end());
        }
    }
    p.loss = [md, include_weight_grads, fixed_w, fixed_b](std::span<const double> in) {
        return mlp_loss(md, in, include_weight_grads, fixed_w, fixed_b);
    };

    // Backprop with output seed 1, per token; weight grads accumulate.
    p.analytic.assign(p.inputs.size(), 0.0);
    for (size_t tok = 0; tok < token_count; ++tok) {
        std::vector<std::vector<double>> pre(layers), act(layers + 1);
        act[0].assign(p.inputs.begin() + std::ptrdiff_t(tok * md.in_dim[0]),
                      p.inputs.begin() + std::ptrdiff_t((tok + 1) * md.in_dim[0]));
        for (size_t l = 0; l < layers; ++l) {
            size_t rows = md.out_dim[l], cols = md.in_dim[l];
            pre[l].assign(rows, 0.0);
            act[l + 1].assign(rows, 0.0);
            for (size_t r = 0; r < rows; ++r) {
                double acc = fixed_b[l][r];
                for (size_t c = 0; c < cols; ++c)
                    acc += fixed_w[l][r * cols + c] * act[l][c];
                pre[l][r] = acc;
                act[l + 1][r] = (l + 1 < layers) ? gelu(acc) : acc;
            }
        }
        std::vector<double> delta(md.out_dim[layers - 1], 1.0);
        for (size_t li = layers; li-- > 0;) {
            size_t rows = md.out_dim[li], cols = md.in_dim[li];
            if (li + 1 < layers) // delta currently wrt act[li+1]; fold in GELU'
                for (size_t r = 0; r < rows; ++r) delta[r] *= gelu_prime(pre[li][r]);
            if (include_weight_grads) {
                size_t cursor = md.weight_offset;
                for (size_t l2 = 0; l2 < li; ++l2)
                    cursor += md.out_dim[l2] * md.in_dim[l2] + md.out_dim[l2];
                for (size_t r = 0; r < rows; ++r) {
                    for (size_t c = 0; c < cols; ++c)
                        p.analytic[cursor + r * cols + c] += delta[r] * act[li][c];
                    p.analytic[cursor + rows * cols + r] += delta[r];
                }
            }
            std::vector<double> prev(cols, 0.0);
            for (size_t c = 0; c < cols; ++c)
                for (size_t r = 0; r < rows; ++r)
                    prev[c] += fixed_w[li][r * cols + c] * delta[r];
            delta.swap(prev);
        }
        for (size_t c = 0; c < md.in_dim[0]; ++c)
            p.analytic[tok * md.in_dim[0] + c] += delta[c];
    }
    return p;
}

namespace {

Problem make_projector_fragment(uint64_t seed) {
    ProjectorWeights w = ProjectorWeights::random({4, 6, 3}, derive_seed(seed, 0xF1));
    SplitMix64 g(derive_seed(seed, 0xF2));
    Problem p = make_projector_problem(w, gaussian_vec(g, 3 * 4), 3, true);
    return p;
}

} // namespace

Problem make_full_path_problem(uint64_t seed, FullPathInstance* instance_out) {
    PathDims pd{3, 4, 5, 3, {true, true, false}};
    size_t k = 2, grid = 2;
    double tau = 0.35;
    SplitMix64 g(derive_seed(seed, 0xF11));
    size_t nx = pd.frames * pd.patches * pd.dim, nt = pd.n_text * pd.dim;

    Problem p;
    p.name = to_string(Fragment::full_soft_path);
    p.inputs = gaussian_vec(g, nx + nt);

    std::vector<double> sep_grid = gaussian_vec(g, pd.dim, 1.0 / std::sqrt(double(pd.dim)));
    std::vector<double> sep_frame = gaussian_vec(g, pd.dim, 1.0 / std::sqrt(double(pd.dim)));
    std::vector<double> noise(pd.frames);
    for (double& v : noise) v = -std::log(-std::log(g.next_open()));

    // Hard top-k at the base point; frozen during differentiation
    // (piecewise-constant in a neighborhood of the base inputs).
    std::vector<double> beta0, gamma0;
    forward_attention(pd, std::span(p.inputs).subspan(0, nx),
                      std::span(p.inputs).subspan(nx, nt), beta0, gamma0);
    std::vector<double> logits(pd.frames);
    for (size_t t = 0; t < pd.frames; ++t) logits[t] = gamma0[t] / tau + noise[t];
    std::vector<size_t> order(pd.frames);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return logits[a] > logits[b]; });
    std::vector<size_t> selected(order.begin(), order.begin() + std::ptrdiff_t(k));
    std::sort(selected.begin(), selected.end());

    double sep_const = 0.0;
    for (double v : sep_grid) sep_const += double(k) * double(grid) * v;
    for (double v : sep_frame) sep_const += double(pd.frames - 1) * v;

    p.loss = [pd, selected, sep_const](std::span<const double> in) {
        size_t nx2 = pd.frames * pd.patches * pd.dim;
        auto x = in.subspan(0, nx2);
        auto text = in.subspan(nx2, pd.n_text * pd.dim);
        std::vector<double> beta, gamma;
        forward_attention(pd, x, text, beta, gamma);

        std::vector<double> sel_scores;
        for (size_t t : selected)
            for (size_t i = 0; i < pd.patches; ++i)
                sel_scores.push_back(beta[t * pd.patches + i]);
        std::vector<double> beta_renorm = vtp::softmax(sel_scores);
        double total = sep_const;
        size_t flat = 0;
        for (size_t t : selected) {
            for (size_t i = 0; i < pd.patches; ++i) {
                double row = 0.0;
                for (size_t d = 0; d < pd.dim; ++d)
                    row += x[(t * pd.patches + i) * pd.dim + d];
                total += beta_renorm[flat++] * row;
            }
        }
        std::vector<double> gamma_renorm = vtp::softmax(gamma);
        for (size_t t = 0; t < pd.frames; ++t) {
            double frame_sum = 0.0;
            for (size_t i = 0; i < pd.patches; ++i)
                for (size_t d = 0; d < pd.dim; ++d)
                    frame_sum += x[(t * pd.patches + i) * pd.dim + d];
            total += gamma_renorm[t] * frame_sum / double(pd.patches);
        }
        return total;
    };

    // Analytic gradient. With a_{t,i} the coordinate sum of patch (t,i):
    //   L = sum_S beta~ a  +  sum_t gamma~ F_t  +  const,   F_t = mean_i a_{t,i}
    //   dL/dbeta_{t,i} = [S] beta~ (a - Abar) + gamma~_t (F_t - Fbar) / N_V
    //   dL/dx direct   = [S] beta~ + gamma~_t / N_V
    // and the beta-gradient flows through the cosine chain.
    std::vector<double> beta = beta0, gamma = gamma0;
    std::vector<double> sel_scores;
    for (size_t t : selected)
        for (size_t i = 0; i < pd.patches; ++i)
            sel_scores.push_back(beta[t * pd.patches + i]);
    std::vector<double> beta_renorm = vtp::softmax(sel_scores);
    std::vector<double> gamma_renorm = vtp::softmax(gamma);

    auto x_base = std::span(p.inputs).subspan(0, nx);
    std::vector<double> a(pd.frames * pd.patches, 0.0);
    for (size_t t = 0; t < pd.frames; ++t)
        for (size_t i = 0; i < pd.patches; ++i)
            for (size_t d = 0; d < pd.dim; ++d)
                a[t * pd.patches + i] += x_base[(t * pd.patches + i) * pd.dim + d];

    double a_bar = 0.0;
    {
        size_t flat = 0;
        for (size_t t : selected)
            for (size_t i = 0; i < pd.patches; ++i)
                a_bar += beta_renorm[flat++] * a[t * pd.patches + i];
    }
    std::vector<double> frame_mean(pd.frames, 0.0);
    for (size_t t = 0; t < pd.frames; ++t) {
        for (size_t i = 0; i < pd.patches; ++i) frame_mean[t] += a[t * pd.patches + i];
        frame_mean[t] /= double(pd.patches);
    }
    double f_bar = 0.0;
    for (size_t t = 0; t < pd.frames; ++t) f_bar += gamma_renorm[t] * frame_mean[t];

    std::vector<double> dl_dbeta(pd.frames * pd.patches, 0.0);
    std::vector<double> direct_coeff(pd.frames * pd.patches, 0.0);
    {
        size_t flat = 0;
        for (size_t t : selected) {
            for (size_t i = 0; i < pd.patches; ++i) {
                double w = beta_renorm[flat++];
                dl_dbeta[t * pd.patches + i] += w * (a[t * pd.patches + i] - a_bar);
                direct_coeff[t * pd.patches + i] += w;
            }
        }
        for (size_t t = 0; t < pd.frames; ++t) {
            double gg = gamma_renorm[t] * (frame_mean[t] - f_bar) / double(pd.patches);
            for (size_t i = 0; i < pd.patches; ++i) {
                dl_dbeta[t * pd.patches + i] += gg;
                direct_coeff[t * pd.patches + i] += gamma_renorm[t] / double(pd.patches);
            }
        }
    }

    p.analytic.assign(nx + nt, 0.0);
    for (size_t t = 0; t < pd.frames; ++t)
        for (size_t i = 0; i < pd.patches; ++i)
            for (size_t d = 0; d < pd.dim; ++d)
                p.analytic[(t * pd.patches + i) * pd.dim + d] =
                    direct_coeff[t * pd.patches + i];
    accumulate_cosine_chain(pd, x_base, std::span(p.inputs).subspan(nx, nt), dl_dbeta,
                            std::span(p.analytic).subspan(0, nx),
                            std::span(p.analytic).subspan(nx, nt));
    if (instance_out) {
        instance_out->frames = pd.frames;
        instance_out->patches = pd.patches;
        instance_out->dim = pd.dim;
        instance_out->n_text = pd.n_text;
        instance_out->mask = pd.mask;
        instance_out->temperature = tau;
        instance_out->top_k = k;
        instance_out->sep_grid = sep_grid;
        instance_out->sep_frame = sep_frame;
        instance_out->noise = noise;
        instance_out->selected = selected;
    }
    return p;
}

Problem make_problem(Fragment f, uint64_t seed) {
    switch (f) {
    case Fragment::similarity_chain: return make_similarity_problem(seed);
    case Fragment::gumbel_soft:
        return make_softmax_sum_problem(Fragment::gumbel_soft, 6, 0.4, seed);
    case Fragment::beta_renorm:
        return make_softmax_sum_problem(Fragment::beta_renorm, 8, 1.0, seed);
    case Fragment::gamma_renorm:
        return make_softmax_sum_problem(Fragment::gamma_renorm, 6, 1.0, seed);
    case Fragment::temporal_pool: return make_temporal_pool_problem(seed);
    case Fragment::reweight: return make_reweight_problem(seed);
    case Fragment::projector: return make_projector_fragment(seed);
    case Fragment::full_soft_path: return make_full_path_problem(seed);
    }
    throw InvalidInput("gradcheck: unknown fragment");
}

DiffReport run_check(const Problem& problem, size_t probes, double eps,
                     double tolerance, uint64_t seed, double abs_floor) {
    if (probes == 0) throw InvalidInput("gradcheck: probe count must be positive");
    if (!(eps > 0.0)) throw InvalidInput("gradcheck: eps must be positive");

    std::vector<size_t> coords(problem.inputs.size());
    std::iota(coords.begin(), coords.end(), 0);
    SplitMix64 g(derive_seed(seed, 0xFD));
    for (size_t i = coords.size(); i > 1; --i)
        std::swap(coords[i - 1], coords[g.next_below(i)]);
    size_t n_probe = std::min(probes, coords.size());

    DiffReport report;
    report.op = problem.name;
    report.probes = n_probe;
    report.eps = eps;
    report.tolerance = tolerance;
    report.abs_floor = abs_floor;

    std::vector<double> work(problem.inputs);
    for (size_t p = 0; p < n_probe; ++p) {
        size_t c = coords[p];
        double saved = work[c];
        work[c] = saved + eps;
        double up = problem.loss(work);
        work[c] = saved - eps;
        double down = problem.loss(work);
        work[c] = saved;
        double fd = (up - down) / (2.0 * eps);
        double an = problem.analytic[c];
        double abs_err = std::fabs(fd - an);
        double rel = abs_err <= abs_floor
                         ? 0.0
                         : abs_err / std::max(std::fabs(an), std::fabs(fd));
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.pass = report.max_rel_error <= tolerance || report.max_abs_error <= abs_floor;
    return report;
}

DiffReport check_path(Fragment f, size_t probes, double eps, double tolerance,
                      uint64_t seed) {
    return run_check(make_problem(f, seed), probes, eps, tolerance, seed);
}

} // namespace vtp::gradcheck
