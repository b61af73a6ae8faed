#include "npmd/embed_net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "npmd/parallel.hpp"
#include "npmd/rng.hpp"

namespace npmd {

void EmbedConfig::validate() const {
    if (input_dim < 1) throw ConfigError("EmbedConfig: input_dim must be >= 1");
    if (embed_dim < 1) throw ConfigError("EmbedConfig: embed_dim must be >= 1");
    for (int d : trunk_dims)
        if (d < 1) throw ConfigError("EmbedConfig: trunk dims must be >= 1");
}

namespace {

DenseLayer init_layer(int in, int out, Rng& rng) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    layer.w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    for (auto& v : layer.w) v = uni(rng);
    layer.b.assign(static_cast<std::size_t>(out), 0.0);
    return layer;
}

// y = W x + b
void affine(const DenseLayer& l, std::span<const double> x, Vec& y) {
    y.assign(static_cast<std::size_t>(l.out), 0.0);
    for (int r = 0; r < l.out; ++r) {
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in);
        double s = l.b[static_cast<std::size_t>(r)];
        for (int c = 0; c < l.in; ++c) s += wr[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = s;
    }
}

// Accumulates dW += dy x^T, db += dy and dx += W^T dy.
void affine_backward(const DenseLayer& l, std::span<const double> x, std::span<const double> dy,
                     DenseLayer& grad, Vec* dx) {
    for (int r = 0; r < l.out; ++r) {
        const double g = dy[static_cast<std::size_t>(r)];
        if (g == 0.0) continue;
        double* gw = grad.w.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in);
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in);
        for (int c = 0; c < l.in; ++c) gw[c] += g * x[static_cast<std::size_t>(c)];
        grad.b[static_cast<std::size_t>(r)] += g;
        if (dx)
            for (int c = 0; c < l.in; ++c) (*dx)[static_cast<std::size_t>(c)] += g * wr[c];
    }
}

// d(v/||v||) pullback: du = (g - (g.e) e) / ||v||; zero for the degenerate branch.
Vec normalize_backward(std::span<const double> g, const Vec& e, double norm) {
    Vec du(e.size(), 0.0);
    if (norm == 0.0) return du;
    const double ge = dot(g, e);
    for (std::size_t i = 0; i < e.size(); ++i) du[i] = (g[i] - ge * e[i]) / norm;
    return du;
}

}  // namespace

NetParams init_params(const EmbedConfig& config, std::uint64_t seed) {
    config.validate();
    NetParams p;
    p.config = config;
    Rng rng = make_rng(seed);
    int in = config.input_dim;
    for (int d : config.trunk_dims) {
        p.layers.push_back(init_layer(in, d, rng));
        in = d;
    }
    for (int h = 0; h < p.n_heads(); ++h) p.layers.push_back(init_layer(in, config.embed_dim, rng));
    return p;
}

NetParams zeros_like(const NetParams& params) {
    NetParams g = params;
    for (auto& l : g.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    return g;
}

NPEmbedding forward(const NetParams& params, std::span<const double> raw_feature,
                    ForwardCache* cache) {
    if (static_cast<int>(raw_feature.size()) != params.config.input_dim)
        throw ConfigError("forward: feature length " + std::to_string(raw_feature.size()) +
                          " != input_dim " + std::to_string(params.config.input_dim));

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.input.assign(raw_feature.begin(), raw_feature.end());
    c.trunk_pre.clear();
    c.trunk_act.clear();

    const int trunk = params.trunk_count();
    std::span<const double> h = raw_feature;
    for (int l = 0; l < trunk; ++l) {
        Vec pre;
        affine(params.layers[static_cast<std::size_t>(l)], h, pre);
        Vec act = pre;
        for (auto& v : act) v = v > 0.0 ? v : 0.0;
        c.trunk_pre.push_back(std::move(pre));
        c.trunk_act.push_back(std::move(act));
        h = c.trunk_act.back();
    }

    affine(params.pos_head(), h, c.head_pre_pos);
    c.out.e_pos = c.head_pre_pos;
    c.norm_pos = normalize_unit(c.out.e_pos);

    if (params.config.single_embedding) {
        c.head_pre_neg = c.head_pre_pos;
        c.norm_neg = c.norm_pos;
        c.out.e_neg = c.out.e_pos;
    } else {
        affine(params.neg_head(), h, c.head_pre_neg);
        c.out.e_neg = c.head_pre_neg;
        c.norm_neg = normalize_unit(c.out.e_neg);
    }
    return c.out;
}

void backward(const NetParams& params, const ForwardCache& cache, std::span<const double> d_e_pos,
              std::span<const double> d_e_neg, NetParams& grads, Vec* d_input) {
    if (grads.layers.size() != params.layers.size())
        throw ConfigError("backward: gradient holder shape mismatch");
    if (cache.input.size() != static_cast<std::size_t>(params.config.input_dim))
        throw ConfigError("backward: cache does not match params");

    const int trunk = params.trunk_count();
    std::span<const double> top =
        trunk > 0 ? std::span<const double>(cache.trunk_act.back()) : std::span<const double>(cache.input);

    Vec d_top(top.size(), 0.0);

    const Vec du_pos = normalize_backward(d_e_pos, cache.out.e_pos, cache.norm_pos);
    const Vec du_neg = normalize_backward(d_e_neg, cache.out.e_neg, cache.norm_neg);

    const std::size_t pos_idx = static_cast<std::size_t>(trunk);
    if (params.config.single_embedding) {
        Vec du(du_pos.size());
        for (std::size_t i = 0; i < du.size(); ++i) du[i] = du_pos[i] + du_neg[i];
        affine_backward(params.layers[pos_idx], top, du, grads.layers[pos_idx], &d_top);
    } else {
        affine_backward(params.layers[pos_idx], top, du_pos, grads.layers[pos_idx], &d_top);
        affine_backward(params.layers[pos_idx + 1], top, du_neg, grads.layers[pos_idx + 1], &d_top);
    }

    Vec d_h = std::move(d_top);
    for (int l = trunk - 1; l >= 0; --l) {
        const Vec& pre = cache.trunk_pre[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < d_h.size(); ++i)
            if (pre[i] <= 0.0) d_h[i] = 0.0;  // subgradient 0 at the kink
        std::span<const double> below =
            l > 0 ? std::span<const double>(cache.trunk_act[static_cast<std::size_t>(l - 1)])
                  : std::span<const double>(cache.input);
        Vec d_below(below.size(), 0.0);
        affine_backward(params.layers[static_cast<std::size_t>(l)], below, d_h,
                        grads.layers[static_cast<std::size_t>(l)], &d_below);
        d_h = std::move(d_below);
    }
    if (d_input)
        for (std::size_t i = 0; i < d_h.size(); ++i) (*d_input)[i] += d_h[i];
}

std::vector<NPEmbedding> forward_batch(const NetParams& params, const std::vector<Vec>& features,
                                       std::vector<ForwardCache>* caches) {
    std::vector<NPEmbedding> out(features.size());
    if (caches) caches->resize(features.size());
    parallel_for(features.size(), [&](std::size_t i) {
        out[i] = forward(params, features[i], caches ? &(*caches)[i] : nullptr);
    });
    return out;
}

std::vector<NPEmbedding> forward_batch_serial(const NetParams& params,
                                              const std::vector<Vec>& features,
                                              std::vector<ForwardCache>* caches) {
    std::vector<NPEmbedding> out(features.size());
    if (caches) caches->resize(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        out[i] = forward(params, features[i], caches ? &(*caches)[i] : nullptr);
    return out;
}

}  // namespace npmd
