#include "npmd/losses.hpp"

#include <cmath>
#include <string>

#include "npmd/parallel.hpp"

namespace npmd {

void LossConfig::validate() const {
    if (alpha < 0.0) throw ConfigError("LossConfig: alpha must be >= 0");
    if (ce_weight < 0.0 || triplet_weight < 0.0)
        throw ConfigError("LossConfig: loss weights must be >= 0");
}

namespace {

// d||q - r|| / dq scaled by `scale`, accumulated into d_query; the opposite
// sign goes to the representative. Zero distance contributes no gradient.
void add_distance_grad(std::span<const double> q, std::span<const double> r, double dist,
                       double scale, Vec& d_query, Vec& d_rep) {
    if (dist <= 0.0) return;
    const double s = scale / dist;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double diff = q[i] - r[i];
        d_query[i] += s * diff;
        d_rep[i] -= s * diff;
    }
}

struct ArgMin {
    double d = 0.0;
    int cls = -1;
    int j = -1;
};

ArgMin scan_rows(const RepBank& bank, std::span<const double> q, int cls, bool pos_side) {
    ArgMin best;
    const auto& cr = bank.classes[static_cast<std::size_t>(cls)];
    const int count = pos_side ? cr.pos_count : cr.neg_count;
    for (int j = 0; j < count; ++j) {
        const double d = euclidean(q, pos_side ? bank.pos_row(cls, j) : bank.neg_row(cls, j));
        if (best.j < 0 || d < best.d) best = {d, cls, j};
    }
    return best;
}

// Shared body of the two triplet losses. `primary` is the side the query
// embedding belongs to (positive bank for e_pos, negative bank for e_neg);
// triplet_neg is this function with the roles flipped, which makes the
// mirror symmetry between the two losses exact.
TripletResult triplet_core(std::span<const double> q, const RepBank& bank, int true_class,
                           bool primary_is_pos, double alpha) {
    if (bank.n_classes < 2)
        throw ConfigError("triplet loss: needs at least 2 classes for the cross-class term");
    if (true_class < 0 || true_class >= bank.n_classes)
        throw ConfigError("triplet loss: class out of range");

    const ArgMin same_primary = scan_rows(bank, q, true_class, primary_is_pos);
    const ArgMin same_secondary = scan_rows(bank, q, true_class, !primary_is_pos);

    ArgMin cross;
    for (int c = 0; c < bank.n_classes; ++c) {
        if (c == true_class) continue;
        const ArgMin m = scan_rows(bank, q, c, primary_is_pos);
        if (m.j < 0) continue;
        if (cross.j < 0 || m.d < cross.d) cross = m;
    }
    if (same_primary.j < 0 || same_secondary.j < 0 || cross.j < 0)
        throw ConfigError("triplet loss: a required representative set is empty");

    TripletResult out;
    out.d_query.assign(q.size(), 0.0);
    const double arg = same_primary.d - 0.5 * (same_secondary.d + cross.d) + alpha;
    if (arg <= 0.0) return out;  // flat region of the hinge, zero gradient
    out.loss = arg;

    auto row = [&](const ArgMin& m, bool pos_side) {
        return pos_side ? bank.pos_row(m.cls, m.j) : bank.neg_row(m.cls, m.j);
    };
    auto push = [&](const ArgMin& m, bool pos_side, double scale) {
        RepGrad rg{m.cls, pos_side, m.j, Vec(q.size(), 0.0)};
        add_distance_grad(q, row(m, pos_side), m.d, scale, out.d_query, rg.g);
        out.rep_grads.push_back(std::move(rg));
    };
    push(same_primary, primary_is_pos, 1.0);
    push(same_secondary, !primary_is_pos, -0.5);
    push(cross, primary_is_pos, -0.5);
    return out;
}

}  // namespace

TripletResult triplet_pos(const NPEmbedding& emb, const RepBank& bank, int true_class,
                          double alpha) {
    return triplet_core(emb.e_pos, bank, true_class, true, alpha);
}

TripletResult triplet_neg(const NPEmbedding& emb, const RepBank& bank, int true_class,
                          double alpha) {
    return triplet_core(emb.e_neg, bank, true_class, false, alpha);
}

CrossEntropyResult cross_entropy(const std::vector<double>& posterior, int target) {
    if (target < 0 || target >= static_cast<int>(posterior.size()))
        throw ConfigError("cross_entropy: target out of range");
    CrossEntropyResult out;
    out.loss = -std::log(posterior[static_cast<std::size_t>(target)]);
    return out;
}

namespace {

// Per-item loss and gradients; combined with the configured weights so the
// reduction only has to scale by 1/n.
struct ItemResult {
    bool contributing = false;
    double triplet = 0.0;
    double ce = 0.0;
    EmbGrad emb_grad;
    std::vector<RepGrad> rep_grads;
};

ItemResult eval_item(const LabeledEmbedding& item, const RepBank& bank, const LossConfig& loss_cfg,
                     const ProbConfig& prob_cfg) {
    ItemResult r;
    r.emb_grad.d_e_pos.assign(item.emb.e_pos.size(), 0.0);
    r.emb_grad.d_e_neg.assign(item.emb.e_neg.size(), 0.0);
    if (item.label.kind == ProposalLabel::Kind::Ignored) return r;
    r.contributing = true;

    const bool is_pos = item.label.kind == ProposalLabel::Kind::Positive;
    const int cls = item.label.class_id;

    // Triplet term.
    TripletResult trip = is_pos ? triplet_pos(item.emb, bank, cls, loss_cfg.alpha)
                                : triplet_neg(item.emb, bank, cls, loss_cfg.alpha);
    r.triplet = trip.loss;
    Vec& d_query = is_pos ? r.emb_grad.d_e_pos : r.emb_grad.d_e_neg;
    axpy(loss_cfg.triplet_weight, trip.d_query, d_query);
    for (auto& rg : trip.rep_grads) {
        for (auto& v : rg.g) v *= loss_cfg.triplet_weight;
        r.rep_grads.push_back(std::move(rg));
    }

    // Cross entropy through Eq-(3) probabilities and the normalized
    // posterior. Gradient reaches the argmin representative of every class.
    const ClassDistances dists = min_distances(bank, item.emb);
    const std::vector<double> p = class_probability(dists, prob_cfg);
    const std::vector<double> q = class_posterior(p, prob_cfg);
    const int target = is_pos ? cls : bank.n_classes;  // negatives score as background
    r.ce = -std::log(q[static_cast<std::size_t>(target)]);

    double denom = prob_cfg.background_score;
    for (double v : p) denom += v;
    const double inv_two_sigma_sq = 1.0 / (2.0 * prob_cfg.sigma * prob_cfg.sigma);

    for (int k = 0; k < bank.n_classes; ++k) {
        const std::size_t uk = static_cast<std::size_t>(k);
        double dL_dp = 1.0 / denom;
        if (is_pos && k == cls) dL_dp -= 1.0 / p[uk];
        // dp/dd_pos = -p * inv, dp/dd_neg = +beta * p * inv
        const double dL_dd_pos = dL_dp * (-p[uk] * inv_two_sigma_sq) * loss_cfg.ce_weight;
        const double dL_dd_neg = dL_dp * (prob_cfg.beta * p[uk] * inv_two_sigma_sq) * loss_cfg.ce_weight;

        if (dL_dd_pos != 0.0 && dists.d_pos[uk] > 0.0) {
            RepGrad rg{k, true, dists.arg_pos[uk], Vec(item.emb.e_pos.size(), 0.0)};
            add_distance_grad(item.emb.e_pos, bank.pos_row(k, rg.j), dists.d_pos[uk], dL_dd_pos,
                              r.emb_grad.d_e_pos, rg.g);
            r.rep_grads.push_back(std::move(rg));
        }
        if (dists.arg_neg[uk] >= 0 && dL_dd_neg != 0.0 && dists.d_neg[uk] > 0.0) {
            RepGrad rg{k, false, dists.arg_neg[uk], Vec(item.emb.e_neg.size(), 0.0)};
            add_distance_grad(item.emb.e_neg, bank.neg_row(k, rg.j), dists.d_neg[uk], dL_dd_neg,
                              r.emb_grad.d_e_neg, rg.g);
            r.rep_grads.push_back(std::move(rg));
        }
    }
    return r;
}

BatchLossResult reduce_items(std::span<const LabeledEmbedding> batch,
                             std::vector<ItemResult>& items, const RepBank& bank,
                             const LossConfig& loss_cfg) {
    BatchLossResult out;
    out.bank_grads = zeros_like(bank);
    out.emb_grads.resize(batch.size());

    int n = 0;
    for (const auto& item : items)
        if (item.contributing) ++n;
    if (n == 0) throw ConfigError("batch_loss: no contributing (Positive/Negative) proposals");
    out.contributing = n;
    const double inv_n = 1.0 / static_cast<double>(n);

    double triplet_sum = 0.0, ce_sum = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        ItemResult& item = items[i];
        out.emb_grads[i].d_e_pos.assign(batch[i].emb.e_pos.size(), 0.0);
        out.emb_grads[i].d_e_neg.assign(batch[i].emb.e_neg.size(), 0.0);
        if (!item.contributing) continue;
        triplet_sum += item.triplet;
        ce_sum += item.ce;
        axpy(inv_n, item.emb_grad.d_e_pos, out.emb_grads[i].d_e_pos);
        axpy(inv_n, item.emb_grad.d_e_neg, out.emb_grads[i].d_e_neg);
        for (const auto& rg : item.rep_grads) {
            auto dst = rg.pos_side ? out.bank_grads.pos_row(rg.cls, rg.j)
                                   : out.bank_grads.neg_row(rg.cls, rg.j);
            for (std::size_t d = 0; d < rg.g.size(); ++d) dst[d] += inv_n * rg.g[d];
        }
    }
    out.breakdown.triplet = triplet_sum * inv_n;
    out.breakdown.cross_entropy = ce_sum * inv_n;
    out.breakdown.total = loss_cfg.ce_weight * out.breakdown.cross_entropy +
                          loss_cfg.triplet_weight * out.breakdown.triplet;
    return out;
}

}  // namespace

BatchLossResult batch_loss(std::span<const LabeledEmbedding> batch, const RepBank& bank,
                           const LossConfig& loss_cfg, const ProbConfig& prob_cfg) {
    loss_cfg.validate();
    std::vector<ItemResult> items(batch.size());
    parallel_for(batch.size(),
                 [&](std::size_t i) { items[i] = eval_item(batch[i], bank, loss_cfg, prob_cfg); });
    return reduce_items(batch, items, bank, loss_cfg);
}

BatchLossResult batch_loss_serial(std::span<const LabeledEmbedding> batch, const RepBank& bank,
                                  const LossConfig& loss_cfg, const ProbConfig& prob_cfg) {
    loss_cfg.validate();
    std::vector<ItemResult> items(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        items[i] = eval_item(batch[i], bank, loss_cfg, prob_cfg);
    return reduce_items(batch, items, bank, loss_cfg);
}

}  // namespace npmd
