#ifndef PETSEG_NET_LOSS_HPP
#define PETSEG_NET_LOSS_HPP

#include "petseg/net/network.hpp"

namespace petseg::net {

inline void check_target(const LabelBatch& target, std::int64_t classes,
                         const std::array<std::int64_t, 5>& probs_shape) {
    if (target.shape[0] != probs_shape[0] || target.shape[1] != probs_shape[2] ||
        target.shape[2] != probs_shape[3] || target.shape[3] != probs_shape[4])
        throw ShapeError("target shape does not match predictions");
    for (auto v : target.values)
        if (v >= classes)
            throw ValidationError("target contains a class id >= num_classes");
}

// loss = mix * L_dice + (1 - mix) * L_wce with
//   L_dice = 1 - mean over foreground classes of (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)
//   L_wce  = -mean over voxels of w[g] * log p[g]
// Sums run over the whole batch.
template <typename T>
double dice_ce_loss(const Tensor<T>& probs, const LabelBatch& target, const LossSpec& spec) {
    const std::int64_t N = probs.shape[0], C = probs.shape[1], M = probs.spatial();
    spec.validate(int(C));
    check_target(target, C, probs.shape);

    const double eps = spec.dice_epsilon;
    std::vector<double> sum_pg(std::size_t(C), 0.0), sum_p(std::size_t(C), 0.0),
        sum_g(std::size_t(C), 0.0);
    double ce = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
        const std::uint8_t* tgt = target.sample(n);
        for (std::int64_t c = 0; c < C; ++c) {
            const T* p = probs.plane(n, c);
            double sp = 0.0, spg = 0.0, sg = 0.0;
            for (std::int64_t v = 0; v < M; ++v) {
                const double pv = double(p[v]);
                sp += pv;
                if (tgt[v] == c) {
                    spg += pv;
                    sg += 1.0;
                }
            }
            sum_p[std::size_t(c)] += sp;
            sum_pg[std::size_t(c)] += spg;
            sum_g[std::size_t(c)] += sg;
        }
        for (std::int64_t v = 0; v < M; ++v) {
            const int g = tgt[v];
            const double pg = std::max(double(probs.plane(n, g)[v]), 1e-300);
            ce -= spec.weight(g) * std::log(pg);
        }
    }

    double dice_sum = 0.0;
    for (std::int64_t c = 1; c < C; ++c)
        dice_sum += (2.0 * sum_pg[std::size_t(c)] + eps) /
                    (sum_p[std::size_t(c)] + sum_g[std::size_t(c)] + eps);
    const double l_dice = 1.0 - dice_sum / double(C - 1);
    const double l_wce = ce / double(N * M);
    return spec.dice_ce_mix * l_dice + (1.0 - spec.dice_ce_mix) * l_wce;
}

// Gradient of dice_ce_loss w.r.t. the logits, given softmax probabilities.
template <typename T>
void loss_backward_logits(const Tensor<T>& probs, const LabelBatch& target, const LossSpec& spec,
                          Tensor<T>& grad_logits) {
    const std::int64_t N = probs.shape[0], C = probs.shape[1], M = probs.spatial();
    spec.validate(int(C));
    check_target(target, C, probs.shape);
    grad_logits.resize(N, C, probs.shape[2], probs.shape[3], probs.shape[4]);

    const double eps = spec.dice_epsilon;
    const double lambda = spec.dice_ce_mix;
    const double inv_voxels = 1.0 / double(N * M);

    // batch sums per class for the dice term
    std::vector<double> sum_pg(std::size_t(C), 0.0), sum_p(std::size_t(C), 0.0),
        sum_g(std::size_t(C), 0.0);
    for (std::int64_t n = 0; n < N; ++n) {
        const std::uint8_t* tgt = target.sample(n);
        for (std::int64_t c = 0; c < C; ++c) {
            const T* p = probs.plane(n, c);
            double sp = 0.0, spg = 0.0, sg = 0.0;
            for (std::int64_t v = 0; v < M; ++v) {
                const double pv = double(p[v]);
                sp += pv;
                if (tgt[v] == c) {
                    spg += pv;
                    sg += 1.0;
                }
            }
            sum_p[std::size_t(c)] += sp;
            sum_pg[std::size_t(c)] += spg;
            sum_g[std::size_t(c)] += sg;
        }
    }

    // dL_dice/dp for foreground c depends only on whether g matches c:
    //   d/dp [ -(1/|F|) * (2*sum_pg + eps) / (sum_p + sum_g + eps) ]
    std::vector<double> coef_match(std::size_t(C), 0.0), coef_other(std::size_t(C), 0.0);
    const double inv_fg = 1.0 / double(C - 1);
    for (std::int64_t c = 1; c < C; ++c) {
        const double numer = 2.0 * sum_pg[std::size_t(c)] + eps;
        const double denom = sum_p[std::size_t(c)] + sum_g[std::size_t(c)] + eps;
        coef_match[std::size_t(c)] = -inv_fg * (2.0 * denom - numer) / (denom * denom) * lambda;
        coef_other[std::size_t(c)] = -inv_fg * (-numer) / (denom * denom) * lambda;
    }

    std::vector<double> dldp(static_cast<std::size_t>(C), 0.0);
    for (std::int64_t n = 0; n < N; ++n) {
        const std::uint8_t* tgt = target.sample(n);
        for (std::int64_t v = 0; v < M; ++v) {
            const int g = tgt[v];
            double dot = 0.0;
            for (std::int64_t c = 0; c < C; ++c) {
                const double d =
                    c == 0 ? 0.0 : (c == g ? coef_match[std::size_t(c)] : coef_other[std::size_t(c)]);
                dldp[std::size_t(c)] = d;
                dot += d * double(probs.plane(n, c)[v]);
            }
            const double ce_scale = (1.0 - lambda) * inv_voxels * spec.weight(g);
            for (std::int64_t c = 0; c < C; ++c) {
                const double p = double(probs.plane(n, c)[v]);
                // softmax jacobian for the dice part; CE contributes directly
                double dz = p * (dldp[std::size_t(c)] - dot);
                dz += ce_scale * (p - (c == g ? 1.0 : 0.0));
                grad_logits.plane(n, c)[v] = T(dz);
            }
        }
    }
}

// Forward + loss + full backprop; parameter gradients land in the network's
// grad buffers. Returns the loss.
template <typename T>
double backward(Network<T>& net, const Tensor<T>& x, const LabelBatch& target,
                const LossSpec& spec, Workspace<T>& ws) {
    net.zero_grads();
    forward_logits(net, x, ws);
    softmax(ws.logits, ws.probs);
    const double loss = dice_ce_loss(ws.probs, target, spec);
    Tensor<T> grad_logits;
    loss_backward_logits(ws.probs, target, spec, grad_logits);
    backward_from_logits(net, x, ws, grad_logits);
    return loss;
}

template <typename T>
double backward(Network<T>& net, const Tensor<T>& x, const LabelBatch& target,
                const LossSpec& spec) {
    Workspace<T> ws;
    return backward(net, x, target, spec, ws);
}

// v <- momentum * v + g ; w <- w - lr_t * v
template <typename T>
void sgd_step(Network<T>& net, OptimizerState& opt) {
    opt.validate();
    auto params = net.parameters();
    std::size_t total = 0;
    for (const auto& p : params) total += p.count;
    if (opt.velocity.empty()) opt.velocity.assign(total, 0.0);
    if (opt.velocity.size() != total)
        throw ShapeError("optimizer velocity does not match the parameter count");

    const double lr = opt.effective_lr();
    std::size_t offset = 0;
    for (auto& p : params) {
        for (std::size_t idx = 0; idx < p.count; ++idx) {
            double& v = opt.velocity[offset + idx];
            v = opt.momentum * v + double(p.grads[idx]);
            p.values[idx] = T(double(p.values[idx]) - lr * v);
        }
        offset += p.count;
    }
}

// Central-difference verification of the analytic gradient over every
// weight. 64-bit only; relative error denominators are floored at 1e-8.
inline double finite_difference_check(Network<double>& net, const Tensor<double>& x,
                                      const LabelBatch& target, const LossSpec& spec,
                                      double epsilon) {
    Workspace<double> ws;
    const double base_loss = backward(net, x, target, spec, ws);
    (void)base_loss;

    auto params = net.parameters();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.emplace_back(p.grads, p.grads + p.count);

    auto loss_at = [&]() {
        forward_logits(net, x, ws);
        softmax(ws.logits, ws.probs);
        return dice_ce_loss(ws.probs, target, spec);
    };

    double max_rel_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::size_t idx = 0; idx < p.count; ++idx) {
            const double saved = p.values[idx];
            p.values[idx] = saved + epsilon;
            const double lp = loss_at();
            p.values[idx] = saved - epsilon;
            const double lm = loss_at();
            p.values[idx] = saved;

            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double a = analytic[pi][idx];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            max_rel_err = std::max(max_rel_err, std::fabs(a - numeric) / denom);
        }
    }
    return max_rel_err;
}

} // namespace petseg::net

#endif
