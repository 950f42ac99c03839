#ifndef PETSEG_NET_NETWORK_HPP
#define PETSEG_NET_NETWORK_HPP

#include <cstdint>
#include <string>

#include "petseg/net/config.hpp"
#include "petseg/net/layers.hpp"
#include "petseg/rng.hpp"

namespace petseg::net {

// conv -> instance norm -> leaky ReLU
template <typename T>
struct ConvUnit {
    Conv3d<T> conv;
    InstanceNorm<T> norm;
};

template <typename T>
struct EncoderStage {
    ConvUnit<T> unit1; // stride 2 for stages >= 1
    ConvUnit<T> unit2;
};

template <typename T>
struct DecoderStage {
    ConvTranspose3d<T> up; // doubles resolution, halves features
    ConvUnit<T> unit1;     // consumes [up, skip] concatenation
    ConvUnit<T> unit2;
};

// Standard 3D UNet: encoder stages halve resolution with strided
// convolutions while features double up to the cap; the decoder mirrors the
// encoder with transposed convolutions and skip concatenations; a final
// 1x1x1 convolution maps to class logits.
template <typename T>
struct Network {
    NetConfig config;
    std::vector<EncoderStage<T>> encoder; // num_downsamples + 1 stages
    std::vector<DecoderStage<T>> decoder; // num_downsamples stages
    Conv3d<T> head;

    struct ParamRef {
        std::string name;
        T* values;
        T* grads;
        std::size_t count;
    };

    // Enumerated fresh on demand so the refs always point at live storage.
    std::vector<ParamRef> parameters() {
        std::vector<ParamRef> refs;
        auto add = [&](const std::string& name, std::vector<T>& v, std::vector<T>& g) {
            refs.push_back({name, v.data(), g.data(), v.size()});
        };
        auto add_unit = [&](const std::string& prefix, ConvUnit<T>& u) {
            add(prefix + ".conv.weight", u.conv.weight, u.conv.grad_weight);
            if (u.conv.use_bias) add(prefix + ".conv.bias", u.conv.bias, u.conv.grad_bias);
            add(prefix + ".norm.gamma", u.norm.gamma, u.norm.grad_gamma);
            add(prefix + ".norm.beta", u.norm.beta, u.norm.grad_beta);
        };
        for (std::size_t s = 0; s < encoder.size(); ++s) {
            add_unit("enc" + std::to_string(s) + ".u1", encoder[s].unit1);
            add_unit("enc" + std::to_string(s) + ".u2", encoder[s].unit2);
        }
        for (std::size_t s = 0; s < decoder.size(); ++s) {
            const std::string prefix = "dec" + std::to_string(s);
            add(prefix + ".up.weight", decoder[s].up.weight, decoder[s].up.grad_weight);
            if (decoder[s].up.use_bias)
                add(prefix + ".up.bias", decoder[s].up.bias, decoder[s].up.grad_bias);
            add_unit(prefix + ".u1", decoder[s].unit1);
            add_unit(prefix + ".u2", decoder[s].unit2);
        }
        add("head.weight", head.weight, head.grad_weight);
        add("head.bias", head.bias, head.grad_bias);
        return refs;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.count;
        return n;
    }

    void zero_grads() {
        for (auto& p : parameters())
            std::fill(p.grads, p.grads + p.count, T(0));
    }
};

namespace detail {

template <typename T>
void he_init(std::vector<T>& w, std::int64_t fan_in, double leaky_slope, Rng& rng) {
    const double gain = std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
    const double std_dev = gain / std::sqrt(double(fan_in));
    for (auto& v : w) v = T(rng.next_normal() * std_dev);
}

template <typename T>
void init_unit(ConvUnit<T>& u, int in_c, int out_c, int stride, const NetConfig& cfg, Rng& rng) {
    u.conv.init(in_c, out_c, 3, stride, 1, /*with_bias=*/false);
    detail::he_init(u.conv.weight, std::int64_t(in_c) * 27, cfg.leaky_slope, rng);
    u.norm.init(out_c, cfg.norm_epsilon);
}

} // namespace detail

// Weights drawn with seeded He fan-in scaling; biases zero, norm affine at
// identity. Deterministic for a fixed seed.
template <typename T>
Network<T> build_network(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    Network<T> net;
    net.config = config;
    Rng rng(seed);

    net.encoder.resize(std::size_t(config.num_stages()));
    for (int s = 0; s < config.num_stages(); ++s) {
        const int f = config.stage_features(s);
        const int in_c = s == 0 ? config.in_channels : config.stage_features(s - 1);
        detail::init_unit(net.encoder[std::size_t(s)].unit1, in_c, f, s == 0 ? 1 : 2, config, rng);
        detail::init_unit(net.encoder[std::size_t(s)].unit2, f, f, 1, config, rng);
    }

    net.decoder.resize(std::size_t(config.num_downsamples));
    for (int s = 0; s < config.num_downsamples; ++s) {
        // decoder[s] produces the stage-s resolution from stage s+1
        auto& dec = net.decoder[std::size_t(s)];
        const int f_lo = config.stage_features(s + 1);
        const int f = config.stage_features(s);
        dec.up.init(f_lo, f, /*with_bias=*/false);
        detail::he_init(dec.up.weight, std::int64_t(f_lo) * 8, config.leaky_slope, rng);
        detail::init_unit(dec.unit1, 2 * f, f, 1, config, rng);
        detail::init_unit(dec.unit2, f, f, 1, config, rng);
    }

    net.head.init(config.stage_features(0), config.num_classes, 1, 1, 0);
    detail::he_init(net.head.weight, config.stage_features(0), config.leaky_slope, rng);
    return net;
}

// ---- forward ----------------------------------------------------------------

template <typename T>
struct UnitCache {
    Tensor<T> xhat; // normalized conv output, pre-affine
    std::vector<T> mean, invstd;
    Tensor<T> out; // after affine + activation
};

template <typename T>
struct EncoderCache {
    UnitCache<T> u1, u2;
};

template <typename T>
struct DecoderCache {
    Tensor<T> up_out;
    Tensor<T> concat;
    UnitCache<T> u1, u2;
};

template <typename T>
struct Workspace {
    std::vector<EncoderCache<T>> enc;
    std::vector<DecoderCache<T>> dec;
    Tensor<T> logits;
    Tensor<T> probs;
    // backward scratch
    Tensor<T> grad_a, grad_b, grad_concat;
    std::vector<Tensor<T>> grad_skip;
};

template <typename T>
void unit_forward(const ConvUnit<T>& u, const Tensor<T>& in, UnitCache<T>& cache, T slope) {
    conv3d_forward(u.conv, in, cache.xhat);
    instance_norm_normalize(u.norm, cache.xhat, cache.mean, cache.invstd);
    norm_affine_act_forward(u.norm, cache.xhat, slope, cache.out);
}

template <typename T>
void check_input_shape(const Network<T>& net, const Tensor<T>& x) {
    if (x.shape[1] != net.config.in_channels)
        throw ShapeError("input channels do not match the network configuration");
    const std::int64_t divisor = std::int64_t(1) << net.config.num_downsamples;
    for (int axis = 2; axis < 5; ++axis) {
        if (x.shape[axis] < divisor || x.shape[axis] % divisor != 0)
            throw ShapeError("input spatial dims must be positive multiples of 2^num_downsamples");
    }
}

// Runs the network up to class logits. The workspace keeps every activation
// needed by backward and is reused across calls without reallocating.
template <typename T>
const Tensor<T>& forward_logits(const Network<T>& net, const Tensor<T>& x, Workspace<T>& ws) {
    check_input_shape(net, x);
    const T slope = T(net.config.leaky_slope);
    const std::size_t stages = net.encoder.size();
    ws.enc.resize(stages);
    ws.dec.resize(net.decoder.size());

    const Tensor<T>* cur = &x;
    for (std::size_t s = 0; s < stages; ++s) {
        unit_forward(net.encoder[s].unit1, *cur, ws.enc[s].u1, slope);
        unit_forward(net.encoder[s].unit2, ws.enc[s].u1.out, ws.enc[s].u2, slope);
        cur = &ws.enc[s].u2.out;
    }

    for (std::size_t si = net.decoder.size(); si-- > 0;) {
        auto& dec = net.decoder[si];
        auto& cache = ws.dec[si];
        conv_transpose3d_forward(dec.up, *cur, cache.up_out);

        const Tensor<T>& skip = ws.enc[si].u2.out;
        if (cache.up_out.shape[2] != skip.shape[2] || cache.up_out.shape[3] != skip.shape[3] ||
            cache.up_out.shape[4] != skip.shape[4])
            throw ShapeError("decoder/skip spatial dims disagree");

        const std::int64_t N = skip.shape[0], M = skip.spatial();
        const std::int64_t cu = cache.up_out.shape[1], cs = skip.shape[1];
        cache.concat.resize(N, cu + cs, skip.shape[2], skip.shape[3], skip.shape[4]);
        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t c = 0; c < cu; ++c)
                std::copy(cache.up_out.plane(n, c), cache.up_out.plane(n, c) + M,
                          cache.concat.plane(n, c));
            for (std::int64_t c = 0; c < cs; ++c)
                std::copy(skip.plane(n, c), skip.plane(n, c) + M, cache.concat.plane(n, cu + c));
        }

        unit_forward(dec.unit1, cache.concat, cache.u1, slope);
        unit_forward(dec.unit2, cache.u1.out, cache.u2, slope);
        cur = &cache.u2.out;
    }

    conv3d_forward(net.head, *cur, ws.logits);
    return ws.logits;
}

// Numerically stable per-voxel softmax over the class axis.
template <typename T>
void softmax(const Tensor<T>& logits, Tensor<T>& probs) {
    const std::int64_t N = logits.shape[0], C = logits.shape[1], M = logits.spatial();
    probs.resize(N, C, logits.shape[2], logits.shape[3], logits.shape[4]);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t v = 0; v < M; ++v) {
            double max_z = -1e300;
            for (std::int64_t c = 0; c < C; ++c)
                max_z = std::max(max_z, double(logits.plane(n, c)[v]));
            double denom = 0.0;
            for (std::int64_t c = 0; c < C; ++c)
                denom += std::exp(double(logits.plane(n, c)[v]) - max_z);
            for (std::int64_t c = 0; c < C; ++c)
                probs.plane(n, c)[v] = T(std::exp(double(logits.plane(n, c)[v]) - max_z) / denom);
        }
}

// Class probabilities (N, num_classes, D, H, W) for the given input.
template <typename T>
Tensor<T> forward(const Network<T>& net, const Tensor<T>& x) {
    Workspace<T> ws;
    forward_logits(net, x, ws);
    Tensor<T> probs;
    softmax(ws.logits, probs);
    return probs;
}

// ---- backward ----------------------------------------------------------------

template <typename T>
void unit_backward(ConvUnit<T>& u, const Tensor<T>& in, UnitCache<T>& cache,
                   const Tensor<T>& grad_out, Tensor<T>* grad_in, Tensor<T>& scratch, T slope) {
    norm_affine_act_backward(u.norm, cache.xhat, cache.invstd, slope, grad_out, scratch);
    if (grad_in) {
        grad_in->resize(in.shape[0], in.shape[1], in.shape[2], in.shape[3], in.shape[4]);
        grad_in->fill(T(0));
    }
    conv3d_backward(u.conv, in, scratch, grad_in);
}

// Backpropagates grad_logits through the network, accumulating parameter
// gradients (call net.zero_grads() first). Requires the workspace of the
// matching forward_logits call.
template <typename T>
void backward_from_logits(Network<T>& net, const Tensor<T>& x, Workspace<T>& ws,
                          const Tensor<T>& grad_logits) {
    const T slope = T(net.config.leaky_slope);
    const std::size_t stages = net.encoder.size();

    ws.grad_skip.resize(stages);

    // head
    const Tensor<T>& head_in =
        net.decoder.empty() ? ws.enc.back().u2.out : ws.dec.front().u2.out;
    ws.grad_a.resize(head_in.shape[0], head_in.shape[1], head_in.shape[2], head_in.shape[3],
                     head_in.shape[4]);
    ws.grad_a.fill(T(0));
    conv3d_backward(net.head, head_in, grad_logits, &ws.grad_a);

    // decoders, finest to coarsest; grad_a holds d(out) of decoder si
    for (std::size_t si = 0; si < net.decoder.size(); ++si) {
        auto& dec = net.decoder[si];
        auto& cache = ws.dec[si];

        unit_backward(dec.unit2, cache.u1.out, cache.u2, ws.grad_a, &ws.grad_b, ws.grad_concat,
                      slope);
        unit_backward(dec.unit1, cache.concat, cache.u1, ws.grad_b, &ws.grad_concat, ws.grad_a,
                      slope);

        // split concat gradient into the up-path and the skip
        const std::int64_t N = cache.concat.shape[0];
        const std::int64_t cu = cache.up_out.shape[1];
        const std::int64_t cs = cache.concat.shape[1] - cu;
        const std::int64_t M = cache.concat.spatial();
        ws.grad_b.resize(N, cu, cache.up_out.shape[2], cache.up_out.shape[3], cache.up_out.shape[4]);
        auto& gskip = ws.grad_skip[si];
        gskip.resize(N, cs, cache.up_out.shape[2], cache.up_out.shape[3], cache.up_out.shape[4]);
        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t c = 0; c < cu; ++c)
                std::copy(ws.grad_concat.plane(n, c), ws.grad_concat.plane(n, c) + M,
                          ws.grad_b.plane(n, c));
            for (std::int64_t c = 0; c < cs; ++c)
                std::copy(ws.grad_concat.plane(n, cu + c), ws.grad_concat.plane(n, cu + c) + M,
                          gskip.plane(n, c));
        }

        // through the transposed conv into the stage below
        const Tensor<T>& up_in =
            si + 1 < net.decoder.size() ? ws.dec[si + 1].u2.out : ws.enc.back().u2.out;
        ws.grad_a.resize(up_in.shape[0], up_in.shape[1], up_in.shape[2], up_in.shape[3],
                         up_in.shape[4]);
        ws.grad_a.fill(T(0));
        conv_transpose3d_backward(dec.up, up_in, ws.grad_b, &ws.grad_a);
    }

    // encoders, deepest to shallowest; grad_a holds d(out) of the deepest
    for (std::size_t s = stages; s-- > 0;) {
        Tensor<T>& grad_out = ws.grad_a;
        // add the skip contribution collected during decoding
        if (s < ws.grad_skip.size() && s < net.decoder.size()) {
            auto& gskip = ws.grad_skip[s];
            if (gskip.count() == grad_out.count() && gskip.count() > 0)
                for (std::size_t v = 0; v < gskip.data.size(); ++v)
                    grad_out.data[v] += gskip.data[v];
        }

        auto& enc = net.encoder[s];
        auto& cache = ws.enc[s];
        const Tensor<T>& in1 = s == 0 ? x : ws.enc[s - 1].u2.out;

        unit_backward(enc.unit2, cache.u1.out, cache.u2, grad_out, &ws.grad_b, ws.grad_concat,
                      slope);
        unit_backward(enc.unit1, in1, cache.u1, ws.grad_b, s == 0 ? nullptr : &ws.grad_a,
                      ws.grad_concat, slope);
        // grad_a now holds d(out) of stage s-1
    }
}

} // namespace petseg::net

#endif
