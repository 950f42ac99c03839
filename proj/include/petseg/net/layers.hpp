#ifndef PETSEG_NET_LAYERS_HPP
#define PETSEG_NET_LAYERS_HPP

#include <cmath>
#include <string>

#include "petseg/net/tensor.hpp"

namespace petseg::net {

template <typename T>
struct Conv3d {
    int in_c = 0, out_c = 0;
    int kernel = 3, stride = 1, pad = 1;
    // convolutions feeding an instance norm are bias-free: the norm removes
    // per-channel constant shifts, which would leave the bias gradient at
    // exactly zero
    bool use_bias = true;
    std::vector<T> weight; // [out_c][in_c][kz][ky][kx]
    std::vector<T> bias;   // [out_c]
    std::vector<T> grad_weight;
    std::vector<T> grad_bias;

    void init(int in_channels, int out_channels, int k, int s, int p, bool with_bias = true) {
        in_c = in_channels;
        out_c = out_channels;
        kernel = k;
        stride = s;
        pad = p;
        use_bias = with_bias;
        const std::size_t n = std::size_t(out_c) * in_c * k * k * k;
        weight.assign(n, T(0));
        bias.assign(std::size_t(out_c), T(0));
        grad_weight.assign(n, T(0));
        grad_bias.assign(std::size_t(out_c), T(0));
    }

    std::int64_t out_dim(std::int64_t in_dim) const {
        return (in_dim + 2 * pad - kernel) / stride + 1;
    }
};

template <typename T>
struct ConvTranspose3d {
    int in_c = 0, out_c = 0;
    int kernel = 2, stride = 2;
    bool use_bias = true;
    std::vector<T> weight; // [in_c][out_c][kz][ky][kx]
    std::vector<T> bias;   // [out_c]
    std::vector<T> grad_weight;
    std::vector<T> grad_bias;

    void init(int in_channels, int out_channels, bool with_bias = true) {
        in_c = in_channels;
        out_c = out_channels;
        use_bias = with_bias;
        const std::size_t n = std::size_t(in_c) * out_c * kernel * kernel * kernel;
        weight.assign(n, T(0));
        bias.assign(std::size_t(out_c), T(0));
        grad_weight.assign(n, T(0));
        grad_bias.assign(std::size_t(out_c), T(0));
    }
};

template <typename T>
struct InstanceNorm {
    int channels = 0;
    T eps = T(1e-5);
    std::vector<T> gamma, beta;
    std::vector<T> grad_gamma, grad_beta;

    void init(int c, double epsilon) {
        channels = c;
        eps = T(epsilon);
        gamma.assign(std::size_t(c), T(1));
        beta.assign(std::size_t(c), T(0));
        grad_gamma.assign(std::size_t(c), T(0));
        grad_beta.assign(std::size_t(c), T(0));
    }
};

// ---- convolution ----------------------------------------------------------

template <typename T>
void conv3d_forward(const Conv3d<T>& conv, const Tensor<T>& in, Tensor<T>& out) {
    const std::int64_t N = in.shape[0];
    const std::int64_t DI = in.shape[2], HI = in.shape[3], WI = in.shape[4];
    const std::int64_t DO = conv.out_dim(DI), HO = conv.out_dim(HI), WO = conv.out_dim(WI);
    if (in.shape[1] != conv.in_c)
        throw ShapeError("conv3d_forward: channel mismatch");
    out.resize(N, conv.out_c, DO, HO, WO);

    const int K = conv.kernel, S = conv.stride, P = conv.pad;
    auto lo = [&](int k) { // first output coord with an in-range tap
        const std::int64_t shift = P - k;
        return shift <= 0 ? std::int64_t(0) : (shift + S - 1) / S;
    };
    auto hi = [&](int k, std::int64_t in_dim, std::int64_t out_dim) {
        const std::int64_t last = (in_dim - 1 - k + P) / S;
        return std::min(out_dim, last + 1);
    };

    for (std::int64_t n = 0; n < N; ++n) {
        for (int co = 0; co < conv.out_c; ++co) {
            T* out_plane = out.plane(n, co);
            const T b = conv.use_bias ? conv.bias[std::size_t(co)] : T(0);
            for (std::int64_t v = 0; v < DO * HO * WO; ++v) out_plane[v] = b;

            for (int ci = 0; ci < conv.in_c; ++ci) {
                const T* in_plane = in.plane(n, ci);
                const T* w_base =
                    conv.weight.data() + (std::size_t(co) * conv.in_c + ci) * K * K * K;
                for (int kz = 0; kz < K; ++kz) {
                    const std::int64_t z0 = lo(kz), z1 = hi(kz, DI, DO);
                    for (int ky = 0; ky < K; ++ky) {
                        const std::int64_t y0 = lo(ky), y1 = hi(ky, HI, HO);
                        for (int kx = 0; kx < K; ++kx) {
                            const T w = w_base[(kz * K + ky) * K + kx];
                            if (w == T(0)) continue;
                            const std::int64_t x0 = lo(kx), x1 = hi(kx, WI, WO);
                            for (std::int64_t z = z0; z < z1; ++z) {
                                const std::int64_t iz = z * S - P + kz;
                                for (std::int64_t y = y0; y < y1; ++y) {
                                    const std::int64_t iy = y * S - P + ky;
                                    T* orow = out_plane + (z * HO + y) * WO;
                                    const T* irow = in_plane + (iz * HI + iy) * WI - P + kx;
                                    if (S == 1) {
                                        for (std::int64_t x = x0; x < x1; ++x)
                                            orow[x] += w * irow[x];
                                    } else {
                                        for (std::int64_t x = x0; x < x1; ++x)
                                            orow[x] += w * irow[x * S];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias gradients and writes the input gradient (if
// grad_in is non-null; it must be pre-sized and zeroed).
template <typename T>
void conv3d_backward(Conv3d<T>& conv, const Tensor<T>& in, const Tensor<T>& grad_out,
                     Tensor<T>* grad_in) {
    const std::int64_t N = in.shape[0];
    const std::int64_t DI = in.shape[2], HI = in.shape[3], WI = in.shape[4];
    const std::int64_t DO = grad_out.shape[2], HO = grad_out.shape[3], WO = grad_out.shape[4];
    const int K = conv.kernel, S = conv.stride, P = conv.pad;

    auto lo = [&](int k) {
        const std::int64_t shift = P - k;
        return shift <= 0 ? std::int64_t(0) : (shift + S - 1) / S;
    };
    auto hi = [&](int k, std::int64_t in_dim, std::int64_t out_dim) {
        const std::int64_t last = (in_dim - 1 - k + P) / S;
        return std::min(out_dim, last + 1);
    };

    for (std::int64_t n = 0; n < N; ++n) {
        for (int co = 0; co < conv.out_c; ++co) {
            const T* go_plane = grad_out.plane(n, co);
            if (conv.use_bias) {
                double bias_acc = 0.0;
                for (std::int64_t v = 0; v < DO * HO * WO; ++v) bias_acc += double(go_plane[v]);
                conv.grad_bias[std::size_t(co)] += T(bias_acc);
            }

            for (int ci = 0; ci < conv.in_c; ++ci) {
                const T* in_plane = in.plane(n, ci);
                T* gin_plane = grad_in ? grad_in->plane(n, ci) : nullptr;
                const std::size_t w_off = (std::size_t(co) * conv.in_c + ci) * K * K * K;
                for (int kz = 0; kz < K; ++kz) {
                    const std::int64_t z0 = lo(kz), z1 = hi(kz, DI, DO);
                    for (int ky = 0; ky < K; ++ky) {
                        const std::int64_t y0 = lo(ky), y1 = hi(ky, HI, HO);
                        for (int kx = 0; kx < K; ++kx) {
                            const std::int64_t x0 = lo(kx), x1 = hi(kx, WI, WO);
                            const std::size_t widx = w_off + (kz * K + ky) * K + kx;
                            const T w = conv.weight[widx];
                            double w_acc = 0.0;
                            for (std::int64_t z = z0; z < z1; ++z) {
                                const std::int64_t iz = z * S - P + kz;
                                for (std::int64_t y = y0; y < y1; ++y) {
                                    const std::int64_t iy = y * S - P + ky;
                                    const T* gorow = go_plane + (z * HO + y) * WO;
                                    const T* irow = in_plane + (iz * HI + iy) * WI - P + kx;
                                    if (S == 1) {
                                        for (std::int64_t x = x0; x < x1; ++x)
                                            w_acc += double(irow[x]) * double(gorow[x]);
                                    } else {
                                        for (std::int64_t x = x0; x < x1; ++x)
                                            w_acc += double(irow[x * S]) * double(gorow[x]);
                                    }
                                    if (gin_plane) {
                                        T* girow = gin_plane + (iz * HI + iy) * WI - P + kx;
                                        if (S == 1) {
                                            for (std::int64_t x = x0; x < x1; ++x)
                                                girow[x] += w * gorow[x];
                                        } else {
                                            for (std::int64_t x = x0; x < x1; ++x)
                                                girow[x * S] += w * gorow[x];
                                        }
                                    }
                                }
                            }
                            conv.grad_weight[widx] += T(w_acc);
                        }
                    }
                }
            }
        }
    }
}

// ---- transposed convolution (kernel 2, stride 2) ---------------------------

template <typename T>
void conv_transpose3d_forward(const ConvTranspose3d<T>& up, const Tensor<T>& in, Tensor<T>& out) {
    const std::int64_t N = in.shape[0];
    const std::int64_t DI = in.shape[2], HI = in.shape[3], WI = in.shape[4];
    const int K = up.kernel, S = up.stride;
    const std::int64_t DO = DI * S, HO = HI * S, WO = WI * S;
    if (in.shape[1] != up.in_c)
        throw ShapeError("conv_transpose3d_forward: channel mismatch");
    out.resize(N, up.out_c, DO, HO, WO);

    for (std::int64_t n = 0; n < N; ++n) {
        for (int co = 0; co < up.out_c; ++co) {
            T* out_plane = out.plane(n, co);
            const T b = up.use_bias ? up.bias[std::size_t(co)] : T(0);
            for (std::int64_t v = 0; v < DO * HO * WO; ++v) out_plane[v] = b;

            for (int ci = 0; ci < up.in_c; ++ci) {
                const T* in_plane = in.plane(n, ci);
                const T* w_base = up.weight.data() + (std::size_t(ci) * up.out_c + co) * K * K * K;
                for (int kz = 0; kz < K; ++kz)
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            const T w = w_base[(kz * K + ky) * K + kx];
                            for (std::int64_t z = 0; z < DI; ++z)
                                for (std::int64_t y = 0; y < HI; ++y) {
                                    const T* irow = in_plane + (z * HI + y) * WI;
                                    T* orow =
                                        out_plane + ((z * S + kz) * HO + (y * S + ky)) * WO + kx;
                                    for (std::int64_t x = 0; x < WI; ++x)
                                        orow[x * S] += w * irow[x];
                                }
                        }
            }
        }
    }
}

template <typename T>
void conv_transpose3d_backward(ConvTranspose3d<T>& up, const Tensor<T>& in,
                               const Tensor<T>& grad_out, Tensor<T>* grad_in) {
    const std::int64_t N = in.shape[0];
    const std::int64_t DI = in.shape[2], HI = in.shape[3], WI = in.shape[4];
    const std::int64_t HO = grad_out.shape[3], WO = grad_out.shape[4];
    const int K = up.kernel, S = up.stride;

    for (std::int64_t n = 0; n < N; ++n) {
        for (int co = 0; co < up.out_c; ++co) {
            const T* go_plane = grad_out.plane(n, co);
            if (up.use_bias) {
                double bias_acc = 0.0;
                const std::int64_t out_spatial = grad_out.spatial();
                for (std::int64_t v = 0; v < out_spatial; ++v) bias_acc += double(go_plane[v]);
                up.grad_bias[std::size_t(co)] += T(bias_acc);
            }

            for (int ci = 0; ci < up.in_c; ++ci) {
                const T* in_plane = in.plane(n, ci);
                T* gin_plane = grad_in ? grad_in->plane(n, ci) : nullptr;
                const std::size_t w_off = (std::size_t(ci) * up.out_c + co) * K * K * K;
                for (int kz = 0; kz < K; ++kz)
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            const std::size_t widx = w_off + (kz * K + ky) * K + kx;
                            const T w = up.weight[widx];
                            double w_acc = 0.0;
                            for (std::int64_t z = 0; z < DI; ++z)
                                for (std::int64_t y = 0; y < HI; ++y) {
                                    const T* irow = in_plane + (z * HI + y) * WI;
                                    const T* gorow =
                                        go_plane + ((z * S + kz) * HO + (y * S + ky)) * WO + kx;
                                    T* girow = gin_plane ? gin_plane + (z * HI + y) * WI : nullptr;
                                    for (std::int64_t x = 0; x < WI; ++x) {
                                        const T go = gorow[x * S];
                                        w_acc += double(irow[x]) * double(go);
                                        if (girow) girow[x] += w * go;
                                    }
                                }
                            up.grad_weight[widx] += T(w_acc);
                        }
            }
        }
    }
}

// ---- instance normalization -------------------------------------------------

// Normalizes x in place to xhat (per sample, per channel, population
// variance), recording mean/invstd for the backward pass.
template <typename T>
void instance_norm_normalize(const InstanceNorm<T>& norm, Tensor<T>& x, std::vector<T>& mean,
                             std::vector<T>& invstd) {
    const std::int64_t N = x.shape[0], C = x.shape[1], M = x.spatial();
    mean.resize(std::size_t(N * C));
    invstd.resize(std::size_t(N * C));
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            T* p = x.plane(n, c);
            double mu = 0.0;
            for (std::int64_t v = 0; v < M; ++v) mu += double(p[v]);
            mu /= double(M);
            double var = 0.0;
            for (std::int64_t v = 0; v < M; ++v) {
                const double d = double(p[v]) - mu;
                var += d * d;
            }
            var /= double(M);
            const double is = 1.0 / std::sqrt(var + double(norm.eps));
            mean[std::size_t(n * C + c)] = T(mu);
            invstd[std::size_t(n * C + c)] = T(is);
            for (std::int64_t v = 0; v < M; ++v) p[v] = T((double(p[v]) - mu) * is);
        }
}

// out = leaky(gamma * xhat + beta)
template <typename T>
void norm_affine_act_forward(const InstanceNorm<T>& norm, const Tensor<T>& xhat, T slope,
                             Tensor<T>& out) {
    const std::int64_t N = xhat.shape[0], C = xhat.shape[1], M = xhat.spatial();
    out.resize(N, C, xhat.shape[2], xhat.shape[3], xhat.shape[4]);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const T g = norm.gamma[std::size_t(c)], b = norm.beta[std::size_t(c)];
            const T* xp = xhat.plane(n, c);
            T* op = out.plane(n, c);
            for (std::int64_t v = 0; v < M; ++v) {
                const T y = g * xp[v] + b;
                op[v] = y > T(0) ? y : slope * y;
            }
        }
}

// Backward through leaky -> affine -> normalization. grad_out is consumed;
// result (gradient w.r.t. the conv output feeding the norm) lands in grad_z.
template <typename T>
void norm_affine_act_backward(InstanceNorm<T>& norm, const Tensor<T>& xhat,
                              const std::vector<T>& invstd, T slope, const Tensor<T>& grad_out,
                              Tensor<T>& grad_z) {
    const std::int64_t N = xhat.shape[0], C = xhat.shape[1], M = xhat.spatial();
    grad_z.resize(N, C, xhat.shape[2], xhat.shape[3], xhat.shape[4]);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const T g = norm.gamma[std::size_t(c)], b = norm.beta[std::size_t(c)];
            const T* xp = xhat.plane(n, c);
            const T* gop = grad_out.plane(n, c);
            T* gz = grad_z.plane(n, c);

            double dgamma = 0.0, dbeta = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::int64_t v = 0; v < M; ++v) {
                const T y = g * xp[v] + b;
                const T dy = y > T(0) ? gop[v] : slope * gop[v];
                gz[v] = dy; // stash dy, finished below
                const double dxhat = double(dy) * double(g);
                dgamma += double(dy) * double(xp[v]);
                dbeta += double(dy);
                m1 += dxhat;
                m2 += dxhat * double(xp[v]);
            }
            norm.grad_gamma[std::size_t(c)] += T(dgamma);
            norm.grad_beta[std::size_t(c)] += T(dbeta);
            m1 /= double(M);
            m2 /= double(M);

            const double is = double(invstd[std::size_t(n * C + c)]);
            for (std::int64_t v = 0; v < M; ++v) {
                const double dxhat = double(gz[v]) * double(g);
                gz[v] = T(is * (dxhat - m1 - double(xp[v]) * m2));
            }
        }
}

} // namespace petseg::net

#endif
