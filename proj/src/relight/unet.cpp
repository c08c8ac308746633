// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/unet.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Core>

namespace relight {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecE = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr double kGnEps = 1e-5;

template <typename T>
void check_chw(const Tensor<T>& x) {
    if (x.shape.size() != 3) throw std::invalid_argument("expected CHW tensor");
}

// ---------------------------------------------------------------------------
// conv (stride 1, pad 1 for 3x3, pad 0 for 1x1) via im2col + GEMM
// ---------------------------------------------------------------------------

template <typename T>
void im2col(const Tensor<T>& x, int k, int pad, MatRM<T>& cols) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    cols.setZero(C * k * k, static_cast<Eigen::Index>(H) * W);
    for (int ic = 0; ic < C; ++ic) {
        const T* xc = x.ptr() + static_cast<size_t>(ic) * H * W;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                T* row = cols.data() + (static_cast<size_t>((ic * k + kh) * k + kw)) *
                                           (static_cast<size_t>(H) * W);
                int ox_lo = std::max(0, pad - kw);
                int ox_hi = std::min(W, W + pad - kw);
                if (ox_hi <= ox_lo) continue;
                for (int oy = 0; oy < H; ++oy) {
                    int iy = oy + kh - pad;
                    if (iy < 0 || iy >= H) continue;
                    std::memcpy(row + static_cast<size_t>(oy) * W + ox_lo,
                                xc + static_cast<size_t>(iy) * W + (ox_lo + kw - pad),
                                static_cast<size_t>(ox_hi - ox_lo) * sizeof(T));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const MatRM<T>& cols, int k, int pad, Tensor<T>& dx) {
    int C = dx.shape[0], H = dx.shape[1], W = dx.shape[2];
    for (int ic = 0; ic < C; ++ic) {
        T* xc = dx.ptr() + static_cast<size_t>(ic) * H * W;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const T* row = cols.data() + (static_cast<size_t>((ic * k + kh) * k + kw)) *
                                                 (static_cast<size_t>(H) * W);
                int ox_lo = std::max(0, pad - kw);
                int ox_hi = std::min(W, W + pad - kw);
                if (ox_hi <= ox_lo) continue;
                for (int oy = 0; oy < H; ++oy) {
                    int iy = oy + kh - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = xc + static_cast<size_t>(iy) * W + (ox_lo + kw - pad);
                    const T* src = row + static_cast<size_t>(oy) * W + ox_lo;
                    for (int i = 0; i < ox_hi - ox_lo; ++i) dst[i] += src[i];
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv2d_forward(const Conv2d<T>& conv, const Tensor<T>& x) {
    check_chw(x);
    if (x.shape[0] != conv.in_ch) throw std::invalid_argument("conv: channel mismatch");
    int H = x.shape[1], W = x.shape[2];
    int pad = conv.k == 3 ? 1 : 0;
    MatRM<T> cols;
    im2col(x, conv.k, pad, cols);
    Tensor<T> y({conv.out_ch, H, W});
    Eigen::Map<MatRM<T>> ym(y.ptr(), conv.out_ch, static_cast<Eigen::Index>(H) * W);
    Eigen::Map<const MatRM<T>> wm(conv.w.ptr(), conv.out_ch,
                                  conv.in_ch * conv.k * conv.k);
    ym.noalias() = wm * cols;
    for (int oc = 0; oc < conv.out_ch; ++oc) ym.row(oc).array() += conv.b.data[oc];
    return y;
}

template <typename T>
Tensor<T> conv2d_backward(const Conv2d<T>& conv, const Tensor<T>& x, const Tensor<T>& dy,
                          Conv2d<T>& dconv) {
    int H = x.shape[1], W = x.shape[2];
    int pad = conv.k == 3 ? 1 : 0;
    MatRM<T> cols;
    im2col(x, conv.k, pad, cols);
    Eigen::Map<const MatRM<T>> dym(dy.ptr(), conv.out_ch, static_cast<Eigen::Index>(H) * W);
    Eigen::Map<MatRM<T>> dwm(dconv.w.ptr(), conv.out_ch, conv.in_ch * conv.k * conv.k);
    dwm.noalias() += dym * cols.transpose();
    // Fixed-order scalar sum: Eigen's vectorized reductions change summation
    // order with pointer alignment, which breaks bitwise reproducibility.
    size_t plane = static_cast<size_t>(H) * W;
    for (int oc = 0; oc < conv.out_ch; ++oc) {
        const T* row = dy.ptr() + static_cast<size_t>(oc) * plane;
        T s = 0;
        for (size_t i = 0; i < plane; ++i) s += row[i];
        dconv.b.data[oc] += s;
    }

    Eigen::Map<const MatRM<T>> wm(conv.w.ptr(), conv.out_ch,
                                  conv.in_ch * conv.k * conv.k);
    MatRM<T> dcols = wm.transpose() * dym;
    Tensor<T> dx({conv.in_ch, H, W});
    col2im_add(dcols, conv.k, pad, dx);
    return dx;
}

// ---------------------------------------------------------------------------
// group norm
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> gn_forward(const GroupNorm<T>& gn, const Tensor<T>& x, std::vector<T>& mean,
                     std::vector<T>& istd) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    if (C != gn.channels || C % gn.groups != 0)
        throw std::invalid_argument("groupnorm: channel/group mismatch");
    int cpg = C / gn.groups;
    size_t plane = static_cast<size_t>(H) * W;
    size_t m = static_cast<size_t>(cpg) * plane;
    mean.assign(gn.groups, T(0));
    istd.assign(gn.groups, T(0));
    Tensor<T> y({C, H, W});
    for (int g = 0; g < gn.groups; ++g) {
        const T* xs = x.ptr() + static_cast<size_t>(g) * cpg * plane;
        T mu = 0;
        for (size_t i = 0; i < m; ++i) mu += xs[i];
        mu /= static_cast<T>(m);
        T var = 0;
        for (size_t i = 0; i < m; ++i) {
            T d = xs[i] - mu;
            var += d * d;
        }
        var /= static_cast<T>(m);
        T is = T(1) / std::sqrt(var + static_cast<T>(kGnEps));
        mean[g] = mu;
        istd[g] = is;
        for (int c = 0; c < cpg; ++c) {
            int ch = g * cpg + c;
            const T* xc = x.ptr() + static_cast<size_t>(ch) * plane;
            T* yc = y.ptr() + static_cast<size_t>(ch) * plane;
            T ga = gn.gamma.data[ch], be = gn.beta.data[ch];
            for (size_t i = 0; i < plane; ++i) yc[i] = ga * (xc[i] - mu) * is + be;
        }
    }
    return y;
}

template <typename T>
Tensor<T> gn_backward(const GroupNorm<T>& gn, const Tensor<T>& x, const std::vector<T>& mean,
                      const std::vector<T>& istd, const Tensor<T>& dy, GroupNorm<T>& dgn) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    int cpg = C / gn.groups;
    size_t plane = static_cast<size_t>(H) * W;
    size_t m = static_cast<size_t>(cpg) * plane;
    Tensor<T> dx({C, H, W});
    for (int g = 0; g < gn.groups; ++g) {
        T mu = mean[g], is = istd[g];
        T s1 = 0, s2 = 0;  // sum dxhat, sum dxhat*xhat
        for (int c = 0; c < cpg; ++c) {
            int ch = g * cpg + c;
            const T* xc = x.ptr() + static_cast<size_t>(ch) * plane;
            const T* dyc = dy.ptr() + static_cast<size_t>(ch) * plane;
            T ga = gn.gamma.data[ch];
            T dga = 0, dbe = 0;
            for (size_t i = 0; i < plane; ++i) {
                T xhat = (xc[i] - mu) * is;
                T dxh = dyc[i] * ga;
                s1 += dxh;
                s2 += dxh * xhat;
                dga += dyc[i] * xhat;
                dbe += dyc[i];
            }
            dgn.gamma.data[ch] += dga;
            dgn.beta.data[ch] += dbe;
        }
        T inv_m = T(1) / static_cast<T>(m);
        for (int c = 0; c < cpg; ++c) {
            int ch = g * cpg + c;
            const T* xc = x.ptr() + static_cast<size_t>(ch) * plane;
            const T* dyc = dy.ptr() + static_cast<size_t>(ch) * plane;
            T* dxc = dx.ptr() + static_cast<size_t>(ch) * plane;
            T ga = gn.gamma.data[ch];
            for (size_t i = 0; i < plane; ++i) {
                T xhat = (xc[i] - mu) * is;
                T dxh = dyc[i] * ga;
                dxc[i] = is * (dxh - (s1 + xhat * s2) * inv_m);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// pointwise and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> silu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data) {
        T s = T(1) / (T(1) + std::exp(-v));
        v = v * s;
    }
    return y;
}

template <typename T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx = x;
    for (size_t i = 0; i < dx.size(); ++i) {
        T v = x.data[i];
        T s = T(1) / (T(1) + std::exp(-v));
        dx.data[i] = dy.data[i] * (s + v * s * (T(1) - s));
    }
    return dx;
}

template <typename T>
Tensor<T> avgpool2_forward(const Tensor<T>& x) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    if (H % 2 || W % 2) throw std::invalid_argument("avgpool2: odd spatial size");
    Tensor<T> y({C, H / 2, W / 2});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H / 2; ++i)
            for (int j = 0; j < W / 2; ++j) {
                size_t b = (static_cast<size_t>(c) * H + 2 * i) * W + 2 * j;
                y.data[(static_cast<size_t>(c) * (H / 2) + i) * (W / 2) + j] =
                    (x.data[b] + x.data[b + 1] + x.data[b + W] + x.data[b + W + 1]) / T(4);
            }
    return y;
}

template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& dy, int H, int W) {
    int C = dy.shape[0];
    Tensor<T> dx({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H / 2; ++i)
            for (int j = 0; j < W / 2; ++j) {
                T g = dy.data[(static_cast<size_t>(c) * (H / 2) + i) * (W / 2) + j] / T(4);
                size_t b = (static_cast<size_t>(c) * H + 2 * i) * W + 2 * j;
                dx.data[b] += g;
                dx.data[b + 1] += g;
                dx.data[b + W] += g;
                dx.data[b + W + 1] += g;
            }
    return dx;
}

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor<T> y({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                T v = x.data[(static_cast<size_t>(c) * H + i) * W + j];
                size_t b = (static_cast<size_t>(c) * 2 * H + 2 * i) * 2 * W + 2 * j;
                y.data[b] = v;
                y.data[b + 1] = v;
                y.data[b + 2 * W] = v;
                y.data[b + 2 * W + 1] = v;
            }
    return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
    int C = dy.shape[0], H2 = dy.shape[1], W2 = dy.shape[2];
    Tensor<T> dx({C, H2 / 2, W2 / 2});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H2 / 2; ++i)
            for (int j = 0; j < W2 / 2; ++j) {
                size_t b = (static_cast<size_t>(c) * H2 + 2 * i) * W2 + 2 * j;
                dx.data[(static_cast<size_t>(c) * (H2 / 2) + i) * (W2 / 2) + j] =
                    dy.data[b] + dy.data[b + 1] + dy.data[b + W2] + dy.data[b + W2 + 1];
            }
    return dx;
}

template <typename T>
Tensor<T> concat_ch(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> y({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
    std::memcpy(y.ptr(), a.ptr(), a.size() * sizeof(T));
    std::memcpy(y.ptr() + a.size(), b.ptr(), b.size() * sizeof(T));
    return y;
}

template <typename T>
void split_ch(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db) {
    std::memcpy(da.ptr(), dy.ptr(), da.size() * sizeof(T));
    std::memcpy(db.ptr(), dy.ptr() + da.size(), db.size() * sizeof(T));
}

// ---------------------------------------------------------------------------
// residual block
// ---------------------------------------------------------------------------

template <typename T>
struct ResCacheT {
    Tensor<T> x;
    std::vector<T> mean1, istd1;
    Tensor<T> a1, s1, c1;
    std::vector<T> scale;  // FiLM s (applied as 1+s)
    Tensor<T> h;
    std::vector<T> mean2, istd2;
    Tensor<T> a2, s2;
};

template <typename T>
Tensor<T> res_forward(const ResBlock<T>& blk, const Tensor<T>& x, const Tensor<T>& u,
                      ResCacheT<T>& cc) {
    cc.x = x;
    cc.a1 = gn_forward(blk.gn1, x, cc.mean1, cc.istd1);
    cc.s1 = silu_forward(cc.a1);
    cc.c1 = conv2d_forward(blk.conv1, cc.s1);

    int C = blk.conv1.out_ch;
    size_t plane = static_cast<size_t>(cc.c1.shape[1]) * cc.c1.shape[2];
    Eigen::Map<const MatRM<T>> fw(blk.film.w.ptr(), blk.film.out_f, blk.film.in_f);
    Eigen::Map<const VecE<T>> uv(u.ptr(), u.size());
    VecE<T> sb = fw * uv;
    for (int i = 0; i < blk.film.out_f; ++i) sb[i] += blk.film.b.data[i];
    cc.scale.assign(sb.data(), sb.data() + C);

    cc.h = cc.c1;
    for (int c = 0; c < C; ++c) {
        T sc = T(1) + sb[c], sh = sb[C + c];
        T* hc = cc.h.ptr() + static_cast<size_t>(c) * plane;
        for (size_t i = 0; i < plane; ++i) hc[i] = hc[i] * sc + sh;
    }

    cc.a2 = gn_forward(blk.gn2, cc.h, cc.mean2, cc.istd2);
    cc.s2 = silu_forward(cc.a2);
    Tensor<T> c2 = conv2d_forward(blk.conv2, cc.s2);

    if (blk.skip) {
        Tensor<T> sk = conv2d_forward(*blk.skip, x);
        for (size_t i = 0; i < c2.size(); ++i) c2.data[i] += sk.data[i];
    } else {
        for (size_t i = 0; i < c2.size(); ++i) c2.data[i] += x.data[i];
    }
    return c2;
}

// Returns dx; accumulates du (trunk gradient) and parameter grads.
template <typename T>
Tensor<T> res_backward(const ResBlock<T>& blk, const ResCacheT<T>& cc, const Tensor<T>& u,
                       const Tensor<T>& dout, ResBlock<T>& g, Tensor<T>& du) {
    Tensor<T> ds2 = conv2d_backward(blk.conv2, cc.s2, dout, g.conv2);
    Tensor<T> da2 = silu_backward(cc.a2, ds2);
    Tensor<T> dh = gn_backward(blk.gn2, cc.h, cc.mean2, cc.istd2, da2, g.gn2);

    int C = blk.conv1.out_ch;
    size_t plane = static_cast<size_t>(cc.c1.shape[1]) * cc.c1.shape[2];
    VecE<T> dsb(2 * C);
    Tensor<T> dc1 = dh;
    for (int c = 0; c < C; ++c) {
        const T* dhc = dh.ptr() + static_cast<size_t>(c) * plane;
        const T* c1c = cc.c1.ptr() + static_cast<size_t>(c) * plane;
        T* dc1c = dc1.ptr() + static_cast<size_t>(c) * plane;
        T sc = T(1) + cc.scale[c];
        T dscale = 0, dshift = 0;
        for (size_t i = 0; i < plane; ++i) {
            dscale += dhc[i] * c1c[i];
            dshift += dhc[i];
            dc1c[i] = dhc[i] * sc;
        }
        dsb[c] = dscale;
        dsb[C + c] = dshift;
    }
    // FiLM linear: sb = W u + b
    {
        Eigen::Map<MatRM<T>> dfw(g.film.w.ptr(), blk.film.out_f, blk.film.in_f);
        Eigen::Map<const MatRM<T>> fw(blk.film.w.ptr(), blk.film.out_f, blk.film.in_f);
        Eigen::Map<const VecE<T>> uv(u.ptr(), u.size());
        dfw.noalias() += dsb * uv.transpose();
        for (int i = 0; i < blk.film.out_f; ++i) g.film.b.data[i] += dsb[i];
        Eigen::Map<VecE<T>> duv(du.ptr(), du.size());
        duv.noalias() += fw.transpose() * dsb;
    }

    Tensor<T> ds1 = conv2d_backward(blk.conv1, cc.s1, dc1, g.conv1);
    Tensor<T> da1 = silu_backward(cc.a1, ds1);
    Tensor<T> dx = gn_backward(blk.gn1, cc.x, cc.mean1, cc.istd1, da1, g.gn1);

    if (blk.skip) {
        Tensor<T> dxs = conv2d_backward(*blk.skip, cc.x, dout, *g.skip);
        for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += dxs.data[i];
    } else {
        for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += dout.data[i];
    }
    return dx;
}

}  // namespace

// ---------------------------------------------------------------------------
// full network
// ---------------------------------------------------------------------------

template <typename T>
struct UNetCache {
    Tensor<T> e, zpre, u;
    ResCacheT<T> enc1, enc2, mid, dec2, dec1;
    Tensor<T> x_in, stem_out, h1, p1, h2, p2, hm, u2, cat2, d2, u1, cat1, d1;
};

template <typename T>
UNetCache<T>* new_unet_cache() {
    return new UNetCache<T>();
}
template <typename T>
void free_unet_cache(UNetCache<T>* c) {
    delete c;
}

template <typename T>
Tensor<T> timestep_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep embedding dim must be even");
    int half = dim / 2;
    Tensor<T> e({dim});
    for (int i = 0; i < half; ++i) {
        double f = half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
        e.data[i] = static_cast<T>(std::sin(t * f));
        e.data[half + i] = static_cast<T>(std::cos(t * f));
    }
    return e;
}

template <typename T>
Tensor<T> unet_forward(const UNet<T>& net, const Tensor<T>& x, int t, UNetCache<T>* cache) {
    check_chw(x);
    if (x.shape[0] != net.cfg.in_ch) throw std::invalid_argument("unet: input channel mismatch");
    if (x.shape[1] % 4 || x.shape[2] % 4)
        throw std::invalid_argument("unet: spatial size must be divisible by 4");

    CacheHandle<T> local_owner_guard;
    UNetCache<T>& cc = cache ? *cache : *local_owner_guard.ptr;

    cc.e = timestep_embedding<T>(t, net.cfg.temb_dim);
    cc.zpre = Tensor<T>({net.cfg.temb_dim});
    {
        Eigen::Map<const MatRM<T>> wm(net.time_trunk.w.ptr(), net.time_trunk.out_f,
                                      net.time_trunk.in_f);
        Eigen::Map<const VecE<T>> ev(cc.e.ptr(), cc.e.size());
        Eigen::Map<VecE<T>> zv(cc.zpre.ptr(), cc.zpre.size());
        zv.noalias() = wm * ev;
        for (int i = 0; i < net.time_trunk.out_f; ++i) zv[i] += net.time_trunk.b.data[i];
    }
    cc.u = silu_forward(cc.zpre);

    cc.x_in = x;
    cc.stem_out = conv2d_forward(net.stem, x);
    cc.h1 = res_forward(net.enc1, cc.stem_out, cc.u, cc.enc1);
    cc.p1 = avgpool2_forward(cc.h1);
    cc.h2 = res_forward(net.enc2, cc.p1, cc.u, cc.enc2);
    cc.p2 = avgpool2_forward(cc.h2);
    cc.hm = res_forward(net.mid, cc.p2, cc.u, cc.mid);
    cc.u2 = upsample2_forward(cc.hm);
    cc.cat2 = concat_ch(cc.u2, cc.h2);
    cc.d2 = res_forward(net.dec2, cc.cat2, cc.u, cc.dec2);
    cc.u1 = upsample2_forward(cc.d2);
    cc.cat1 = concat_ch(cc.u1, cc.h1);
    cc.d1 = res_forward(net.dec1, cc.cat1, cc.u, cc.dec1);
    return conv2d_forward(net.head, cc.d1);
}

template <typename T>
Tensor<T> unet_backward(const UNet<T>& net, const UNetCache<T>& cc, const Tensor<T>& dy,
                        UNet<T>& g) {
    Tensor<T> du({net.cfg.temb_dim});

    Tensor<T> dd1 = conv2d_backward(net.head, cc.d1, dy, g.head);
    Tensor<T> dcat1 = res_backward(net.dec1, cc.dec1, cc.u, dd1, g.dec1, du);
    Tensor<T> du1({cc.u1.shape[0], cc.u1.shape[1], cc.u1.shape[2]});
    Tensor<T> dh1({cc.h1.shape[0], cc.h1.shape[1], cc.h1.shape[2]});
    split_ch(dcat1, du1, dh1);
    Tensor<T> dd2 = upsample2_backward(du1);
    Tensor<T> dcat2 = res_backward(net.dec2, cc.dec2, cc.u, dd2, g.dec2, du);
    Tensor<T> du2({cc.u2.shape[0], cc.u2.shape[1], cc.u2.shape[2]});
    Tensor<T> dh2({cc.h2.shape[0], cc.h2.shape[1], cc.h2.shape[2]});
    split_ch(dcat2, du2, dh2);
    Tensor<T> dhm = upsample2_backward(du2);
    Tensor<T> dp2 = res_backward(net.mid, cc.mid, cc.u, dhm, g.mid, du);
    Tensor<T> dh2b = avgpool2_backward(dp2, cc.h2.shape[1], cc.h2.shape[2]);
    for (size_t i = 0; i < dh2.size(); ++i) dh2.data[i] += dh2b.data[i];
    Tensor<T> dp1 = res_backward(net.enc2, cc.enc2, cc.u, dh2, g.enc2, du);
    Tensor<T> dh1b = avgpool2_backward(dp1, cc.h1.shape[1], cc.h1.shape[2]);
    for (size_t i = 0; i < dh1.size(); ++i) dh1.data[i] += dh1b.data[i];
    Tensor<T> dstem = res_backward(net.enc1, cc.enc1, cc.u, dh1, g.enc1, du);
    Tensor<T> dx = conv2d_backward(net.stem, cc.x_in, dstem, g.stem);

    // trunk: u = silu(W e + b)
    Tensor<T> dz = silu_backward(cc.zpre, du);
    {
        Eigen::Map<MatRM<T>> dwm(g.time_trunk.w.ptr(), net.time_trunk.out_f,
                                 net.time_trunk.in_f);
        Eigen::Map<const VecE<T>> ev(cc.e.ptr(), cc.e.size());
        Eigen::Map<const VecE<T>> dzv(dz.ptr(), dz.size());
        dwm.noalias() += dzv * ev.transpose();
        for (int i = 0; i < net.time_trunk.out_f; ++i) g.time_trunk.b.data[i] += dz.data[i];
    }
    return dx;
}

// ---------------------------------------------------------------------------
// construction and traversal
// ---------------------------------------------------------------------------

namespace {

template <typename T>
Conv2d<T> make_conv(int in_ch, int out_ch, int k, Rng& rng, double gain = 1.0) {
    Conv2d<T> c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.k = k;
    c.w = Tensor<T>({out_ch, in_ch, k, k});
    c.b = Tensor<T>({out_ch});
    double std = gain * std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (auto& v : c.w.data) v = static_cast<T>(std * rng.normal());
    return c;
}

template <typename T>
Linear<T> make_linear(int in_f, int out_f, Rng& rng, double std) {
    Linear<T> l;
    l.in_f = in_f;
    l.out_f = out_f;
    l.w = Tensor<T>({out_f, in_f});
    l.b = Tensor<T>({out_f});
    for (auto& v : l.w.data) v = static_cast<T>(std * rng.normal());
    return l;
}

template <typename T>
GroupNorm<T> make_gn(int channels, int groups) {
    GroupNorm<T> gn;
    gn.channels = channels;
    gn.groups = groups;
    gn.gamma = Tensor<T>({channels});
    gn.beta = Tensor<T>({channels});
    gn.gamma.fill(T(1));
    return gn;
}

template <typename T>
ResBlock<T> make_res(int in_ch, int out_ch, const UNetConfig& cfg, Rng& rng) {
    ResBlock<T> b;
    b.gn1 = make_gn<T>(in_ch, cfg.groups);
    b.conv1 = make_conv<T>(in_ch, out_ch, 3, rng);
    b.film = make_linear<T>(cfg.temb_dim, 2 * out_ch, rng, 0.0);  // starts as identity FiLM
    b.gn2 = make_gn<T>(out_ch, cfg.groups);
    b.conv2 = make_conv<T>(out_ch, out_ch, 3, rng);
    if (in_ch != out_ch) b.skip = make_conv<T>(in_ch, out_ch, 1, rng);
    return b;
}

template <typename T, typename Net, typename Fn>
void visit_params_impl(Net& net, const Fn& fn) {
    fn("stem.w", net.stem.w);
    fn("stem.b", net.stem.b);
    fn("time_trunk.w", net.time_trunk.w);
    fn("time_trunk.b", net.time_trunk.b);
    auto block = [&](const std::string& name, auto& blk) {
        fn(name + ".gn1.gamma", blk.gn1.gamma);
        fn(name + ".gn1.beta", blk.gn1.beta);
        fn(name + ".conv1.w", blk.conv1.w);
        fn(name + ".conv1.b", blk.conv1.b);
        fn(name + ".film.w", blk.film.w);
        fn(name + ".film.b", blk.film.b);
        fn(name + ".gn2.gamma", blk.gn2.gamma);
        fn(name + ".gn2.beta", blk.gn2.beta);
        fn(name + ".conv2.w", blk.conv2.w);
        fn(name + ".conv2.b", blk.conv2.b);
        if (blk.skip) {
            fn(name + ".skip.w", blk.skip->w);
            fn(name + ".skip.b", blk.skip->b);
        }
    };
    block("enc1", net.enc1);
    block("enc2", net.enc2);
    block("mid", net.mid);
    block("dec2", net.dec2);
    block("dec1", net.dec1);
    fn("head.w", net.head.w);
    fn("head.b", net.head.b);
}

template <typename T, typename Net, typename Fn>
void visit_convs_impl(Net& net, const Fn& fn) {
    fn("stem", net.stem);
    auto block = [&](const std::string& name, auto& blk) {
        fn(name + ".conv1", blk.conv1);
        fn(name + ".conv2", blk.conv2);
        if (blk.skip) fn(name + ".skip", *blk.skip);
    };
    block("enc1", net.enc1);
    block("enc2", net.enc2);
    block("mid", net.mid);
    block("dec2", net.dec2);
    block("dec1", net.dec1);
    fn("head", net.head);
}

}  // namespace

template <typename T>
UNet<T> make_unet(const UNetConfig& cfg, Rng& rng) {
    if (cfg.base % cfg.groups != 0)
        throw std::invalid_argument("unet: base width must be divisible by group count");
    UNet<T> net;
    net.cfg = cfg;
    int w = cfg.base;
    net.stem = make_conv<T>(cfg.in_ch, w, 3, rng);
    net.time_trunk = make_linear<T>(cfg.temb_dim, cfg.temb_dim, rng,
                                    std::sqrt(2.0 / cfg.temb_dim));
    net.enc1 = make_res<T>(w, w, cfg, rng);
    net.enc2 = make_res<T>(w, 2 * w, cfg, rng);
    net.mid = make_res<T>(2 * w, 2 * w, cfg, rng);
    net.dec2 = make_res<T>(4 * w, 2 * w, cfg, rng);
    net.dec1 = make_res<T>(3 * w, w, cfg, rng);
    net.head = make_conv<T>(w, cfg.out_ch, 3, rng, 0.1);
    return net;
}

template <typename T>
void visit_params(UNet<T>& net,
                  const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    visit_params_impl<T>(net, fn);
}
template <typename T>
void visit_params(const UNet<T>& net,
                  const std::function<void(const std::string&, const Tensor<T>&)>& fn) {
    visit_params_impl<T>(net, fn);
}
template <typename T>
void visit_convs(UNet<T>& net, const std::function<void(const std::string&, Conv2d<T>&)>& fn) {
    visit_convs_impl<T>(net, fn);
}
template <typename T>
void visit_convs(const UNet<T>& net,
                 const std::function<void(const std::string&, const Conv2d<T>&)>& fn) {
    visit_convs_impl<T>(net, fn);
}

template <typename T>
UNet<T> zeros_like(const UNet<T>& net) {
    UNet<T> z = net;
    visit_params<T>(z, [](const std::string&, Tensor<T>& t) { t.fill(T(0)); });
    return z;
}

template <typename T>
void accumulate(UNet<T>& dst, const UNet<T>& src) {
    std::vector<Tensor<T>*> d;
    visit_params<T>(dst, [&](const std::string&, Tensor<T>& t) { d.push_back(&t); });
    size_t i = 0;
    visit_params<T>(src, [&](const std::string&, const Tensor<T>& t) {
        accumulate(*d[i++], t);
    });
}

uint64_t param_checksum_bits(const UNet<float>& net) {
    uint64_t h = 1469598103934665603ull;
    visit_params<float>(net, [&](const std::string& name, const Tensor<float>& t) {
        for (char ch : name) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        for (float v : t.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 1099511628211ull;
            }
        }
    });
    return h;
}

#define RELIGHT_INSTANTIATE(T)                                                              \
    template struct UNetCache<T>;                                                           \
    template UNetCache<T>* new_unet_cache<T>();                                             \
    template void free_unet_cache<T>(UNetCache<T>*);                                        \
    template Tensor<T> timestep_embedding<T>(int, int);                                     \
    template Tensor<T> unet_forward<T>(const UNet<T>&, const Tensor<T>&, int, UNetCache<T>*); \
    template Tensor<T> unet_backward<T>(const UNet<T>&, const UNetCache<T>&, const Tensor<T>&, \
                                        UNet<T>&);                                          \
    template UNet<T> make_unet<T>(const UNetConfig&, Rng&);                                 \
    template void visit_params<T>(UNet<T>&,                                                 \
                                  const std::function<void(const std::string&, Tensor<T>&)>&); \
    template void visit_params<T>(                                                          \
        const UNet<T>&, const std::function<void(const std::string&, const Tensor<T>&)>&); \
    template void visit_convs<T>(UNet<T>&,                                                  \
                                 const std::function<void(const std::string&, Conv2d<T>&)>&); \
    template void visit_convs<T>(                                                           \
        const UNet<T>&, const std::function<void(const std::string&, const Conv2d<T>&)>&); \
    template UNet<T> zeros_like<T>(const UNet<T>&);                                         \
    template void accumulate<T>(UNet<T>&, const UNet<T>&);

RELIGHT_INSTANTIATE(float)
RELIGHT_INSTANTIATE(double)
#undef RELIGHT_INSTANTIATE

}  // namespace relight
