#include <cstring>
#include <vector>

#include "gaitma/errors.hpp"
#include "gaitma/ops.hpp"
#include "gemm.hpp"

namespace gaitma::ops {

namespace {

struct ConvDims {
    int ci, t, h, w;
    int co, kt, k;
    int st, ss, pt, ps;
    int to, ho, wo;
    std::int64_t krows;  // ci*kt*k*k, the GEMM contraction extent
    std::int64_t ncols;  // ho*wo, output pixels per frame
};

int out_extent(int in, int pad, int kernel, int stride, const char* what) {
    int num = in + 2 * pad - kernel;
    if (num < 0 || num % stride != 0)
        throw InvalidArgument(std::string("conv: non-integral output ") + what + " extent (in=" + std::to_string(in) +
                              " pad=" + std::to_string(pad) + " k=" + std::to_string(kernel) +
                              " stride=" + std::to_string(stride) + ")");
    return num / stride + 1;
}

ConvDims conv_dims(const Tensor& x, const Tensor& kern, const Tensor* bias, int st, int ss, int pt, int ps) {
    if (x.rank() != 4) throw InvalidArgument("conv3d: input must be Ci×T×H×W, got " + dims_to_string(x.dims()));
    if (kern.rank() != 5)
        throw InvalidArgument("conv3d: kernels must be Co×Ci×kt×k×k, got " + dims_to_string(kern.dims()));
    ConvDims cd;
    cd.ci = x.dim(0);
    cd.t = x.dim(1);
    cd.h = x.dim(2);
    cd.w = x.dim(3);
    cd.co = kern.dim(0);
    cd.kt = kern.dim(2);
    cd.k = kern.dim(3);
    if (kern.dim(1) != cd.ci)
        throw InvalidArgument("conv3d: kernel input channels " + std::to_string(kern.dim(1)) +
                              " do not match input " + std::to_string(cd.ci));
    if (kern.dim(4) != cd.k) throw InvalidArgument("conv3d: spatial kernel must be square");
    if (cd.kt % 2 == 0 || cd.k % 2 == 0) throw InvalidArgument("conv3d: kernel extents must be odd");
    if (st < 1 || ss < 1 || pt < 0 || ps < 0) throw InvalidArgument("conv3d: invalid stride or pad");
    cd.st = st;
    cd.ss = ss;
    cd.pt = pt;
    cd.ps = ps;
    cd.to = out_extent(cd.t, pt, cd.kt, st, "temporal");
    cd.ho = out_extent(cd.h, ps, cd.k, ss, "height");
    cd.wo = out_extent(cd.w, ps, cd.k, ss, "width");
    cd.krows = static_cast<std::int64_t>(cd.ci) * cd.kt * cd.k * cd.k;
    cd.ncols = static_cast<std::int64_t>(cd.ho) * cd.wo;
    if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != cd.co))
        throw InvalidArgument("conv3d: bias must have length Co");
    return cd;
}

// Patch matrix for one output frame: row ((ci*kt+dt)*k+dh)*k+dw matches the
// kernel memory order, column oh*Wo+ow. Out-of-range taps read as zero.
void im2col_frame(const Tensor& x, const ConvDims& cd, int t0, double* col) {
    const std::int64_t n = cd.ncols;
    for (int ci = 0; ci < cd.ci; ++ci) {
        for (int dt = 0; dt < cd.kt; ++dt) {
            int t_in = t0 * cd.st - cd.pt + dt;
            double* block = col + (static_cast<std::int64_t>(ci) * cd.kt + dt) * cd.k * cd.k * n;
            if (t_in < 0 || t_in >= cd.t) {
                std::memset(block, 0, static_cast<std::size_t>(cd.k) * cd.k * n * sizeof(double));
                continue;
            }
            for (int dh = 0; dh < cd.k; ++dh) {
                for (int dw = 0; dw < cd.k; ++dw) {
                    double* row = block + (static_cast<std::int64_t>(dh) * cd.k + dw) * n;
                    for (int oh = 0; oh < cd.ho; ++oh) {
                        int ih = oh * cd.ss - cd.ps + dh;
                        double* dst = row + static_cast<std::int64_t>(oh) * cd.wo;
                        if (ih < 0 || ih >= cd.h) {
                            std::memset(dst, 0, static_cast<std::size_t>(cd.wo) * sizeof(double));
                            continue;
                        }
                        const double* src = x.data() + x.offset(ci, t_in, ih, 0);
                        for (int ow = 0; ow < cd.wo; ++ow) {
                            int iw = ow * cd.ss - cd.ps + dw;
                            dst[ow] = (iw >= 0 && iw < cd.w) ? src[iw] : 0.0;
                        }
                    }
                }
            }
        }
    }
}

void col2im_frame_add(Tensor& dx, const ConvDims& cd, int t0, const double* col) {
    const std::int64_t n = cd.ncols;
    for (int ci = 0; ci < cd.ci; ++ci) {
        for (int dt = 0; dt < cd.kt; ++dt) {
            int t_in = t0 * cd.st - cd.pt + dt;
            if (t_in < 0 || t_in >= cd.t) continue;
            const double* block = col + (static_cast<std::int64_t>(ci) * cd.kt + dt) * cd.k * cd.k * n;
            for (int dh = 0; dh < cd.k; ++dh) {
                for (int dw = 0; dw < cd.k; ++dw) {
                    const double* row = block + (static_cast<std::int64_t>(dh) * cd.k + dw) * n;
                    for (int oh = 0; oh < cd.ho; ++oh) {
                        int ih = oh * cd.ss - cd.ps + dh;
                        if (ih < 0 || ih >= cd.h) continue;
                        double* dst = dx.data() + dx.offset(ci, t_in, ih, 0);
                        const double* src = row + static_cast<std::int64_t>(oh) * cd.wo;
                        for (int ow = 0; ow < cd.wo; ++ow) {
                            int iw = ow * cd.ss - cd.ps + dw;
                            if (iw >= 0 && iw < cd.w) dst[iw] += src[ow];
                        }
                    }
                }
            }
        }
    }
}

Var conv3d_impl(Var x, Var kernels, const Var* bias, int st, int ss, int pt, int ps) {
    Tape& t = *x.tape;
    if (x.tape != kernels.tape || (bias != nullptr && bias->tape != x.tape))
        throw InvalidArgument("conv3d: inputs belong to different tapes");
    const Tensor& xv = x.value();
    const Tensor& kv = kernels.value();
    const Tensor* bv = bias != nullptr ? &bias->value() : nullptr;
    ConvDims cd = conv_dims(xv, kv, bv, st, ss, pt, ps);

    Tensor out({cd.co, cd.to, cd.ho, cd.wo});
    std::vector<double> col(static_cast<std::size_t>(cd.krows * cd.ncols));
    std::vector<double> frame(static_cast<std::size_t>(cd.co) * cd.ncols);
    for (int t0 = 0; t0 < cd.to; ++t0) {
        im2col_frame(xv, cd, t0, col.data());
        detail::gemm(false, false, cd.co, static_cast<int>(cd.ncols), static_cast<int>(cd.krows), 1.0, kv.data(),
                     static_cast<int>(cd.krows), col.data(), static_cast<int>(cd.ncols), 0.0, frame.data(),
                     static_cast<int>(cd.ncols));
        for (int co = 0; co < cd.co; ++co) {
            double b = bv != nullptr ? bv->at(co) : 0.0;
            const double* src = frame.data() + static_cast<std::int64_t>(co) * cd.ncols;
            double* dst = out.data() + out.offset(co, t0, 0, 0);
            for (std::int64_t i = 0; i < cd.ncols; ++i) dst[i] = src[i] + b;
        }
    }

    std::vector<int> parents = {x.id, kernels.id};
    int bid = -1;
    if (bias != nullptr) {
        bid = bias->id;
        parents.push_back(bid);
    }
    int xid = x.id, kid = kernels.id;
    return t.node(std::move(out), std::move(parents), [xid, kid, bid, cd](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(xid);
        const Tensor& kv = tp.value(kid);
        bool need_x = tp.requires_grad(xid);
        bool need_k = tp.requires_grad(kid);
        bool need_b = bid >= 0 && tp.requires_grad(bid);
        std::vector<double> col(static_cast<std::size_t>(cd.krows * cd.ncols));
        std::vector<double> gframe(static_cast<std::size_t>(cd.co) * cd.ncols);
        std::vector<double> dcol(need_x ? static_cast<std::size_t>(cd.krows * cd.ncols) : 0);
        for (int t0 = 0; t0 < cd.to; ++t0) {
            for (int co = 0; co < cd.co; ++co) {
                const double* src = g.data() + g.offset(co, t0, 0, 0);
                double* dst = gframe.data() + static_cast<std::int64_t>(co) * cd.ncols;
                std::memcpy(dst, src, static_cast<std::size_t>(cd.ncols) * sizeof(double));
            }
            if (need_b) {
                Tensor& gb = tp.grad(bid);
                for (int co = 0; co < cd.co; ++co) {
                    const double* src = gframe.data() + static_cast<std::int64_t>(co) * cd.ncols;
                    double s = 0.0;
                    for (std::int64_t i = 0; i < cd.ncols; ++i) s += src[i];
                    gb.at(co) += s;
                }
            }
            if (need_k || need_x) im2col_frame(xv, cd, t0, col.data());
            if (need_k)
                detail::gemm(false, true, cd.co, static_cast<int>(cd.krows), static_cast<int>(cd.ncols), 1.0,
                             gframe.data(), static_cast<int>(cd.ncols), col.data(), static_cast<int>(cd.ncols), 1.0,
                             tp.grad(kid).data(), static_cast<int>(cd.krows));
            if (need_x) {
                detail::gemm(true, false, static_cast<int>(cd.krows), static_cast<int>(cd.ncols), cd.co, 1.0,
                             kv.data(), static_cast<int>(cd.krows), gframe.data(), static_cast<int>(cd.ncols), 0.0,
                             dcol.data(), static_cast<int>(cd.ncols));
                col2im_frame_add(tp.grad(xid), cd, t0, dcol.data());
            }
        }
    });
}

Var expand_kernels(Var kernels4) {
    const Tensor& kv = kernels4.value();
    if (kv.rank() != 4)
        throw InvalidArgument("conv2d: kernels must be Co×Ci×k×k, got " + dims_to_string(kv.dims()));
    return reshape(kernels4, {kv.dim(0), kv.dim(1), 1, kv.dim(2), kv.dim(3)});
}

}  // namespace

Var conv3d(Var x, Var kernels, Var bias, int stride_t, int stride_s, int pad_t, int pad_s) {
    return conv3d_impl(x, kernels, &bias, stride_t, stride_s, pad_t, pad_s);
}

Var conv3d(Var x, Var kernels, int stride_t, int stride_s, int pad_t, int pad_s) {
    return conv3d_impl(x, kernels, nullptr, stride_t, stride_s, pad_t, pad_s);
}

Var conv2d_seq(Var x, Var kernels, Var bias, int stride, int pad) {
    return conv3d(x, expand_kernels(kernels), bias, 1, stride, 0, pad);
}

Var conv2d_seq(Var x, Var kernels, int stride, int pad) {
    return conv3d(x, expand_kernels(kernels), 1, stride, 0, pad);
}

Var conv2d(Var x, Var kernels, Var bias, int stride, int pad) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw InvalidArgument("conv2d: input must be Ci×H×W, got " + dims_to_string(xv.dims()));
    Var x4 = reshape(x, {xv.dim(0), 1, xv.dim(1), xv.dim(2)});
    Var out = conv2d_seq(x4, kernels, bias, stride, pad);
    const Tensor& ov = out.value();
    return reshape(out, {ov.dim(0), ov.dim(2), ov.dim(3)});
}

Var conv2d(Var x, Var kernels, int stride, int pad) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw InvalidArgument("conv2d: input must be Ci×H×W, got " + dims_to_string(xv.dims()));
    Var x4 = reshape(x, {xv.dim(0), 1, xv.dim(1), xv.dim(2)});
    Var out = conv2d_seq(x4, kernels, stride, pad);
    const Tensor& ov = out.value();
    return reshape(out, {ov.dim(0), ov.dim(2), ov.dim(3)});
}

}  // namespace gaitma::ops
