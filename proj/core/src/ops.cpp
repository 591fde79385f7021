#include "gaitma/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "gaitma/errors.hpp"
#include "gemm.hpp"

namespace gaitma::ops {

namespace {

Tape& tape_of(const Var& v) {
    if (v.tape == nullptr || v.id < 0) throw InvalidArgument("op applied to an unbound Var");
    return *v.tape;
}

void require_same_tape(const Var& a, const Var& b) {
    if (a.tape != b.tape) throw InvalidArgument("op inputs belong to different tapes");
}

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank)
        throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got dims " +
                              dims_to_string(t.dims()));
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_dims(b))
        throw InvalidArgument(std::string(op) + ": dim mismatch " + dims_to_string(a.dims()) + " vs " +
                              dims_to_string(b.dims()));
}

void add_into(Tensor& dst, const Tensor& src) {
    double* d = dst.data();
    const double* s = src.data();
    for (std::int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

std::int64_t outer_of(const std::vector<int>& dims, int axis) {
    std::int64_t n = 1;
    for (int i = 0; i < axis; ++i) n *= dims[static_cast<std::size_t>(i)];
    return n;
}

std::int64_t inner_of(const std::vector<int>& dims, int axis) {
    std::int64_t n = 1;
    for (int i = axis + 1; i < static_cast<int>(dims.size()); ++i) n *= dims[static_cast<std::size_t>(i)];
    return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    require_same_tape(a, b);
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_dims(av, bv, "add");
    Tensor out(av.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    int aid = a.id, bid = b.id;
    return t.node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(aid)) add_into(tp.grad(aid), g);
        if (tp.requires_grad(bid)) add_into(tp.grad(bid), g);
    });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_dims(av, bv, "sub");
    Tensor out(av.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    int aid = a.id, bid = b.id;
    return t.node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(aid)) add_into(tp.grad(aid), g);
        if (tp.requires_grad(bid)) {
            Tensor& gb = tp.grad(bid);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_dims(av, bv, "mul");
    Tensor out(av.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    int aid = a.id, bid = b.id;
    return t.node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(aid);
        const Tensor& bv = tp.value(bid);
        if (tp.requires_grad(aid)) {
            Tensor& ga = tp.grad(aid);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.requires_grad(bid)) {
            Tensor& gb = tp.grad(bid);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var x, double s) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(xv.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = s * xv[i];
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, s](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (!tp.requires_grad(xid)) return;
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
    });
}

Var relu(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(xv.dims());
    std::uint64_t bits = 0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        bool pos = xv[i] > 0.0;
        out[i] = pos ? xv[i] : 0.0;
        bits = (bits << 1) | (pos ? 1u : 0u);
        if ((i & 63) == 63) {
            t.sig_mix(bits);
            bits = 0;
        }
    }
    t.sig_mix(bits);
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (!tp.requires_grad(xid)) return;
        const Tensor& xv = tp.value(xid);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < g.size(); ++i)
            if (xv[i] > 0.0) gx[i] += g[i];
    });
}

Var sigmoid(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(xv.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (!tp.requires_grad(xid)) return;
        const Tensor& y = tp.value(self);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var sqrt_elem(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(xv.dims());
    for (std::int64_t i = 0; i < out.size(); ++i) {
        if (xv[i] < 0.0) throw InvalidArgument("sqrt_elem: negative input");
        out[i] = std::sqrt(xv[i]);
        t.note_kink(xv[i]);
    }
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (!tp.requires_grad(xid)) return;
        const Tensor& y = tp.value(self);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] / (2.0 * std::max(y[i], 1e-9));
    });
}

Var sum_all(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) s += xv[i];
    int xid = x.id;
    return t.node(Tensor::scalar(s), {xid}, [xid](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        double g = tp.grad(self)[0];
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
}

Var reshape(Var x, std::vector<int> dims) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(dims, std::vector<double>(xv.data(), xv.data() + xv.size()));
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b, bool transpose_b) {
    require_same_tape(a, b);
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank(av, 2, "matmul");
    require_rank(bv, 2, "matmul");
    int n = av.dim(0), k = av.dim(1);
    int bk = transpose_b ? bv.dim(1) : bv.dim(0);
    int m = transpose_b ? bv.dim(0) : bv.dim(1);
    if (bk != k)
        throw InvalidArgument("matmul: dim mismatch " + dims_to_string(av.dims()) + " vs " +
                              dims_to_string(bv.dims()));
    Tensor out({n, m});
    detail::gemm(false, transpose_b, n, m, k, 1.0, av.data(), k, bv.data(), bv.dim(1), 0.0, out.data(), m);
    int aid = a.id, bid = b.id;
    return t.node(std::move(out), {aid, bid}, [aid, bid, transpose_b, n, m, k](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(aid);
        const Tensor& bv = tp.value(bid);
        if (tp.requires_grad(aid)) {
            // dA = G·Bᵀ, or G·B when B was transposed in the forward pass.
            detail::gemm(false, !transpose_b, n, k, m, 1.0, g.data(), m, bv.data(), bv.dim(1), 1.0,
                         tp.grad(aid).data(), k);
        }
        if (tp.requires_grad(bid)) {
            if (transpose_b) {
                detail::gemm(true, false, m, k, n, 1.0, g.data(), m, av.data(), k, 1.0, tp.grad(bid).data(), k);
            } else {
                detail::gemm(true, false, k, m, n, 1.0, av.data(), k, g.data(), m, 1.0, tp.grad(bid).data(), m);
            }
        }
    });
}

Var linear(Var x, Var weight, Var bias) {
    require_same_tape(x, weight);
    require_same_tape(x, bias);
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const Tensor& bv = bias.value();
    require_rank(xv, 2, "linear");
    require_rank(wv, 2, "linear");
    require_rank(bv, 1, "linear");
    int n = xv.dim(0), din = xv.dim(1), dout = wv.dim(1);
    if (wv.dim(0) != din || bv.dim(0) != dout)
        throw InvalidArgument("linear: dim mismatch x=" + dims_to_string(xv.dims()) +
                              " w=" + dims_to_string(wv.dims()) + " b=" + dims_to_string(bv.dims()));
    Tensor out({n, dout});
    detail::gemm(false, false, n, dout, din, 1.0, xv.data(), din, wv.data(), dout, 0.0, out.data(), dout);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dout; ++j) out.at(i, j) += bv.at(j);
    int xid = x.id, wid = weight.id, bid = bias.id;
    return t.node(std::move(out), {xid, wid, bid}, [xid, wid, bid, n, din, dout](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(xid))
            detail::gemm(false, true, n, din, dout, 1.0, g.data(), dout, tp.value(wid).data(), dout, 1.0,
                         tp.grad(xid).data(), din);
        if (tp.requires_grad(wid))
            detail::gemm(true, false, din, dout, n, 1.0, tp.value(xid).data(), din, g.data(), dout, 1.0,
                         tp.grad(wid).data(), dout);
        if (tp.requires_grad(bid)) {
            Tensor& gb = tp.grad(bid);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < dout; ++j) gb.at(j) += g.at(i, j);
        }
    });
}

Var transpose(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank(xv, 2, "transpose");
    int n = xv.dim(0), m = xv.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(j, i) = xv.at(i, j);
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, n, m](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) gx.at(i, j) += g.at(j, i);
    });
}

Var softmax_rows(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank(xv, 2, "softmax_rows");
    int n = xv.dim(0), m = xv.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        double mx = xv.at(i, 0);
        for (int j = 1; j < m; ++j) mx = std::max(mx, xv.at(i, j));
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            double e = std::exp(xv.at(i, j) - mx);
            out.at(i, j) = e;
            s += e;
        }
        for (int j = 0; j < m; ++j) out.at(i, j) /= s;
    }
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, n, m](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor& gx = tp.grad(xid);
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = 0; j < m; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < m; ++j) gx.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
    require_same_tape(x, gain);
    require_same_tape(x, shift);
    if (eps <= 0.0) throw InvalidArgument("layer_norm: eps must be positive");
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    const Tensor& gv = gain.value();
    const Tensor& sv = shift.value();
    require_rank(xv, 2, "layer_norm");
    require_rank(gv, 1, "layer_norm");
    require_rank(sv, 1, "layer_norm");
    int n = xv.dim(0), m = xv.dim(1);
    if (gv.dim(0) != m || sv.dim(0) != m) throw InvalidArgument("layer_norm: gain/shift length must equal columns");
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < m; ++j) mu += xv.at(i, j);
        mu /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) {
            double d = xv.at(i, j) - mu;
            var += d * d;
        }
        var /= m;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < m; ++j) out.at(i, j) = gv.at(j) * ((xv.at(i, j) - mu) * inv) + sv.at(j);
    }
    int xid = x.id, gid = gain.id, sid = shift.id;
    return t.node(std::move(out), {xid, gid, sid}, [xid, gid, sid, n, m, eps](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(xid);
        const Tensor& gv = tp.value(gid);
        bool need_x = tp.requires_grad(xid);
        bool need_g = tp.requires_grad(gid);
        bool need_s = tp.requires_grad(sid);
        std::vector<double> xhat(static_cast<std::size_t>(m));
        std::vector<double> dxh(static_cast<std::size_t>(m));
        for (int i = 0; i < n; ++i) {
            double mu = 0.0;
            for (int j = 0; j < m; ++j) mu += xv.at(i, j);
            mu /= m;
            double var = 0.0;
            for (int j = 0; j < m; ++j) {
                double d = xv.at(i, j) - mu;
                var += d * d;
            }
            var /= m;
            double inv = 1.0 / std::sqrt(var + eps);
            for (int j = 0; j < m; ++j) xhat[static_cast<std::size_t>(j)] = (xv.at(i, j) - mu) * inv;
            if (need_g || need_s) {
                Tensor& gg = tp.grad(gid);
                Tensor& gs = tp.grad(sid);
                for (int j = 0; j < m; ++j) {
                    if (need_g) gg.at(j) += g.at(i, j) * xhat[static_cast<std::size_t>(j)];
                    if (need_s) gs.at(j) += g.at(i, j);
                }
            }
            if (need_x) {
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < m; ++j) {
                    dxh[static_cast<std::size_t>(j)] = g.at(i, j) * gv.at(j);
                    m1 += dxh[static_cast<std::size_t>(j)];
                    m2 += dxh[static_cast<std::size_t>(j)] * xhat[static_cast<std::size_t>(j)];
                }
                m1 /= m;
                m2 /= m;
                Tensor& gx = tp.grad(xid);
                for (int j = 0; j < m; ++j)
                    gx.at(i, j) += inv * (dxh[static_cast<std::size_t>(j)] - m1 -
                                          xhat[static_cast<std::size_t>(j)] * m2);
            }
        }
    });
}

Var column_mean(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank(xv, 2, "column_mean");
    int n = xv.dim(0), c = xv.dim(1);
    Tensor out({c});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) out.at(j) += xv.at(i, j);
    for (int j = 0; j < c; ++j) out.at(j) /= n;
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, n, c](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) gx.at(i, j) += g.at(j) / n;
    });
}

Var column_var(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank(xv, 2, "column_var");
    int n = xv.dim(0), c = xv.dim(1);
    if (n < 2) throw InvalidArgument("column_var: need at least 2 rows");
    Tensor out({c});
    std::vector<double> mu(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) mu[static_cast<std::size_t>(j)] += xv.at(i, j);
    for (int j = 0; j < c; ++j) mu[static_cast<std::size_t>(j)] /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            double d = xv.at(i, j) - mu[static_cast<std::size_t>(j)];
            out.at(j) += d * d;
        }
    for (int j = 0; j < c; ++j) out.at(j) /= n;
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, n, c, mu](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(xid);
        Tensor& gx = tp.grad(xid);
        // d var_j / d x_ij = 2 (x_ij - mu_j) / n; the mean's own dependence cancels.
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                gx.at(i, j) += g.at(j) * 2.0 * (xv.at(i, j) - mu[static_cast<std::size_t>(j)]) / n;
    });
}

// ---------------------------------------------------------------------------
// Shape surgery
// ---------------------------------------------------------------------------

Var concat(const std::vector<Var>& xs, int axis) {
    if (xs.empty()) throw InvalidArgument("concat: no inputs");
    Tape& t = tape_of(xs[0]);
    const Tensor& first = xs[0].value();
    int rank = first.rank();
    if (axis < 0 || axis >= rank) throw InvalidArgument("concat: axis out of range");
    int total = 0;
    for (const Var& v : xs) {
        require_same_tape(xs[0], v);
        const Tensor& tv = v.value();
        if (tv.rank() != rank) throw InvalidArgument("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && tv.dim(d) != first.dim(d))
                throw InvalidArgument("concat: dim mismatch " + dims_to_string(first.dims()) + " vs " +
                                      dims_to_string(tv.dims()));
        total += tv.dim(axis);
    }
    std::vector<int> out_dims = first.dims();
    out_dims[static_cast<std::size_t>(axis)] = total;
    Tensor out(out_dims);
    std::int64_t outer = outer_of(out_dims, axis);
    std::int64_t inner = inner_of(out_dims, axis);
    std::vector<int> ids;
    std::vector<int> extents;
    int off = 0;
    for (const Var& v : xs) {
        const Tensor& tv = v.value();
        int e = tv.dim(axis);
        for (std::int64_t o = 0; o < outer; ++o) {
            std::memcpy(out.data() + (o * total + off) * inner, tv.data() + o * e * inner,
                        static_cast<std::size_t>(e * inner) * sizeof(double));
        }
        ids.push_back(v.id);
        extents.push_back(e);
        off += e;
    }
    return t.node(std::move(out), ids, [ids, extents, outer, inner, total](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        int off = 0;
        for (std::size_t q = 0; q < ids.size(); ++q) {
            int e = extents[q];
            if (tp.requires_grad(ids[q])) {
                Tensor& gx = tp.grad(ids[q]);
                for (std::int64_t o = 0; o < outer; ++o) {
                    const double* src = g.data() + (o * total + off) * inner;
                    double* dst = gx.data() + o * e * inner;
                    for (std::int64_t i = 0; i < e * inner; ++i) dst[i] += src[i];
                }
            }
            off += e;
        }
    });
}

Var slice(Var x, int axis, int offset, int extent) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    int rank = xv.rank();
    if (axis < 0 || axis >= rank) throw InvalidArgument("slice: axis out of range");
    int e_in = xv.dim(axis);
    if (offset < 0 || extent <= 0 || offset + extent > e_in)
        throw InvalidArgument("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + extent) +
                              ") outside extent " + std::to_string(e_in));
    std::vector<int> out_dims = xv.dims();
    out_dims[static_cast<std::size_t>(axis)] = extent;
    Tensor out(out_dims);
    std::int64_t outer = outer_of(out_dims, axis);
    std::int64_t inner = inner_of(out_dims, axis);
    for (std::int64_t o = 0; o < outer; ++o) {
        std::memcpy(out.data() + o * extent * inner, xv.data() + (o * e_in + offset) * inner,
                    static_cast<std::size_t>(extent * inner) * sizeof(double));
    }
    int xid = x.id;
    return t.node(std::move(out), {xid}, [xid, offset, extent, e_in, outer, inner](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t o = 0; o < outer; ++o) {
            const double* src = g.data() + o * extent * inner;
            double* dst = gx.data() + (o * e_in + offset) * inner;
            for (std::int64_t i = 0; i < extent * inner; ++i) dst[i] += src[i];
        }
    });
}

std::vector<Var> split(Var x, int axis, const std::vector<int>& sizes) {
    const Tensor& xv = x.value();
    if (axis < 0 || axis >= xv.rank()) throw InvalidArgument("split: axis out of range");
    int total = 0;
    for (int s : sizes) {
        if (s <= 0) throw InvalidArgument("split: sizes must be positive");
        total += s;
    }
    if (total != xv.dim(axis))
        throw InvalidArgument("split: sizes sum to " + std::to_string(total) + ", extent is " +
                              std::to_string(xv.dim(axis)));
    std::vector<Var> parts;
    int off = 0;
    for (int s : sizes) {
        parts.push_back(slice(x, axis, off, s));
        off += s;
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

namespace {

Var pool_axis(Var x, PoolKind kind, int axis, int window, bool truncate_remainder) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    int rank = xv.rank();
    if (axis < 0 || axis >= rank) throw InvalidArgument("pool: axis out of range");
    if (window < 1) throw InvalidArgument("pool: empty window");
    int e_in = xv.dim(axis);
    if (!truncate_remainder && e_in % window != 0)
        throw InvalidArgument("pool: window " + std::to_string(window) + " does not divide extent " +
                              std::to_string(e_in));
    int e_out = e_in / window;
    if (e_out == 0) throw InvalidArgument("pool: window exceeds extent");
    std::vector<int> out_dims = xv.dims();
    out_dims[static_cast<std::size_t>(axis)] = e_out;
    Tensor out(out_dims);
    std::int64_t outer = outer_of(out_dims, axis);
    std::int64_t inner = inner_of(out_dims, axis);
    int xid = x.id;

    if (kind == PoolKind::kMax) {
        std::vector<int> choice(static_cast<std::size_t>(out.size()));
        for (std::int64_t o = 0; o < outer; ++o) {
            for (int e = 0; e < e_out; ++e) {
                for (std::int64_t i = 0; i < inner; ++i) {
                    double best = -std::numeric_limits<double>::infinity();
                    int bj = 0;
                    for (int j = 0; j < window; ++j) {
                        double v = xv[(o * e_in + e * window + j) * inner + i];
                        if (v > best) {
                            best = v;
                            bj = j;
                        }
                    }
                    std::int64_t oi = (o * e_out + e) * inner + i;
                    out[oi] = best;
                    choice[static_cast<std::size_t>(oi)] = bj;
                    t.sig_mix(static_cast<std::uint64_t>(bj));
                }
            }
        }
        return t.node(std::move(out), {xid},
                      [xid, choice = std::move(choice), outer, inner, e_in, e_out, window](Tape& tp, int self) {
                          if (!tp.requires_grad(xid)) return;
                          const Tensor& g = tp.grad(self);
                          Tensor& gx = tp.grad(xid);
                          for (std::int64_t o = 0; o < outer; ++o)
                              for (int e = 0; e < e_out; ++e)
                                  for (std::int64_t i = 0; i < inner; ++i) {
                                      std::int64_t oi = (o * e_out + e) * inner + i;
                                      int j = choice[static_cast<std::size_t>(oi)];
                                      gx[(o * e_in + e * window + j) * inner + i] += g[oi];
                                  }
                      });
    }

    for (std::int64_t o = 0; o < outer; ++o)
        for (int e = 0; e < e_out; ++e)
            for (std::int64_t i = 0; i < inner; ++i) {
                double s = 0.0;
                for (int j = 0; j < window; ++j) s += xv[(o * e_in + e * window + j) * inner + i];
                out[(o * e_out + e) * inner + i] = s / window;
            }
    return t.node(std::move(out), {xid}, [xid, outer, inner, e_in, e_out, window](Tape& tp, int self) {
        if (!tp.requires_grad(xid)) return;
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (std::int64_t o = 0; o < outer; ++o)
            for (int e = 0; e < e_out; ++e)
                for (std::int64_t i = 0; i < inner; ++i) {
                    double gv = g[(o * e_out + e) * inner + i] / window;
                    for (int j = 0; j < window; ++j) gx[(o * e_in + e * window + j) * inner + i] += gv;
                }
    });
}

}  // namespace

Var pool(Var x, PoolKind kind, std::vector<int> axes, int window, bool truncate_remainder) {
    if (axes.empty()) throw InvalidArgument("pool: no axes");
    std::sort(axes.begin(), axes.end());
    if (std::adjacent_find(axes.begin(), axes.end()) != axes.end())
        throw InvalidArgument("pool: duplicate axis");
    Var cur = x;
    for (int a : axes) cur = pool_axis(cur, kind, a, window, truncate_remainder);
    return cur;
}

// ---------------------------------------------------------------------------
// Per-part projection
// ---------------------------------------------------------------------------

Var part_linear(Var x, Var weights) {
    require_same_tape(x, weights);
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    const Tensor& wv = weights.value();
    require_rank(xv, 2, "part_linear");
    require_rank(wv, 3, "part_linear");
    int p = xv.dim(0), cin = xv.dim(1);
    if (wv.dim(0) != p || wv.dim(1) != cin)
        throw InvalidArgument("part_linear: dim mismatch x=" + dims_to_string(xv.dims()) +
                              " w=" + dims_to_string(wv.dims()));
    int cout = wv.dim(2);
    Tensor out({p, cout});
    for (int q = 0; q < p; ++q)
        detail::gemm(false, false, 1, cout, cin, 1.0, xv.data() + static_cast<std::int64_t>(q) * cin, cin,
                     wv.data() + static_cast<std::int64_t>(q) * cin * cout, cout, 0.0,
                     out.data() + static_cast<std::int64_t>(q) * cout, cout);
    int xid = x.id, wid = weights.id;
    return t.node(std::move(out), {xid, wid}, [xid, wid, p, cin, cout](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(xid);
        const Tensor& wv = tp.value(wid);
        for (int q = 0; q < p; ++q) {
            const double* gq = g.data() + static_cast<std::int64_t>(q) * cout;
            if (tp.requires_grad(xid))
                detail::gemm(false, true, 1, cin, cout, 1.0, gq, cout,
                             wv.data() + static_cast<std::int64_t>(q) * cin * cout, cout, 1.0,
                             tp.grad(xid).data() + static_cast<std::int64_t>(q) * cin, cin);
            if (tp.requires_grad(wid))
                detail::gemm(true, false, cin, cout, 1, 1.0, xv.data() + static_cast<std::int64_t>(q) * cin, cin, gq,
                             cout, 1.0, tp.grad(wid).data() + static_cast<std::int64_t>(q) * cin * cout, cout);
        }
    });
}

// ---------------------------------------------------------------------------
// Fused loss heads
// ---------------------------------------------------------------------------

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    Tape& t = tape_of(logits);
    const Tensor& zv = logits.value();
    require_rank(zv, 2, "softmax_cross_entropy");
    int n = zv.dim(0), classes = zv.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw InvalidArgument("softmax_cross_entropy: label count " + std::to_string(labels.size()) +
                              " does not match rows " + std::to_string(n));
    for (int y : labels)
        if (y < 0 || y >= classes) throw InvalidArgument("softmax_cross_entropy: label out of range");
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double mx = zv.at(i, 0);
        for (int j = 1; j < classes; ++j) mx = std::max(mx, zv.at(i, j));
        double s = 0.0;
        for (int j = 0; j < classes; ++j) s += std::exp(zv.at(i, j) - mx);
        loss += mx + std::log(s) - zv.at(i, labels[static_cast<std::size_t>(i)]);
    }
    loss /= n;
    int zid = logits.id;
    return t.node(Tensor::scalar(loss), {zid}, [zid, labels, n, classes](Tape& tp, int self) {
        if (!tp.requires_grad(zid)) return;
        double g = tp.grad(self)[0] / n;
        const Tensor& zv = tp.value(zid);
        Tensor& gz = tp.grad(zid);
        for (int i = 0; i < n; ++i) {
            double mx = zv.at(i, 0);
            for (int j = 1; j < classes; ++j) mx = std::max(mx, zv.at(i, j));
            double s = 0.0;
            for (int j = 0; j < classes; ++j) s += std::exp(zv.at(i, j) - mx);
            for (int j = 0; j < classes; ++j) {
                double y = std::exp(zv.at(i, j) - mx) / s;
                gz.at(i, j) += g * (y - (j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
            }
        }
    });
}

Var triplet_batch_all(Var embeddings, const std::vector<int>& labels, double margin, TripletStats* stats) {
    Tape& t = tape_of(embeddings);
    const Tensor& ev = embeddings.value();
    require_rank(ev, 2, "triplet_batch_all");
    int n = ev.dim(0), d = ev.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw InvalidArgument("triplet_batch_all: label count does not match rows");

    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = ev.at(i, k) - ev.at(j, k);
                s += diff * diff;
            }
            double dij = std::sqrt(s);
            dist[static_cast<std::size_t>(i) * n + j] = dij;
            dist[static_cast<std::size_t>(j) * n + i] = dij;
            t.note_kink(dij);
        }

    double sum = 0.0;
    int valid = 0, active = 0;
    std::uint64_t bits = 0;
    int nbits = 0;
    for (int a = 0; a < n; ++a)
        for (int p = 0; p < n; ++p) {
            if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)]) continue;
            for (int q = 0; q < n; ++q) {
                if (labels[static_cast<std::size_t>(q)] == labels[static_cast<std::size_t>(a)]) continue;
                double l = dist[static_cast<std::size_t>(a) * n + p] - dist[static_cast<std::size_t>(a) * n + q] +
                           margin;
                ++valid;
                bool hit = l > 0.0;
                bits = (bits << 1) | (hit ? 1u : 0u);
                if (++nbits == 64) {
                    t.sig_mix(bits);
                    bits = 0;
                    nbits = 0;
                }
                if (hit) {
                    sum += l;
                    ++active;
                }
            }
        }
    t.sig_mix(bits);
    double loss = active > 0 ? sum / active : 0.0;
    if (stats != nullptr) *stats = TripletStats{valid, active, valid == 0};

    int eid = embeddings.id;
    return t.node(Tensor::scalar(loss), {eid},
                  [eid, labels, margin, n, d, dist = std::move(dist), active](Tape& tp, int self) {
                      if (!tp.requires_grad(eid) || active == 0) return;
                      double s = tp.grad(self)[0] / active;
                      std::vector<double> coef(static_cast<std::size_t>(n) * n, 0.0);
                      for (int a = 0; a < n; ++a)
                          for (int p = 0; p < n; ++p) {
                              if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)])
                                  continue;
                              for (int q = 0; q < n; ++q) {
                                  if (labels[static_cast<std::size_t>(q)] == labels[static_cast<std::size_t>(a)])
                                      continue;
                                  double l = dist[static_cast<std::size_t>(a) * n + p] -
                                             dist[static_cast<std::size_t>(a) * n + q] + margin;
                                  if (l > 0.0) {
                                      coef[static_cast<std::size_t>(a) * n + p] += s;
                                      coef[static_cast<std::size_t>(a) * n + q] -= s;
                                  }
                              }
                          }
                      const Tensor& ev = tp.value(eid);
                      Tensor& ge = tp.grad(eid);
                      for (int i = 0; i < n; ++i)
                          for (int j = 0; j < n; ++j) {
                              double c = coef[static_cast<std::size_t>(i) * n + j];
                              double dij = dist[static_cast<std::size_t>(i) * n + j];
                              if (c == 0.0 || dij <= 0.0) continue;
                              double r = c / dij;
                              for (int k = 0; k < d; ++k) {
                                  double diff = ev.at(i, k) - ev.at(j, k);
                                  ge.at(i, k) += r * diff;
                                  ge.at(j, k) -= r * diff;
                              }
                          }
                  });
}

}  // namespace gaitma::ops
