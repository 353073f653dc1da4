#include "viewgrid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace viewgrid::ops {

namespace {

Tape& same_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw std::invalid_argument("ops: operands are not on the same tape");
    return *a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    out.add_inplace(b.value());
    std::size_t ia = a.id, ib = b.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t id) {
        t.grad(ia).add_inplace(t.grad(id));
        t.grad(ib).add_inplace(t.grad(id));
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    out.axpy_inplace(-1.0, b.value());
    std::size_t ia = a.id, ib = b.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t id) {
        t.grad(ia).add_inplace(t.grad(id));
        t.grad(ib).axpy_inplace(-1.0, t.grad(id));
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    std::size_t ia = a.id, ib = b.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        Tensor& ga = t.grad(ia);
        Tensor& gb = t.grad(ib);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv[i];
            gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    out.scale_inplace(s);
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia, s](Tape& t, std::size_t id) {
        t.grad(ia).axpy_inplace(s, t.grad(id));
    });
}

Var add_scalar(Var a, double s) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia](Tape& t, std::size_t id) {
        t.grad(ia).add_inplace(t.grad(id));
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.value(id);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var relu(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& x = t.value(ia);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

Var exp(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.value(id);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
}

Var square(Var a) { return mul(a, a); }

Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
    std::size_t ia = a.id;
    return t.emit(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t id) {
        double g = t.grad(id).item();
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var reshape(Var a, std::vector<std::size_t> shape) {
    Tape& t = *a.tape;
    if (Tensor::count(shape) != a.value().size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out = a.value();
    std::vector<double> data(out.data(), out.data() + out.size());
    std::size_t ia = a.id;
    return t.emit(Tensor(std::move(shape), std::move(data)), {ia},
                  [ia](Tape& t, std::size_t id) {
                      const Tensor& g = t.grad(id);
                      Tensor& ga = t.grad(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  });
}

Var concat0(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat0: no inputs");
    Tape& t = *parts[0].tape;
    std::vector<std::size_t> shape = parts[0].value().shape();
    if (shape.empty()) throw std::invalid_argument("concat0: scalar inputs");
    std::size_t total0 = 0;
    for (const Var& p : parts) {
        const auto& s = p.value().shape();
        if (s.size() != shape.size())
            throw std::invalid_argument("concat0: rank mismatch");
        for (std::size_t d = 1; d < shape.size(); ++d)
            if (s[d] != shape[d]) throw std::invalid_argument("concat0: trailing dims differ");
        total0 += s[0];
    }
    shape[0] = total0;
    Tensor out(shape);
    std::vector<std::size_t> ids;
    std::vector<std::size_t> sizes;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        std::copy(v.data(), v.data() + v.size(), out.data() + off);
        off += v.size();
        ids.push_back(p.id);
        sizes.push_back(v.size());
    }
    return t.emit(std::move(out), ids, [ids, sizes](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Tensor& gp = t.grad(ids[k]);
            for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += g[off + i];
            off += sizes[k];
        }
    });
}

Var at(Var a, std::size_t flat_index) {
    Tape& t = *a.tape;
    if (flat_index >= a.value().size()) throw std::out_of_range("at: index out of range");
    std::size_t ia = a.id;
    return t.emit(Tensor::scalar(a.value()[flat_index]), {ia},
                  [ia, flat_index](Tape& t, std::size_t id) {
                      t.grad(ia)[flat_index] += t.grad(id).item();
                  });
}

Var stack_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_scalars: no inputs");
    Tape& t = *xs[0].tape;
    Tensor out({xs.size()});
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i] = xs[i].value().item();
        ids.push_back(xs[i].id);
    }
    return t.emit(std::move(out), ids, [ids](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        for (std::size_t i = 0; i < ids.size(); ++i) t.grad(ids[i])[0] += g[i];
    });
}

Var slice_lastdim(Var a, std::size_t from, std::size_t to) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() == 0) throw std::invalid_argument("slice_lastdim: scalar input");
    std::size_t l = av.dim(av.rank() - 1);
    if (from >= to || to > l) throw std::invalid_argument("slice_lastdim: bad range");
    std::size_t rows = av.size() / l;
    std::size_t w = to - from;
    std::vector<std::size_t> shape = av.shape();
    shape.back() = w;
    Tensor out(shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) out[r * w + j] = av[r * l + from + j];
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia, rows, l, from, w](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(ia);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) ga[r * l + from + j] += g[r * w + j];
    });
}

Var chw_to_whc(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() != 3) throw std::invalid_argument("chw_to_whc: expected rank 3");
    std::size_t c = av.dim(0), h = av.dim(1), w = av.dim(2);
    Tensor out({w, h, c});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                out[(x * h + y) * c + ci] = av[(ci * h + y) * w + x];
    std::size_t ia = a.id;
    return t.emit(std::move(out), {ia}, [ia, c, h, w](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(ia);
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    ga[(ci * h + y) * w + x] += g[(x * h + y) * c + ci];
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + av.shape_str() + " " +
                                    bv.shape_str());
    std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
        }
    std::size_t ia = a.id, ib = b.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        Tensor& ga = t.grad(ia);  // g * b^T
        Tensor& gb = t.grad(ib);  // a^T * g
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double gij = g[i * n + j];
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    ga[i * k + p] += gij * bv[p * n + j];
                    gb[p * n + j] += av[i * k + p] * gij;
                }
            }
    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
        throw std::invalid_argument("matmul_nt: incompatible shapes");
    std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
            out[i * n + j] = s;
        }
    std::size_t ia = a.id, ib = b.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        Tensor& ga = t.grad(ia);  // g * b
        Tensor& gb = t.grad(ib);  // g^T * a
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double gij = g[i * n + j];
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    ga[i * k + p] += gij * bv[j * k + p];
                    gb[j * k + p] += gij * av[i * k + p];
                }
            }
    });
}

Var affine(Var x, Var w, Var b) {
    Tape& t = same_tape(x, w);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1 || wv.dim(1) != xv.dim(0) ||
        wv.dim(0) != bv.dim(0))
        throw std::invalid_argument("affine: incompatible shapes");
    std::size_t m = wv.dim(0), n = wv.dim(1);
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = bv[i];
        for (std::size_t j = 0; j < n; ++j) s += wv[i * n + j] * xv[j];
        out[i] = s;
    }
    std::size_t ix = x.id, iw = w.id, ib = b.id;
    return t.emit(std::move(out), {ix, iw, ib}, [ix, iw, ib, m, n](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& xv = t.value(ix);
        const Tensor& wv = t.value(iw);
        Tensor& gx = t.grad(ix);
        Tensor& gw = t.grad(iw);
        Tensor& gb = t.grad(ib);
        for (std::size_t i = 0; i < m; ++i) {
            double gi = g[i];
            gb[i] += gi;
            if (gi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                gx[j] += gi * wv[i * n + j];
                gw[i * n + j] += gi * xv[j];
            }
        }
    });
}

Var sub_row(Var rows, Var row) {
    Tape& t = same_tape(rows, row);
    const Tensor& rv = rows.value();
    const Tensor& sv = row.value();
    if (rv.rank() != 2 || sv.rank() != 1 || rv.dim(1) != sv.dim(0))
        throw std::invalid_argument("sub_row: incompatible shapes");
    std::size_t n = rv.dim(0), k = rv.dim(1);
    Tensor out = rv;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] -= sv[j];
    std::size_t ia = rows.id, ib = row.id;
    return t.emit(std::move(out), {ia, ib}, [ia, ib, n, k](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(ia);
        Tensor& gb = t.grad(ib);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                ga[i * k + j] += g[i * k + j];
                gb[j] -= g[i * k + j];
            }
    });
}

namespace {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                                std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
    Tape& t = same_tape(x, w);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
        throw std::invalid_argument("conv2d: bad ranks");
    std::size_t cin = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    std::size_t cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin || bv.dim(0) != cout)
        throw std::invalid_argument("conv2d: channel mismatch");
    std::size_t oh = conv_out_dim(h, kh, stride, pad);
    std::size_t ow = conv_out_dim(wd, kw, stride, pad);
    Tensor out({cout, oh, ow});
    const double* X = xv.data();
    const double* W = wv.data();
    double* O = out.data();
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double s = bv[co];
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                            static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const double* xr = X + (ci * h + iy) * wd;
                        const double* wr = W + ((co * cin + ci) * kh + ky) * kw;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                static_cast<std::ptrdiff_t>(pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                            s += xr[ix] * wr[kx];
                        }
                    }
                O[(co * oh + oy) * ow + ox] = s;
            }
    }
    std::size_t ix_ = x.id, iw_ = w.id, ib_ = b.id;
    return t.emit(std::move(out), {ix_, iw_, ib_},
                  [ix_, iw_, ib_, cin, h, wd, cout, kh, kw, oh, ow, stride,
                   pad](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& xv = t.value(ix_);
        const Tensor& wv = t.value(iw_);
        Tensor& gx = t.grad(ix_);
        Tensor& gw = t.grad(iw_);
        Tensor& gb = t.grad(ib_);
        const double* G = g.data();
        const double* X = xv.data();
        const double* W = wv.data();
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double go = G[(co * oh + oy) * ow + ox];
                    if (go == 0.0) continue;
                    gb[co] += go;
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                                std::size_t xoff = (ci * h + iy) * wd + ix;
                                std::size_t woff = ((co * cin + ci) * kh + ky) * kw + kx;
                                gx[xoff] += go * W[woff];
                                gw[woff] += go * X[xoff];
                            }
                        }
                }
    });
}

Var conv3d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
    Tape& t = same_tape(x, w);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 4 || wv.rank() != 5 || bv.rank() != 1)
        throw std::invalid_argument("conv3d: bad ranks");
    std::size_t cin = xv.dim(0), d = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
    std::size_t cout = wv.dim(0), kd = wv.dim(2), kh = wv.dim(3), kw = wv.dim(4);
    if (wv.dim(1) != cin || bv.dim(0) != cout)
        throw std::invalid_argument("conv3d: channel mismatch");
    std::size_t od = conv_out_dim(d, kd, stride, pad);
    std::size_t oh = conv_out_dim(h, kh, stride, pad);
    std::size_t ow = conv_out_dim(wd, kw, stride, pad);
    Tensor out({cout, od, oh, ow});
    const double* X = xv.data();
    const double* W = wv.data();
    auto xind = [=](std::size_t ci, std::size_t z, std::size_t y, std::size_t xx) {
        return ((ci * d + z) * h + y) * wd + xx;
    };
    auto wind = [=](std::size_t co, std::size_t ci, std::size_t kz, std::size_t ky,
                    std::size_t kx) {
        return (((co * cin + ci) * kd + kz) * kh + ky) * kw + kx;
    };
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t oz = 0; oz < od; ++oz)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double s = bv[co];
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t kz = 0; kz < kd; ++kz) {
                            std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(oz * stride + kz) -
                                                static_cast<std::ptrdiff_t>(pad);
                            if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(d)) continue;
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    std::ptrdiff_t ixx =
                                        static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
                                    if (ixx < 0 || ixx >= static_cast<std::ptrdiff_t>(wd))
                                        continue;
                                    s += X[xind(ci, iz, iy, ixx)] * W[wind(co, ci, kz, ky, kx)];
                                }
                            }
                        }
                    out[((co * od + oz) * oh + oy) * ow + ox] = s;
                }
    std::size_t ix_ = x.id, iw_ = w.id, ib_ = b.id;
    return t.emit(std::move(out), {ix_, iw_, ib_},
                  [ix_, iw_, ib_, cin, d, h, wd, cout, kd, kh, kw, od, oh, ow, stride, pad,
                   xind, wind](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& xv = t.value(ix_);
        const Tensor& wv = t.value(iw_);
        Tensor& gx = t.grad(ix_);
        Tensor& gw = t.grad(iw_);
        Tensor& gb = t.grad(ib_);
        const double* G = g.data();
        const double* X = xv.data();
        const double* W = wv.data();
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t oz = 0; oz < od; ++oz)
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        double go = G[((co * od + oz) * oh + oy) * ow + ox];
                        if (go == 0.0) continue;
                        gb[co] += go;
                        for (std::size_t ci = 0; ci < cin; ++ci)
                            for (std::size_t kz = 0; kz < kd; ++kz) {
                                std::ptrdiff_t iz =
                                    static_cast<std::ptrdiff_t>(oz * stride + kz) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(d)) continue;
                                for (std::size_t ky = 0; ky < kh; ++ky) {
                                    std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h))
                                        continue;
                                    for (std::size_t kx = 0; kx < kw; ++kx) {
                                        std::ptrdiff_t ixx =
                                            static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                            static_cast<std::ptrdiff_t>(pad);
                                        if (ixx < 0 || ixx >= static_cast<std::ptrdiff_t>(wd))
                                            continue;
                                        std::size_t xo = xind(ci, iz, iy, ixx);
                                        std::size_t wo = wind(co, ci, kz, ky, kx);
                                        gx[xo] += go * W[wo];
                                        gw[wo] += go * X[xo];
                                    }
                                }
                            }
                    }
    });
}

Var channel_mean(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() < 2) throw std::invalid_argument("channel_mean: rank must be >= 2");
    std::size_t c = xv.dim(0);
    std::size_t spatial = xv.size() / c;
    Tensor out({c});
    for (std::size_t ci = 0; ci < c; ++ci) {
        double s = 0.0;
        for (std::size_t i = 0; i < spatial; ++i) s += xv[ci * spatial + i];
        out[ci] = s / static_cast<double>(spatial);
    }
    std::size_t ix = x.id;
    return t.emit(std::move(out), {ix}, [ix, c, spatial](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(ix);
        double inv = 1.0 / static_cast<double>(spatial);
        for (std::size_t ci = 0; ci < c; ++ci) {
            double gi = g[ci] * inv;
            for (std::size_t i = 0; i < spatial; ++i) gx[ci * spatial + i] += gi;
        }
    });
}

Var l2_normalize(Var v, double eps) {
    Tape& t = *v.tape;
    const Tensor& xv = v.value();
    double sq = eps;
    for (std::size_t i = 0; i < xv.size(); ++i) sq += xv[i] * xv[i];
    double norm = std::sqrt(sq);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / norm;
    std::size_t ix = v.id;
    std::size_t n = xv.size();
    return t.emit(std::move(out), {ix}, [ix, n, norm](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.value(id);
        Tensor& gx = t.grad(ix);
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < n; ++i) gx[i] += (g[i] - y[i] * dot) / norm;
    });
}

Var cross_entropy(Var logits, std::size_t label) {
    Tape& t = *logits.tape;
    const Tensor& lv = logits.value();
    if (lv.rank() != 1 || lv.dim(0) < 2)
        throw std::invalid_argument("cross_entropy: logits must be a vector of length >= 2");
    if (label >= lv.dim(0)) throw std::out_of_range("cross_entropy: label out of range");
    std::size_t c = lv.dim(0);
    double mx = lv[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, lv[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < c; ++i) denom += std::exp(lv[i] - mx);
    double loss = std::log(denom) + mx - lv[label];
    std::size_t il = logits.id;
    return t.emit(Tensor::scalar(loss), {il}, [il, label, c](Tape& t, std::size_t id) {
        double g = t.grad(id).item();
        const Tensor& lv = t.value(il);
        Tensor& gl = t.grad(il);
        double mx = lv[0];
        for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, lv[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < c; ++i) denom += std::exp(lv[i] - mx);
        for (std::size_t i = 0; i < c; ++i) {
            double soft = std::exp(lv[i] - mx) / denom;
            gl[i] += g * (soft - (i == label ? 1.0 : 0.0));
        }
    });
}

Var frobenius_diff(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "frobenius_diff");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    double ss = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        ss += d * d;
    }
    double norm = std::sqrt(ss);
    std::size_t ia = a.id, ib = b.id;
    return t.emit(Tensor::scalar(norm), {ia, ib}, [ia, ib](Tape& t, std::size_t id) {
        double norm = t.value(id).item();
        if (norm == 0.0) return;  // subgradient 0 at equality
        double g = t.grad(id).item() / norm;
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        Tensor& ga = t.grad(ia);
        Tensor& gb = t.grad(ib);
        for (std::size_t i = 0; i < av.size(); ++i) {
            double d = g * (av[i] - bv[i]);
            ga[i] += d;
            gb[i] -= d;
        }
    });
}

}  // namespace viewgrid::ops
