#include "lwf/ops.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "lwf/error.hpp"

namespace lwf {

namespace {

NodePtr make_result(std::vector<int> shape, std::vector<double> value,
                    std::vector<NodePtr> parents, std::function<void(Node&)> bw,
                    const char* opname) {
    if (debug_checks_enabled()) check_finite(value, opname);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (grad_enabled()) {
        bool rq = false;
        for (const auto& p : parents) rq = rq || p->requires_grad;
        if (rq) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->backward_fn = std::move(bw);
        }
    }
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

void accum(Node& n, size_t i, double v) { n.grad[i] += v; }

// Parents that require grad get their buffers allocated before use.
Node* grad_target(Node& self, size_t parent_idx) {
    Node& p = *self.parents[parent_idx];
    if (!p.requires_grad) return nullptr;
    p.ensure_grad();
    return &p;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
            for (int pi : {0, 1}) {
                if (Node* p = grad_target(self, static_cast<size_t>(pi))) {
                    for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i]);
                }
            }
        },
        "add"));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i]);
            }
            if (Node* p = grad_target(self, 1)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, -self.grad[i]);
            }
        },
        "sub"));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
            const auto& av = self.parents[0]->value;
            const auto& bv = self.parents[1]->value;
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i] * bv[i]);
            }
            if (Node* p = grad_target(self, 1)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i] * av[i]);
            }
        },
        "mul"));
}

Tensor scale(const Tensor& a, double c) {
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = c * av[i];
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node()},
        [c](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, c * self.grad[i]);
            }
        },
        "scale"));
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    if (bias.rank() != 1 || a.rank() < 1 || a.shape().back() != bias.dim(0)) {
        throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match last dim of " + shape_str(a.shape()));
    }
    const auto& av = a.node()->value;
    const auto& bv = bias.node()->value;
    const size_t c = bv.size();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % c];
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node(), bias.node()},
        [c](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i]);
            }
            if (Node* p = grad_target(self, 1)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i % c, self.grad[i]);
            }
        },
        "add_bias"));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(p) * n];
            double* orow = &out[static_cast<size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return Tensor(make_result(
        {m, n}, std::move(out), {a.node(), b.node()},
        [m, k, n](Node& self) {
            const auto& av = self.parents[0]->value;
            const auto& bv = self.parents[1]->value;
            if (Node* pa = grad_target(self, 0)) {
                // dA = G * B^T
                for (int i = 0; i < m; ++i) {
                    const double* grow = &self.grad[static_cast<size_t>(i) * n];
                    double* arow = &pa->grad[static_cast<size_t>(i) * k];
                    for (int p = 0; p < k; ++p) {
                        const double* brow = &bv[static_cast<size_t>(p) * n];
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        arow[p] += acc;
                    }
                }
            }
            if (Node* pb = grad_target(self, 1)) {
                // dB = A^T * G
                for (int i = 0; i < m; ++i) {
                    const double* grow = &self.grad[static_cast<size_t>(i) * n];
                    const double* arow = &av[static_cast<size_t>(i) * k];
                    for (int p = 0; p < k; ++p) {
                        const double aip = arow[p];
                        if (aip == 0.0) continue;
                        double* brow = &pb->grad[static_cast<size_t>(p) * n];
                        for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
                    }
                }
            }
        },
        "matmul"));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank-2, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<size_t>(j) * m + i] = av[static_cast<size_t>(i) * n + j];
        }
    }
    return Tensor(make_result(
        {n, m}, std::move(out), {a.node()},
        [m, n](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        p->grad[static_cast<size_t>(i) * n + j] +=
                            self.grad[static_cast<size_t>(j) * m + i];
                    }
                }
            }
        },
        "transpose"));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        throw ShapeError("concat_cols: incompatible shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(static_cast<size_t>(m) * (ca + cb));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < ca; ++j) {
            out[static_cast<size_t>(i) * (ca + cb) + j] = av[static_cast<size_t>(i) * ca + j];
        }
        for (int j = 0; j < cb; ++j) {
            out[static_cast<size_t>(i) * (ca + cb) + ca + j] = bv[static_cast<size_t>(i) * cb + j];
        }
    }
    return Tensor(make_result(
        {m, ca + cb}, std::move(out), {a.node(), b.node()},
        [m, ca, cb](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < ca; ++j) {
                        p->grad[static_cast<size_t>(i) * ca + j] +=
                            self.grad[static_cast<size_t>(i) * (ca + cb) + j];
                    }
                }
            }
            if (Node* p = grad_target(self, 1)) {
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < cb; ++j) {
                        p->grad[static_cast<size_t>(i) * cb + j] +=
                            self.grad[static_cast<size_t>(i) * (ca + cb) + ca + j];
                    }
                }
            }
        },
        "concat_cols"));
}

Tensor reshape(const Tensor& a, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
    }
    return Tensor(make_result(
        std::move(new_shape), std::vector<double>(a.node()->value), {a.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) accum(*p, i, self.grad[i]);
            }
        },
        "reshape"));
}

Tensor sum_all(const Tensor& a) {
    const auto& av = a.node()->value;
    double s = 0.0;
    for (double v : av) s += v;
    return Tensor(make_result(
        {1}, {s}, {a.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < p->grad.size(); ++i) accum(*p, i, self.grad[0]);
            }
        },
        "sum_all"));
}

Tensor relu(const Tensor& a) {
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                const auto& x = p->value;
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    if (x[i] > 0.0) accum(*p, i, self.grad[i]);
                }
            }
        },
        "relu"));
}

Tensor tanh(const Tensor& a) {
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    const double y = self.value[i];
                    accum(*p, i, self.grad[i] * (1.0 - y * y));
                }
            }
        },
        "tanh"));
}

Tensor sigmoid(const Tensor& a) {
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
    return Tensor(make_result(
        a.shape(), std::move(out), {a.node()},
        [](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    const double y = self.value[i];
                    accum(*p, i, self.grad[i] * y * (1.0 - y));
                }
            }
        },
        "sigmoid"));
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("embed_rows: table must be rank-2");
    const int w = table.dim(0), d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= w) {
            throw VocabError("embed_rows: token id " + std::to_string(id) +
                             " outside vocabulary of size " + std::to_string(w));
        }
    }
    const int t = static_cast<int>(ids.size());
    if (t == 0) throw ShapeError("embed_rows: empty id list");
    const auto& tv = table.node()->value;
    std::vector<double> out(static_cast<size_t>(t) * d);
    for (int i = 0; i < t; ++i) {
        const double* src = &tv[static_cast<size_t>(ids[static_cast<size_t>(i)]) * d];
        double* dst = &out[static_cast<size_t>(i) * d];
        for (int j = 0; j < d; ++j) dst[j] = src[j];
    }
    return Tensor(make_result(
        {t, d}, std::move(out), {table.node()},
        [ids, d](Node& self) {
            if (Node* p = grad_target(self, 0)) {
                for (size_t i = 0; i < ids.size(); ++i) {
                    const double* g = &self.grad[i * static_cast<size_t>(d)];
                    double* dst = &p->grad[static_cast<size_t>(ids[i]) * d];
                    for (int j = 0; j < d; ++j) dst[j] += g[j];
                }
            }
        },
        "embed_rows"));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 2) throw ShapeError("layer_norm: expected rank-2 input");
    const int t = x.dim(0), c = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c) {
        throw ShapeError("layer_norm: gamma/beta must be [C]");
    }
    const auto& xv = x.node()->value;
    const auto& gv = gamma.node()->value;
    const auto& bv = beta.node()->value;
    std::vector<double> out(xv.size());
    std::vector<double> inv_std(static_cast<size_t>(t));
    std::vector<double> xhat(xv.size());
    for (int i = 0; i < t; ++i) {
        const double* row = &xv[static_cast<size_t>(i) * c];
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += row[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = row[j] - mu;
            var += d * d;
        }
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = inv;
        for (int j = 0; j < c; ++j) {
            const double h = (row[j] - mu) * inv;
            xhat[static_cast<size_t>(i) * c + j] = h;
            out[static_cast<size_t>(i) * c + j] = h * gv[j] + bv[j];
        }
    }
    return Tensor(make_result(
        {t, c}, std::move(out), {x.node(), gamma.node(), beta.node()},
        [t, c, inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
            const auto& gv = self.parents[1]->value;
            Node* px = grad_target(self, 0);
            Node* pg = grad_target(self, 1);
            Node* pb = grad_target(self, 2);
            for (int i = 0; i < t; ++i) {
                const double* grow = &self.grad[static_cast<size_t>(i) * c];
                const double* hrow = &xhat[static_cast<size_t>(i) * c];
                if (pg) {
                    for (int j = 0; j < c; ++j) pg->grad[j] += grow[j] * hrow[j];
                }
                if (pb) {
                    for (int j = 0; j < c; ++j) pb->grad[j] += grow[j];
                }
                if (px) {
                    double mean_g = 0.0, mean_gh = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double g = grow[j] * gv[j];
                        mean_g += g;
                        mean_gh += g * hrow[j];
                    }
                    mean_g /= c;
                    mean_gh /= c;
                    const double inv = inv_std[static_cast<size_t>(i)];
                    for (int j = 0; j < c; ++j) {
                        const double g = grow[j] * gv[j];
                        px->grad[static_cast<size_t>(i) * c + j] +=
                            inv * (g - mean_g - hrow[j] * mean_gh);
                    }
                }
            }
        },
        "layer_norm"));
}

Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& b, int dilation) {
    if (x.rank() != 2 || w.rank() != 3 || b.rank() != 1) {
        throw ShapeError("conv1d_same: expected x [T,Cin], w [Cout,Cin,K], b [Cout]");
    }
    const int t = x.dim(0), cin = x.dim(1);
    const int cout = w.dim(0), wcin = w.dim(1), k = w.dim(2);
    if (wcin != cin || b.dim(0) != cout) {
        throw ShapeError("conv1d_same: channel mismatch x " + shape_str(x.shape()) + " w " +
                         shape_str(w.shape()));
    }
    if (dilation < 1) throw ShapeError("conv1d_same: dilation must be >= 1");
    if ((k - 1) % 2 != 0) throw ShapeError("conv1d_same: kernel width must be odd");
    const int left = (k - 1) * dilation / 2;
    const auto& xv = x.node()->value;
    const auto& wv = w.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(static_cast<size_t>(t) * cout);
    for (int i = 0; i < t; ++i) {
        double* orow = &out[static_cast<size_t>(i) * cout];
        for (int co = 0; co < cout; ++co) orow[co] = bv[co];
        for (int kk = 0; kk < k; ++kk) {
            const int p = i + kk * dilation - left;
            if (p < 0 || p >= t) continue;
            const double* xrow = &xv[static_cast<size_t>(p) * cin];
            for (int co = 0; co < cout; ++co) {
                const double* wrow = &wv[(static_cast<size_t>(co) * cin) * k + kk];
                double acc = 0.0;
                for (int ci = 0; ci < cin; ++ci) acc += wrow[static_cast<size_t>(ci) * k] * xrow[ci];
                orow[co] += acc;
            }
        }
    }
    return Tensor(make_result(
        {t, cout}, std::move(out), {x.node(), w.node(), b.node()},
        [t, cin, cout, k, dilation, left](Node& self) {
            const auto& xv = self.parents[0]->value;
            const auto& wv = self.parents[1]->value;
            Node* px = grad_target(self, 0);
            Node* pw = grad_target(self, 1);
            Node* pb = grad_target(self, 2);
            for (int i = 0; i < t; ++i) {
                const double* grow = &self.grad[static_cast<size_t>(i) * cout];
                if (pb) {
                    for (int co = 0; co < cout; ++co) pb->grad[co] += grow[co];
                }
                for (int kk = 0; kk < k; ++kk) {
                    const int p = i + kk * dilation - left;
                    if (p < 0 || p >= t) continue;
                    const double* xrow = &xv[static_cast<size_t>(p) * cin];
                    for (int co = 0; co < cout; ++co) {
                        const double g = grow[co];
                        if (g == 0.0) continue;
                        const size_t wbase = (static_cast<size_t>(co) * cin) * k + kk;
                        if (pw) {
                            for (int ci = 0; ci < cin; ++ci) {
                                pw->grad[wbase + static_cast<size_t>(ci) * k] += g * xrow[ci];
                            }
                        }
                        if (px) {
                            double* xg = &px->grad[static_cast<size_t>(p) * cin];
                            for (int ci = 0; ci < cin; ++ci) {
                                xg[ci] += g * wv[wbase + static_cast<size_t>(ci) * k];
                            }
                        }
                    }
                }
            }
        },
        "conv1d_same"));
}

Tensor depthwise_conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1) {
        throw ShapeError("depthwise_conv2d_same: expected x [T,F,C], w [C,Kt,Kf], b [C]");
    }
    const int t = x.dim(0), f = x.dim(1), c = x.dim(2);
    const int kt = w.dim(1), kf = w.dim(2);
    if (w.dim(0) != c || b.dim(0) != c) {
        throw ShapeError("depthwise_conv2d_same: channel mismatch");
    }
    if (kt % 2 == 0 || kf % 2 == 0) throw ShapeError("depthwise_conv2d_same: kernels must be odd");
    const int ht = kt / 2, hf = kf / 2;
    const auto& xv = x.node()->value;
    const auto& wv = w.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(xv.size());
    auto xi = [f, c](int ti, int fi) { return (static_cast<size_t>(ti) * f + fi) * c; };
    for (int ti = 0; ti < t; ++ti) {
        for (int fi = 0; fi < f; ++fi) {
            double* opix = &out[xi(ti, fi)];
            for (int ch = 0; ch < c; ++ch) opix[ch] = bv[ch];
            for (int a = 0; a < kt; ++a) {
                const int pt = ti + a - ht;
                if (pt < 0 || pt >= t) continue;
                for (int e = 0; e < kf; ++e) {
                    const int pf = fi + e - hf;
                    if (pf < 0 || pf >= f) continue;
                    const double* xpix = &xv[xi(pt, pf)];
                    for (int ch = 0; ch < c; ++ch) {
                        opix[ch] += wv[(static_cast<size_t>(ch) * kt + a) * kf + e] * xpix[ch];
                    }
                }
            }
        }
    }
    return Tensor(make_result(
        {t, f, c}, std::move(out), {x.node(), w.node(), b.node()},
        [t, f, c, kt, kf, ht, hf](Node& self) {
            const auto& xv = self.parents[0]->value;
            const auto& wv = self.parents[1]->value;
            Node* px = grad_target(self, 0);
            Node* pw = grad_target(self, 1);
            Node* pb = grad_target(self, 2);
            auto xi = [f, c](int ti, int fi) { return (static_cast<size_t>(ti) * f + fi) * c; };
            for (int ti = 0; ti < t; ++ti) {
                for (int fi = 0; fi < f; ++fi) {
                    const double* gpix = &self.grad[xi(ti, fi)];
                    if (pb) {
                        for (int ch = 0; ch < c; ++ch) pb->grad[ch] += gpix[ch];
                    }
                    for (int a = 0; a < kt; ++a) {
                        const int pt = ti + a - ht;
                        if (pt < 0 || pt >= t) continue;
                        for (int e = 0; e < kf; ++e) {
                            const int pf = fi + e - hf;
                            if (pf < 0 || pf >= f) continue;
                            const size_t xoff = xi(pt, pf);
                            for (int ch = 0; ch < c; ++ch) {
                                const size_t widx = (static_cast<size_t>(ch) * kt + a) * kf + e;
                                if (pw) pw->grad[widx] += gpix[ch] * xv[xoff + ch];
                                if (px) px->grad[xoff + ch] += gpix[ch] * wv[widx];
                            }
                        }
                    }
                }
            }
        },
        "depthwise_conv2d_same"));
}

}  // namespace lwf
