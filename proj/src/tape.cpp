#include "cpspan/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "cpspan/errors.hpp"

namespace cpspan {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

Tape::Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&)> backprop) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Tape::Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Tape::Var Tape::affine(Var x, Var w, Var b) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    require(xv.cols() == wv.cols(), "affine: input width does not match weight fan-in");
    require(bv.rows() == 1 && bv.cols() == wv.rows(), "affine: bias shape mismatch");

    Matrix out = matmul_nt(xv, wv);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);

    const bool track = needs(x) || needs(w) || needs(b);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), track, [self, x, w, b](Tape& t) {
        const Matrix& g = t.grad_ref(self.id);
        if (t.needs(x)) add_in_place(t.grad_ref(x.id), cpspan::matmul(g, t.value(w)));
        if (t.needs(w)) add_in_place(t.grad_ref(w.id), matmul_tn(g, t.value(x)));
        if (t.needs(b)) {
            Matrix& gb = t.grad_ref(b.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
    });
}

Tape::Var Tape::relu(Var x) {
    const Matrix& xv = value(x);
    Matrix out = xv;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.data()[i] < 0.0) out.data()[i] = 0.0;

    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(x), [self, x](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.grad_ref(self.id);
        const Matrix& xv = t.value(x);
        Matrix& gx = t.grad_ref(x.id);
        // subgradient at exactly zero is zero
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv.data()[i] > 0.0) gx.data()[i] += g.data()[i];
    });
}

Tape::Var Tape::matmul(Var a, Var b) {
    Matrix out = cpspan::matmul(value(a), value(b));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(a) || needs(b), [self, a, b](Tape& t) {
        const Matrix& g = t.grad_ref(self.id);
        if (t.needs(a)) add_in_place(t.grad_ref(a.id), matmul_nt(g, t.value(b)));
        if (t.needs(b)) add_in_place(t.grad_ref(b.id), matmul_tn(t.value(a), g));
    });
}

Tape::Var Tape::matmul_const(const Matrix& a, Var b) {
    Matrix out = cpspan::matmul(a, value(b));
    Var self{static_cast<int>(nodes_.size())};
    auto coeff = std::make_shared<Matrix>(a);
    return push(std::move(out), needs(b), [self, b, coeff](Tape& t) {
        if (!t.needs(b)) return;
        add_in_place(t.grad_ref(b.id), matmul_tn(*coeff, t.grad_ref(self.id)));
    });
}

Tape::Var Tape::add(Var a, Var b) {
    Matrix out = value(a) + value(b);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(a) || needs(b), [self, a, b](Tape& t) {
        const Matrix& g = t.grad_ref(self.id);
        if (t.needs(a)) add_in_place(t.grad_ref(a.id), g);
        if (t.needs(b)) add_in_place(t.grad_ref(b.id), g);
    });
}

Tape::Var Tape::sub(Var a, Var b) {
    Matrix out = value(a) - value(b);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(a) || needs(b), [self, a, b](Tape& t) {
        const Matrix& g = t.grad_ref(self.id);
        if (t.needs(a)) add_in_place(t.grad_ref(a.id), g);
        if (t.needs(b)) add_scaled_in_place(t.grad_ref(b.id), g, -1.0);
    });
}

Tape::Var Tape::scale(Var a, double s) {
    Matrix out = value(a) * s;
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(a), [self, a, s](Tape& t) {
        if (!t.needs(a)) return;
        add_scaled_in_place(t.grad_ref(a.id), t.grad_ref(self.id), s);
    });
}

Tape::Var Tape::gather_rows(Var x, std::vector<std::size_t> rows) {
    const Matrix& xv = value(x);
    Matrix out(rows.size(), xv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < xv.rows(), "gather_rows: row index out of range");
        for (std::size_t c = 0; c < xv.cols(); ++c) out(i, c) = xv(rows[i], c);
    }
    Var self{static_cast<int>(nodes_.size())};
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
    return push(std::move(out), needs(x), [self, x, idx](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.grad_ref(self.id);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t i = 0; i < idx->size(); ++i)
            for (std::size_t c = 0; c < g.cols(); ++c) gx((*idx)[i], c) += g(i, c);
    });
}

Tape::Var Tape::cosine_rows(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    require(av.cols() == bv.cols(), "cosine_rows: dimension mismatch");

    const std::size_t na = av.rows(), nb = bv.rows();
    auto norm_a = std::make_shared<std::vector<double>>(na);
    auto norm_b = std::make_shared<std::vector<double>>(nb);
    for (std::size_t r = 0; r < na; ++r) {
        (*norm_a)[r] = row_norm(av, r);
        if ((*norm_a)[r] < 1e-12) throw DegenerateEmbedding(r);
    }
    for (std::size_t r = 0; r < nb; ++r) {
        (*norm_b)[r] = row_norm(bv, r);
        if ((*norm_b)[r] < 1e-12) throw DegenerateEmbedding(r);
    }

    Matrix out(na, nb);
    for (std::size_t p = 0; p < na; ++p)
        for (std::size_t q = 0; q < nb; ++q)
            out(p, q) = row_dot(av, p, bv, q) / ((*norm_a)[p] * (*norm_b)[q]);

    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(a) || needs(b), [self, a, b, norm_a, norm_b](Tape& t) {
        const Matrix& g = t.grad_ref(self.id);
        const Matrix& s = t.value(self);
        const Matrix& av = t.value(a);
        const Matrix& bv = t.value(b);
        const std::size_t d = av.cols();
        // s_pq = <u_p, w_q> over unit rows u, w:
        //   d s_pq / d a_p = (w_q - s_pq u_p) / |a_p|
        //   d s_pq / d b_q = (u_p - s_pq w_q) / |b_q|
        if (t.needs(a)) {
            Matrix& ga = t.grad_ref(a.id);
            for (std::size_t p = 0; p < av.rows(); ++p) {
                double weighted = 0.0;  // sum_q g_pq s_pq
                for (std::size_t q = 0; q < bv.rows(); ++q) weighted += g(p, q) * s(p, q);
                for (std::size_t c = 0; c < d; ++c) {
                    double acc = 0.0;
                    for (std::size_t q = 0; q < bv.rows(); ++q)
                        acc += g(p, q) * bv(q, c) / (*norm_b)[q];
                    ga(p, c) += (acc - weighted * av(p, c) / (*norm_a)[p]) / (*norm_a)[p];
                }
            }
        }
        if (t.needs(b)) {
            Matrix& gb = t.grad_ref(b.id);
            for (std::size_t q = 0; q < bv.rows(); ++q) {
                double weighted = 0.0;  // sum_p g_pq s_pq
                for (std::size_t p = 0; p < av.rows(); ++p) weighted += g(p, q) * s(p, q);
                for (std::size_t c = 0; c < d; ++c) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < av.rows(); ++p)
                        acc += g(p, q) * av(p, c) / (*norm_a)[p];
                    gb(q, c) += (acc - weighted * bv(q, c) / (*norm_b)[q]) / (*norm_b)[q];
                }
            }
        }
    });
}

Tape::Var Tape::diagonal(Var square) {
    const Matrix& sv = value(square);
    require(sv.rows() == sv.cols(), "diagonal: matrix is not square");
    Matrix out(sv.rows(), 1);
    for (std::size_t i = 0; i < sv.rows(); ++i) out(i, 0) = sv(i, i);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(square), [self, square](Tape& t) {
        if (!t.needs(square)) return;
        const Matrix& g = t.grad_ref(self.id);
        Matrix& gs = t.grad_ref(square.id);
        for (std::size_t i = 0; i < g.rows(); ++i) gs(i, i) += g(i, 0);
    });
}

Tape::Var Tape::sum(Var x) {
    double acc = 0.0;
    const Matrix& xv = value(x);
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv.data()[i];
    Matrix out(1, 1, acc);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(x), [self, x](Tape& t) {
        if (!t.needs(x)) return;
        const double g = t.grad_ref(self.id)(0, 0);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g;
    });
}

Tape::Var Tape::sum_squares(Var x) {
    const Matrix& xv = value(x);
    Matrix out(1, 1, squared_norm(xv));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), needs(x), [self, x](Tape& t) {
        if (!t.needs(x)) return;
        const double g = t.grad_ref(self.id)(0, 0);
        const Matrix& xv = t.value(x);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += 2.0 * g * xv.data()[i];
    });
}

Tape::Var Tape::contrastive(const std::vector<Var>& views, double tau) {
    require(tau > 0.0, "contrastive: temperature must be positive");
    const std::size_t v_count = views.size();
    if (v_count < 2) return constant(Matrix(1, 1, 0.0));
    const std::size_t batch = value(views.front()).rows();
    for (Var v : views)
        require(value(v).rows() == batch, "contrastive: batch sizes differ across views");
    if (batch < 2) return constant(Matrix(1, 1, 0.0));

    // Inner-product tables per ordered view pair (v, t), t != v.
    auto tables = std::make_shared<std::vector<std::vector<Matrix>>>(
        v_count, std::vector<Matrix>(v_count));
    for (std::size_t v = 0; v < v_count; ++v)
        for (std::size_t t = 0; t < v_count; ++t)
            if (t != v) (*tables)[v][t] = matmul_nt(value(views[v]), value(views[t]));

    // Per (anchor view v, row i): log-sum-exp over negatives (t != v, j != i),
    // then one softplus term per positive view r != v.
    auto neg_lse = std::make_shared<Matrix>(v_count, batch);
    double total = 0.0;
    for (std::size_t v = 0; v < v_count; ++v) {
        for (std::size_t i = 0; i < batch; ++i) {
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < v_count; ++t) {
                if (t == v) continue;
                const Matrix& g = (*tables)[v][t];
                for (std::size_t j = 0; j < batch; ++j)
                    if (j != i) peak = std::max(peak, g(i, j) / tau);
            }
            double acc = 0.0;
            for (std::size_t t = 0; t < v_count; ++t) {
                if (t == v) continue;
                const Matrix& g = (*tables)[v][t];
                for (std::size_t j = 0; j < batch; ++j)
                    if (j != i) acc += std::exp(g(i, j) / tau - peak);
            }
            const double lse = peak + std::log(acc);
            (*neg_lse)(v, i) = lse;
            for (std::size_t r = 0; r < v_count; ++r) {
                if (r == v) continue;
                total += softplus(lse - (*tables)[v][r](i, i) / tau);
            }
        }
    }
    total /= static_cast<double>(batch);

    bool track = false;
    for (Var v : views) track = track || needs(v);

    Var self{static_cast<int>(nodes_.size())};
    auto view_copy = std::make_shared<std::vector<Var>>(views);
    return push(Matrix(1, 1, total), track, [self, view_copy, tables, neg_lse, tau, batch,
                                             v_count](Tape& t) {
        const double gout = t.grad_ref(self.id)(0, 0) / static_cast<double>(batch);
        // d softplus(lse - a_r) = sigmoid(lse - a_r) * (d lse - d a_r)
        for (std::size_t v = 0; v < v_count; ++v) {
            std::vector<Matrix> dtab(v_count);  // gradients wrt tables[v][t]
            for (std::size_t tt = 0; tt < v_count; ++tt)
                if (tt != v) dtab[tt] = Matrix(batch, batch);
            for (std::size_t i = 0; i < batch; ++i) {
                const double lse = (*neg_lse)(v, i);
                double lse_weight = 0.0;
                for (std::size_t r = 0; r < v_count; ++r) {
                    if (r == v) continue;
                    const double sig = sigmoid(lse - (*tables)[v][r](i, i) / tau);
                    lse_weight += sig;
                    dtab[r](i, i) -= gout * sig / tau;
                }
                if (lse_weight != 0.0) {
                    for (std::size_t tt = 0; tt < v_count; ++tt) {
                        if (tt == v) continue;
                        const Matrix& g = (*tables)[v][tt];
                        for (std::size_t j = 0; j < batch; ++j) {
                            if (j == i) continue;
                            const double soft = std::exp(g(i, j) / tau - lse);
                            dtab[tt](i, j) += gout * lse_weight * soft / tau;
                        }
                    }
                }
            }
            for (std::size_t tt = 0; tt < v_count; ++tt) {
                if (tt == v) continue;
                const Var hv = (*view_copy)[v];
                const Var ht = (*view_copy)[tt];
                if (t.needs(hv)) add_in_place(t.grad_ref(hv.id), cpspan::matmul(dtab[tt], t.value(ht)));
                if (t.needs(ht)) add_in_place(t.grad_ref(ht.id), matmul_tn(dtab[tt], t.value(hv)));
            }
        }
    });
}

void Tape::backward(Var scalar_root) {
    require(scalar_root.valid() && static_cast<std::size_t>(scalar_root.id) < nodes_.size(),
            "backward: invalid root");
    const Matrix& root_value = nodes_[scalar_root.id].value;
    require(root_value.rows() == 1 && root_value.cols() == 1, "backward: root is not a scalar");

    for (Node& node : nodes_) node.grad = Matrix(node.value.rows(), node.value.cols());
    nodes_[scalar_root.id].grad(0, 0) = 1.0;

    for (int id = scalar_root.id; id >= 0; --id) {
        Node& node = nodes_[id];
        if (node.needs_grad && node.backprop) node.backprop(*this);
    }
}

}  // namespace cpspan
