#include "ctes/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctes/params.hpp"

namespace ctes {

namespace {

double softplus_fwd(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid_fwd(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Tensor val, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(val), Tensor{}, std::move(back)});
    return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::leaf(Tensor t) { return push(std::move(t), nullptr); }

Var Tape::param(ParamStore& store, const std::string& name) {
    Var v = leaf(store.value(name));
    bindings_.push_back(Binding{&store, name, v});
    return v;
}

double Tape::value(Var x) const {
    const Tensor& t = nodes_[x].val;
    if (!t.is_scalar()) throw std::runtime_error("value(): node is not scalar " + t.shape_str());
    return t.v[0];
}

void Tape::check_elementwise(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b) && !a.is_scalar() && !b.is_scalar())
        throw std::runtime_error(std::string(op) + ": shape mismatch " + a.shape_str() +
                                 " vs " + b.shape_str());
}

namespace {

// Accumulate g into the gradient of node `x`, summing when x is a
// broadcast scalar.
void accum(Tensor& gx, const Tensor& gx_shape_like, int i, double g) {
    if (gx.is_scalar())
        gx.v[0] += g;
    else
        gx.v[i] += g;
    (void)gx_shape_like;
}

}  // namespace

Var Tape::add(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    check_elementwise("add", ta, tb);
    const Tensor& shape = ta.is_scalar() ? tb : ta;
    Tensor out(shape.rows, shape.cols);
    for (int i = 0; i < out.size(); ++i)
        out.v[i] = (ta.is_scalar() ? ta.v[0] : ta.v[i]) + (tb.is_scalar() ? tb.v[0] : tb.v[i]);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        for (int i = 0; i < g.size(); ++i) {
            accum(ga, g, i, g.v[i]);
            accum(gb, g, i, g.v[i]);
        }
    };
    return self;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    check_elementwise("sub", ta, tb);
    const Tensor& shape = ta.is_scalar() ? tb : ta;
    Tensor out(shape.rows, shape.cols);
    for (int i = 0; i < out.size(); ++i)
        out.v[i] = (ta.is_scalar() ? ta.v[0] : ta.v[i]) - (tb.is_scalar() ? tb.v[0] : tb.v[i]);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        for (int i = 0; i < g.size(); ++i) {
            accum(ga, g, i, g.v[i]);
            accum(gb, g, i, -g.v[i]);
        }
    };
    return self;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    check_elementwise("mul", ta, tb);
    const Tensor& shape = ta.is_scalar() ? tb : ta;
    Tensor out(shape.rows, shape.cols);
    for (int i = 0; i < out.size(); ++i)
        out.v[i] = (ta.is_scalar() ? ta.v[0] : ta.v[i]) * (tb.is_scalar() ? tb.v[0] : tb.v[i]);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& ta = T.nodes_[a].val;
        const Tensor& tb = T.nodes_[b].val;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        for (int i = 0; i < g.size(); ++i) {
            double xa = ta.is_scalar() ? ta.v[0] : ta.v[i];
            double xb = tb.is_scalar() ? tb.v[0] : tb.v[i];
            accum(ga, g, i, g.v[i] * xb);
            accum(gb, g, i, g.v[i] * xa);
        }
    };
    return self;
}

Var Tape::div(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    check_elementwise("div", ta, tb);
    const Tensor& shape = ta.is_scalar() ? tb : ta;
    Tensor out(shape.rows, shape.cols);
    for (int i = 0; i < out.size(); ++i)
        out.v[i] = (ta.is_scalar() ? ta.v[0] : ta.v[i]) / (tb.is_scalar() ? tb.v[0] : tb.v[i]);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& ta = T.nodes_[a].val;
        const Tensor& tb = T.nodes_[b].val;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        for (int i = 0; i < g.size(); ++i) {
            double xa = ta.is_scalar() ? ta.v[0] : ta.v[i];
            double xb = tb.is_scalar() ? tb.v[0] : tb.v[i];
            accum(ga, g, i, g.v[i] / xb);
            accum(gb, g, i, -g.v[i] * xa / (xb * xb));
        }
    };
    return self;
}

Var Tape::scale(Var a, double c) {
    Tensor out = nodes_[a].val;
    for (double& x : out.v) x *= c;
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, c, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
    };
    return self;
}

Var Tape::add_const(Var a, double c) {
    Tensor out = nodes_[a].val;
    for (double& x : out.v) x += c;
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
    };
    return self;
}

Var Tape::matvec(Var m, Var x) {
    const Tensor& tm = nodes_[m].val;
    const Tensor& tx = nodes_[x].val;
    if (tx.cols != 1 || tm.cols != tx.rows)
        throw std::runtime_error("matvec: shape mismatch " + tm.shape_str() + " * " +
                                 tx.shape_str());
    Tensor out(tm.rows, 1);
    for (int r = 0; r < tm.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < tm.cols; ++c) acc += tm.at(r, c) * tx.v[c];
        out.v[r] = acc;
    }
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [m, x, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& tm = T.nodes_[m].val;
        const Tensor& tx = T.nodes_[x].val;
        Tensor& gm = T.nodes_[m].grad;
        Tensor& gx = T.nodes_[x].grad;
        for (int r = 0; r < tm.rows; ++r) {
            double gr = g.v[r];
            for (int c = 0; c < tm.cols; ++c) {
                gm.at(r, c) += gr * tx.v[c];
                gx.v[c] += gr * tm.at(r, c);
            }
        }
    };
    return self;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.cols != tb.rows)
        throw std::runtime_error("matmul: shape mismatch " + ta.shape_str() + " * " +
                                 tb.shape_str());
    Tensor out(ta.rows, tb.cols);
    for (int r = 0; r < ta.rows; ++r)
        for (int k = 0; k < ta.cols; ++k) {
            double av = ta.at(r, k);
            for (int c = 0; c < tb.cols; ++c) out.at(r, c) += av * tb.at(k, c);
        }
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& ta = T.nodes_[a].val;
        const Tensor& tb = T.nodes_[b].val;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        // ga += g * tb^T ; gb += ta^T * g
        for (int r = 0; r < ta.rows; ++r)
            for (int k = 0; k < ta.cols; ++k) {
                double acc = 0.0;
                for (int c = 0; c < tb.cols; ++c) acc += g.at(r, c) * tb.at(k, c);
                ga.at(r, k) += acc;
            }
        for (int k = 0; k < ta.cols; ++k)
            for (int c = 0; c < tb.cols; ++c) {
                double acc = 0.0;
                for (int r = 0; r < ta.rows; ++r) acc += ta.at(r, k) * g.at(r, c);
                gb.at(k, c) += acc;
            }
    };
    return self;
}

#define UNARY_OP(NAME, FWD, DERIV)                                              \
    Var Tape::NAME(Var a) {                                                     \
        const Tensor& ta = nodes_[a].val;                                       \
        Tensor out(ta.rows, ta.cols);                                           \
        for (int i = 0; i < out.size(); ++i) {                                  \
            double x = ta.v[i];                                                 \
            out.v[i] = (FWD);                                                   \
        }                                                                       \
        Var self = push(std::move(out), nullptr);                               \
        nodes_[self].back = [a, self](Tape& T) {                                \
            const Tensor& g = T.nodes_[self].grad;                              \
            const Tensor& tx = T.nodes_[a].val;                                 \
            const Tensor& ty = T.nodes_[self].val;                              \
            Tensor& ga = T.nodes_[a].grad;                                      \
            for (int i = 0; i < g.size(); ++i) {                                \
                double x = tx.v[i];                                             \
                double y = ty.v[i];                                             \
                (void)x;                                                        \
                (void)y;                                                        \
                ga.v[i] += g.v[i] * (DERIV);                                    \
            }                                                                   \
        };                                                                      \
        return self;                                                            \
    }

UNARY_OP(tanh_, std::tanh(x), 1.0 - y * y)
UNARY_OP(sigmoid_, sigmoid_fwd(x), y * (1.0 - y))
UNARY_OP(exp_, std::exp(x), y)
UNARY_OP(softplus_, softplus_fwd(x), sigmoid_fwd(x))

#undef UNARY_OP

Var Tape::log_(Var a) {
    const Tensor& ta = nodes_[a].val;
    Tensor out(ta.rows, ta.cols);
    for (int i = 0; i < out.size(); ++i) {
        if (!(ta.v[i] > 0.0))
            throw std::runtime_error("log: non-positive input " + std::to_string(ta.v[i]));
        out.v[i] = std::log(ta.v[i]);
    }
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& tx = T.nodes_[a].val;
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / tx.v[i];
    };
    return self;
}

Var Tape::sqrt_(Var a) {
    const Tensor& ta = nodes_[a].val;
    Tensor out(ta.rows, ta.cols);
    for (int i = 0; i < out.size(); ++i) {
        if (!(ta.v[i] >= 0.0))
            throw std::runtime_error("sqrt: negative input " + std::to_string(ta.v[i]));
        out.v[i] = std::sqrt(ta.v[i]);
    }
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        const Tensor& ty = T.nodes_[self].val;
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * 0.5 / ty.v[i];
    };
    return self;
}

Var Tape::sum(Var a) {
    const Tensor& ta = nodes_[a].val;
    double acc = 0.0;
    for (double x : ta.v) acc += x;
    Var self = push(Tensor::scalar(acc), nullptr);
    nodes_[self].back = [a, self](Tape& T) {
        double g = T.nodes_[self].grad.v[0];
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < ga.size(); ++i) ga.v[i] += g;
    };
    return self;
}

Var Tape::logsumexp(Var a) {
    const Tensor& ta = nodes_[a].val;
    if (ta.size() == 0) throw std::runtime_error("logsumexp: empty input");
    double mx = *std::max_element(ta.v.begin(), ta.v.end());
    double acc = 0.0;
    for (double x : ta.v) acc += std::exp(x - mx);
    Var self = push(Tensor::scalar(mx + std::log(acc)), nullptr);
    nodes_[self].back = [a, self](Tape& T) {
        double g = T.nodes_[self].grad.v[0];
        double lse = T.nodes_[self].val.v[0];
        const Tensor& tx = T.nodes_[a].val;
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < ga.size(); ++i) ga.v[i] += g * std::exp(tx.v[i] - lse);
    };
    return self;
}

Var Tape::concat(Var a, Var b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.cols != 1 || tb.cols != 1)
        throw std::runtime_error("concat: vectors required, got " + ta.shape_str() + ", " +
                                 tb.shape_str());
    const int na = ta.rows;
    Tensor out(ta.rows + tb.rows, 1);
    std::copy(ta.v.begin(), ta.v.end(), out.v.begin());
    std::copy(tb.v.begin(), tb.v.end(), out.v.begin() + ta.rows);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [a, b, na, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& ga = T.nodes_[a].grad;
        Tensor& gb = T.nodes_[b].grad;
        for (int i = 0; i < na; ++i) ga.v[i] += g.v[i];
        for (int i = na; i < g.size(); ++i) gb.v[i - na] += g.v[i];
    };
    return self;
}

Var Tape::pick(Var a, int i) {
    const Tensor& ta = nodes_[a].val;
    if (i < 0 || i >= ta.size())
        throw std::runtime_error("pick: index " + std::to_string(i) + " out of range for " +
                                 ta.shape_str());
    Var self = push(Tensor::scalar(ta.v[i]), nullptr);
    nodes_[self].back = [a, i, self](Tape& T) {
        T.nodes_[a].grad.v[i] += T.nodes_[self].grad.v[0];
    };
    return self;
}

Var Tape::row(Var m, int i) {
    const Tensor& tm = nodes_[m].val;
    if (i < 0 || i >= tm.rows)
        throw std::runtime_error("row: index " + std::to_string(i) + " out of range for " +
                                 tm.shape_str());
    Tensor out(tm.cols, 1);
    for (int c = 0; c < tm.cols; ++c) out.v[c] = tm.at(i, c);
    Var self = push(std::move(out), nullptr);
    nodes_[self].back = [m, i, self](Tape& T) {
        const Tensor& g = T.nodes_[self].grad;
        Tensor& gm = T.nodes_[m].grad;
        for (int c = 0; c < g.size(); ++c) gm.at(i, c) += g.v[c];
    };
    return self;
}

Var Tape::dot_const(Var a, const std::vector<double>& c) {
    const Tensor& ta = nodes_[a].val;
    if (ta.size() != static_cast<int>(c.size()))
        throw std::runtime_error("dot_const: size mismatch");
    double acc = 0.0;
    for (int i = 0; i < ta.size(); ++i) acc += ta.v[i] * c[i];
    Var self = push(Tensor::scalar(acc), nullptr);
    nodes_[self].back = [a, c, self](Tape& T) {
        double g = T.nodes_[self].grad.v[0];
        Tensor& ga = T.nodes_[a].grad;
        for (int i = 0; i < ga.size(); ++i) ga.v[i] += g * c[i];
    };
    return self;
}

void Tape::backward(Var root) {
    if (!nodes_[root].val.is_scalar())
        throw std::runtime_error("backward: root must be scalar, got " +
                                 nodes_[root].val.shape_str());
    for (Var i = 0; i <= root; ++i) {
        Node& n = nodes_[i];
        if (n.grad.size() != n.val.size()) n.grad = Tensor(n.val.rows, n.val.cols);
    }
    nodes_[root].grad.v[0] += 1.0;
    for (Var i = root; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this);
    ran_backward_ = true;
}

void Tape::accumulate_grads() {
    if (!ran_backward_) throw std::runtime_error("accumulate_grads before backward");
    for (const Binding& b : bindings_) {
        const Tensor& g = nodes_[b.var].grad;
        if (g.size() == 0) continue;  // node past the backward root
        Tensor& dst = b.store->grad(b.name);
        for (int i = 0; i < g.size(); ++i) dst.v[i] += g.v[i];
    }
}

double grad_check(const std::function<double()>& loss, std::vector<ParamStore*> stores,
                  double step) {
    if (!(step > 0.0)) throw std::runtime_error("grad_check: step must be positive");
    for (ParamStore* s : stores) s->zero_grads();
    double f0 = loss();
    if (!std::isfinite(f0)) throw std::runtime_error("grad_check: non-finite loss");

    // snapshot analytic gradients
    std::vector<std::vector<Tensor>> analytic;
    for (ParamStore* s : stores) {
        std::vector<Tensor> g;
        for (const auto& name : s->names()) g.push_back(s->grad(name));
        analytic.push_back(std::move(g));
    }

    // central differences cannot resolve gradients below the cancellation
    // floor of the loss evaluation, so differences under it are not evidence
    // of a wrong gradient
    const double noise_floor = 100.0 * std::abs(f0) * 2.220446049250313e-16 / step;

    double max_rel = 0.0;
    for (std::size_t si = 0; si < stores.size(); ++si) {
        ParamStore* s = stores[si];
        auto names = s->names();
        for (std::size_t ni = 0; ni < names.size(); ++ni) {
            Tensor& t = s->value(names[ni]);
            for (int i = 0; i < t.size(); ++i) {
                double orig = t.v[i];
                t.v[i] = orig + step;
                for (ParamStore* ss : stores) ss->zero_grads();
                double fp = loss();
                t.v[i] = orig - step;
                for (ParamStore* ss : stores) ss->zero_grads();
                double fm = loss();
                t.v[i] = orig;
                if (!std::isfinite(fp) || !std::isfinite(fm))
                    throw std::runtime_error("grad_check: non-finite loss at perturbation");
                double fd = (fp - fm) / (2.0 * step);
                double an = analytic[si][ni].v[i];
                if (std::abs(fd - an) <= noise_floor) continue;
                double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
                max_rel = std::max(max_rel, std::abs(fd - an) / denom);
            }
        }
    }
    for (ParamStore* s : stores) s->zero_grads();
    return max_rel;
}

}  // namespace ctes
