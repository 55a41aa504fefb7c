#include "ctes/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace ctes {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSigma2Floor = 1e-6;
}  // namespace

double lognormal_logpdf(double x, const LogNormalParams& p) {
    if (!(x > 0.0)) throw std::runtime_error("lognormal_logpdf: x must be positive");
    double lx = std::log(x);
    double d = lx - p.mu;
    return -lx - 0.5 * std::log(kTwoPi * p.sigma2) - d * d / (2.0 * p.sigma2);
}

double lognormal_sample(const LogNormalParams& p, double noise) {
    return std::exp(p.mu + std::sqrt(p.sigma2) * noise);
}

double lognormal_point(const LogNormalParams& p) { return std::exp(p.mu); }

double kl_lognormal(const LogNormalParams& q, const LogNormalParams& p) {
    double r = q.sigma2 / p.sigma2;
    double d = q.mu - p.mu;
    return 0.5 * (std::log(p.sigma2 / q.sigma2) + r + d * d / p.sigma2 - 1.0);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double z = 0.0;
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& x : out) x /= z;
    return out;
}

double kl_categorical(const std::vector<double>& q, const std::vector<double>& p) {
    if (q.size() != p.size()) throw std::runtime_error("kl_categorical: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] <= 0.0) continue;
        kl += q[i] * (std::log(q[i]) - std::log(p[i]));
    }
    return kl;
}

void LogNormalHead::init(ParamStore& ps, RandomStream& rng) const {
    if (!constant) {
        ps.add_uniform(prefix + "W1", 1, in_dim, in_dim, rng);
        ps.add_uniform(prefix + "W2", 1, in_dim, in_dim, rng);
    }
    ps.add(prefix + "b1", Tensor::scalar(0.0));
    ps.add(prefix + "b2", Tensor::scalar(0.5413248546129181));  // softplus^-1(1)
}

std::pair<Var, Var> LogNormalHead::eval(Tape& T, ParamStore& ps, Var s) const {
    Var b1 = T.param(ps, prefix + "b1");
    Var b2 = T.param(ps, prefix + "b2");
    Var mu, pre;
    if (constant) {
        mu = b1;
        pre = b2;
    } else {
        mu = T.add(T.matvec(T.param(ps, prefix + "W1"), s), b1);
        pre = T.add(T.matvec(T.param(ps, prefix + "W2"), s), b2);
    }
    Var sigma2 = T.add_const(T.softplus_(pre), kSigma2Floor);
    return {mu, sigma2};
}

void MarkHead::init(ParamStore& ps, RandomStream& rng) const {
    if (!constant) ps.add_uniform(prefix + "W", n_marks, in_dim, in_dim, rng);
    ps.add(prefix + "b", Tensor::zeros(n_marks));
}

Var MarkHead::logits(Tape& T, ParamStore& ps, Var s) const {
    Var b = T.param(ps, prefix + "b");
    if (constant) return b;
    return T.add(T.matvec(T.param(ps, prefix + "W"), s), b);
}

Var lognormal_logpdf_t(Tape& T, Var x, Var mu, Var sigma2) {
    Var lx = T.log_(x);
    Var d = T.sub(lx, mu);
    Var quad = T.scale(T.div(T.mul(d, d), sigma2), -0.5);
    Var norm = T.scale(T.log_(T.scale(sigma2, kTwoPi)), -0.5);
    return T.add(T.add(T.neg(lx), norm), quad);
}

Var lognormal_logpdf_t(Tape& T, double x, Var mu, Var sigma2) {
    if (!(x > 0.0)) throw std::runtime_error("lognormal_logpdf: x must be positive");
    return lognormal_logpdf_t(T, T.scalar(x), mu, sigma2);
}

Var lognormal_sample_t(Tape& T, Var mu, Var sigma2, double noise) {
    return T.exp_(T.add(mu, T.scale(T.sqrt_(sigma2), noise)));
}

Var kl_lognormal_t(Tape& T, Var mu_q, Var s2_q, const LogNormalParams& prior) {
    // 0.5 * (log(s2_p / s2_q) + s2_q/s2_p + (mu_q - mu_p)^2 / s2_p - 1)
    Var lr = T.sub(T.scalar(std::log(prior.sigma2)), T.log_(s2_q));
    Var ratio = T.scale(s2_q, 1.0 / prior.sigma2);
    Var d = T.add_const(mu_q, -prior.mu);
    Var quad = T.scale(T.mul(d, d), 1.0 / prior.sigma2);
    return T.scale(T.add_const(T.add(T.add(lr, ratio), quad), -1.0), 0.5);
}

Var mark_nll_t(Tape& T, Var logits, int mark) {
    if (mark < 0 || mark >= T.val(logits).size())
        throw std::runtime_error("mark_nll: mark index out of range");
    return T.sub(T.logsumexp(logits), T.pick(logits, mark));
}

Var kl_categorical_uniform_t(Tape& T, Var logits) {
    int c = T.val(logits).size();
    Var lse = T.logsumexp(logits);
    Var logq = T.sub(logits, lse);  // scalar broadcast
    Var q = T.exp_(logq);
    return T.sum(T.mul(q, T.add_const(logq, std::log(static_cast<double>(c)))));
}

}  // namespace ctes
