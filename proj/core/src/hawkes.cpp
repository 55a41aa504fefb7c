#include "ctes/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ctes/rng.hpp"
#include "ctes/tape.hpp"

namespace ctes {

void HawkesParams::validate() const {
    const std::size_t u = mu.size();
    if (u == 0) throw std::runtime_error("hawkes: no users");
    if (A.size() != u) throw std::runtime_error("hawkes: A row count != user count");
    for (const auto& row : A)
        if (row.size() != u) throw std::runtime_error("hawkes: A is not square");
    for (double m : mu)
        if (!(m > 0.0)) throw std::runtime_error("hawkes: base rates must be positive");
    for (const auto& row : A)
        for (double a : row)
            if (a < 0.0) throw std::runtime_error("hawkes: excitation must be non-negative");
    if (!(beta > 0.0)) throw std::runtime_error("hawkes: beta must be positive");
}

double HawkesParams::spectral_radius() const {
    const std::size_t u = mu.size();
    std::vector<double> v(u, 1.0), w(u);
    double r = 0.0;
    for (int it = 0; it < 200; ++it) {
        for (std::size_t i = 0; i < u; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < u; ++j) acc += A[i][j] * v[j];
            w[i] = acc;
        }
        double n = 0.0;
        for (double x : w) n = std::max(n, std::abs(x));
        if (n == 0.0) return 0.0;
        for (std::size_t i = 0; i < u; ++i) v[i] = w[i] / n;
        r = n;
    }
    return r;
}

double hawkes_intensity(const HawkesParams& p,
                        const std::vector<std::pair<int, double>>& history, int u,
                        double t) {
    p.validate();
    double lam = p.mu[u];
    for (const auto& [v, ti] : history) {
        if (!(ti < t))
            throw std::runtime_error("hawkes_intensity: history event at or after query time");
        lam += p.A[u][v] * p.beta * std::exp(-p.beta * (t - ti));
    }
    return lam;
}

Sequence simulate_hawkes(const HawkesParams& p, double horizon, std::uint64_t seed,
                         const std::string& seq_id) {
    p.validate();
    if (p.spectral_radius() >= 1.0)
        throw std::runtime_error("simulate_hawkes: unstable excitation matrix "
                                 "(spectral radius >= 1)");
    const std::size_t U = p.num_users();
    RandomStream rng(seed);
    std::vector<double> S(U, 0.0);  // decayed excitation per source user
    std::vector<double> lam(U);
    auto intensities = [&](double /*t*/) {
        double total = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
            double acc = p.mu[u];
            for (std::size_t v = 0; v < U; ++v) acc += p.A[u][v] * p.beta * S[v];
            lam[u] = acc;
            total += acc;
        }
        return total;
    };

    Sequence seq;
    seq.id = seq_id;
    double t = 0.0;
    double bound = intensities(t);
    while (true) {
        double w = -std::log(rng.uniform_pos()) / bound;
        double tn = t + w;
        if (tn > horizon) break;
        double decay = std::exp(-p.beta * w);
        for (double& s : S) s *= decay;
        t = tn;
        double total = intensities(t);
        if (rng.uniform() * bound <= total) {
            double u = rng.uniform() * total;
            std::size_t user = U - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < U; ++i) {
                acc += lam[i];
                if (u < acc) {
                    user = i;
                    break;
                }
            }
            Event e;
            e.mark = static_cast<int>(user);
            e.time = t;
            seq.events.push_back(e);
            S[user] += 1.0;
            bound = intensities(t);
        } else {
            bound = total;
        }
    }
    return seq;
}

double hawkes_nll(const HawkesParams& p, const std::vector<Sequence>& seqs, double horizon) {
    p.validate();
    const std::size_t U = p.num_users();
    double nll = 0.0;
    for (const auto& seq : seqs) {
        std::vector<double> S(U, 0.0);
        double prev_t = 0.0;
        for (const auto& e : seq.events) {
            if (e.time > horizon)
                throw std::runtime_error("hawkes_nll: event beyond horizon");
            double decay = std::exp(-p.beta * (e.time - prev_t));
            for (double& s : S) s *= decay;
            double lam = p.mu[e.mark];
            for (std::size_t v = 0; v < U; ++v) lam += p.A[e.mark][v] * p.beta * S[v];
            nll -= std::log(lam);
            S[e.mark] += 1.0;
            prev_t = e.time;
        }
        double mu_sum = 0.0;
        for (double m : p.mu) mu_sum += m;
        nll += horizon * mu_sum;
        for (const auto& e : seq.events) {
            double f = 1.0 - std::exp(-p.beta * (horizon - e.time));
            for (std::size_t u = 0; u < U; ++u) nll += p.A[u][e.mark] * f;
        }
    }
    if (!std::isfinite(nll)) throw std::runtime_error("hawkes_nll: non-finite result");
    return nll;
}

namespace {

// data-only sufficient statistics for the exponential-kernel likelihood at
// fixed beta
struct HawkesStats {
    struct Ev {
        int user;
        std::vector<double> k;  // beta-scaled decayed counts per source user
    };
    std::vector<Ev> events;
    std::vector<double> d;  // per source user: sum of (1 - exp(-beta (T - t_i)))
    std::size_t n_seq = 0;

    static HawkesStats build(const std::vector<Sequence>& seqs, int n_users, double beta,
                             double horizon) {
        HawkesStats st;
        st.d.assign(n_users, 0.0);
        st.n_seq = seqs.size();
        for (const auto& seq : seqs) {
            std::vector<double> S(n_users, 0.0);
            double prev_t = 0.0;
            for (const auto& e : seq.events) {
                if (e.mark < 0 || e.mark >= n_users)
                    throw std::runtime_error("hawkes: user index out of range");
                if (e.time > horizon)
                    throw std::runtime_error("hawkes: event beyond horizon");
                double decay = std::exp(-beta * (e.time - prev_t));
                for (double& s : S) s *= decay;
                Ev ev;
                ev.user = e.mark;
                ev.k.resize(n_users);
                for (int v = 0; v < n_users; ++v) ev.k[v] = beta * S[v];
                st.events.push_back(std::move(ev));
                S[e.mark] += 1.0;
                prev_t = e.time;
                st.d[e.mark] += 1.0 - std::exp(-beta * (horizon - e.time));
            }
        }
        return st;
    }
};

double nll_tape(ParamStore& ps, const HawkesStats& st, int n_users, double horizon,
                bool with_grad) {
    Tape T;
    Var mu = T.softplus_(T.param(ps, "mu_raw"));
    Var A = T.softplus_(T.param(ps, "A_raw"));
    // compensator
    Var comp = T.scale(T.sum(mu), horizon * static_cast<double>(st.n_seq));
    for (int u = 0; u < n_users; ++u)
        comp = T.add(comp, T.dot_const(T.row(A, u), st.d));
    Var nll = comp;
    for (const auto& ev : st.events) {
        Var lam = T.add(T.pick(mu, ev.user), T.dot_const(T.row(A, ev.user), ev.k));
        nll = T.sub(nll, T.log_(lam));
    }
    double v = T.value(nll);
    if (with_grad) {
        T.backward(nll);
        T.accumulate_grads();
    }
    return v;
}

}  // namespace

double hawkes_nll_grad(ParamStore& ps, const std::vector<Sequence>& seqs, int n_users,
                       double beta, double horizon) {
    HawkesStats st = HawkesStats::build(seqs, n_users, beta, horizon);
    return nll_tape(ps, st, n_users, horizon, true);
}

namespace {
double inv_softplus(double y) {
    // solve softplus(x) = y
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}
}  // namespace

HawkesParams fit_hawkes_mle(const std::vector<Sequence>& seqs, int n_users, double beta,
                            double horizon, const HawkesFitConfig& cfg) {
    if (seqs.empty()) throw std::runtime_error("fit_hawkes_mle: no sequences");
    HawkesStats st = HawkesStats::build(seqs, n_users, beta, horizon);

    double rate0 = static_cast<double>(st.events.size()) /
                   (horizon * static_cast<double>(st.n_seq) * n_users);
    rate0 = std::max(rate0, 1e-3);

    ParamStore ps;
    Tensor mu0(n_users, 1);
    for (double& x : mu0.v) x = inv_softplus(rate0);
    ps.add("mu_raw", std::move(mu0));
    Tensor a0(n_users, n_users);
    for (double& x : a0.v) x = inv_softplus(0.1 / n_users);
    ps.add("A_raw", std::move(a0));

    for (int it = 0; it < cfg.iters; ++it) {
        nll_tape(ps, st, n_users, horizon, true);
        ps.adam_step(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    }

    HawkesParams out;
    out.beta = beta;
    out.mu.resize(n_users);
    const Tensor& mu_raw = ps.value("mu_raw");
    for (int u = 0; u < n_users; ++u)
        out.mu[u] = std::log1p(std::exp(mu_raw.v[u]));
    const Tensor& A_raw = ps.value("A_raw");
    out.A.assign(n_users, std::vector<double>(n_users));
    for (int u = 0; u < n_users; ++u)
        for (int v = 0; v < n_users; ++v) {
            double x = A_raw.at(u, v);
            out.A[u][v] = x > 30.0 ? x : std::log1p(std::exp(x));
        }
    return out;
}

CommunityAssignment assign_communities(const std::vector<std::vector<double>>& A, int k,
                                       std::uint64_t seed) {
    const int U = static_cast<int>(A.size());
    if (k < 1) throw std::runtime_error("assign_communities: K must be >= 1");
    if (k > U) throw std::runtime_error("assign_communities: K exceeds user count");
    CommunityAssignment out;
    out.k = k;
    out.labels.assign(U, 0);
    if (k == 1) return out;

    // feature: concatenated out-influence row and in-influence column, unit L2
    std::vector<std::vector<double>> X(U, std::vector<double>(2 * U));
    for (int u = 0; u < U; ++u) {
        for (int v = 0; v < U; ++v) {
            X[u][v] = A[u][v];
            X[u][U + v] = A[v][u];
        }
        double n = 0.0;
        for (double x : X[u]) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0)
            for (double& x : X[u]) x /= n;
    }

    auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double t = a[i] - b[i];
            d += t * t;
        }
        return d;
    };

    double best_wcss = 0.0;
    std::vector<int> best_labels;
    for (int restart = 0; restart < 10; ++restart) {
        RandomStream rng(seed + static_cast<std::uint64_t>(restart) * 0x9e3779b9ULL);
        // distinct random initial centers
        std::vector<int> idx(U);
        for (int i = 0; i < U; ++i) idx[i] = i;
        for (int i = U - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        std::vector<std::vector<double>> centers;
        for (int c = 0; c < k; ++c) centers.push_back(X[idx[c]]);

        std::vector<int> labels(U, -1);
        for (int iter = 0; iter < 100; ++iter) {
            bool changed = false;
            for (int u = 0; u < U; ++u) {
                int bc = 0;
                double bd = dist2(X[u], centers[0]);
                for (int c = 1; c < k; ++c) {
                    double d = dist2(X[u], centers[c]);
                    if (d < bd) {
                        bd = d;
                        bc = c;
                    }
                }
                if (labels[u] != bc) {
                    labels[u] = bc;
                    changed = true;
                }
            }
            if (!changed) break;
            for (int c = 0; c < k; ++c) {
                std::vector<double> mean(2 * U, 0.0);
                int n = 0;
                for (int u = 0; u < U; ++u)
                    if (labels[u] == c) {
                        for (int i = 0; i < 2 * U; ++i) mean[i] += X[u][i];
                        ++n;
                    }
                if (n == 0) {
                    // re-seed an empty cluster on the farthest point
                    int far = 0;
                    double fd = -1.0;
                    for (int u = 0; u < U; ++u) {
                        double d = dist2(X[u], centers[labels[u]]);
                        if (d > fd) {
                            fd = d;
                            far = u;
                        }
                    }
                    centers[c] = X[far];
                } else {
                    for (double& x : mean) x /= n;
                    centers[c] = std::move(mean);
                }
            }
        }
        double wcss = 0.0;
        for (int u = 0; u < U; ++u) wcss += dist2(X[u], centers[labels[u]]);
        if (best_labels.empty() || wcss < best_wcss) {
            best_wcss = wcss;
            best_labels = labels;
        }
    }
    out.labels = std::move(best_labels);
    return out;
}

static const char kHawkesMagic[] = "CTESHAWKES 1";

void HawkesParams::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write hawkes params '" + path + "'");
    char buf[32];
    auto w = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        out << buf;
    };
    out << kHawkesMagic << "\n" << mu.size() << " ";
    w(beta);
    out << "\n";
    for (std::size_t u = 0; u < mu.size(); ++u) {
        w(mu[u]);
        out << (u + 1 == mu.size() ? "\n" : " ");
    }
    for (const auto& row : A) {
        for (std::size_t v = 0; v < row.size(); ++v) {
            w(row[v]);
            out << (v + 1 == row.size() ? "\n" : " ");
        }
    }
}

HawkesParams HawkesParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open hawkes params '" + path + "'");
    std::string magic;
    std::getline(in, magic);
    if (magic != kHawkesMagic)
        throw std::runtime_error("bad hawkes params magic in '" + path + "'");
    std::size_t u;
    HawkesParams p;
    if (!(in >> u >> p.beta)) throw std::runtime_error("truncated hawkes params");
    p.mu.resize(u);
    for (auto& m : p.mu)
        if (!(in >> m)) throw std::runtime_error("truncated hawkes params");
    p.A.assign(u, std::vector<double>(u));
    for (auto& row : p.A)
        for (auto& a : row)
            if (!(in >> a)) throw std::runtime_error("truncated hawkes params");
    p.validate();
    return p;
}

}  // namespace ctes
