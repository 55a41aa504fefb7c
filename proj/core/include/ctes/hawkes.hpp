#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctes/data.hpp"
#include "ctes/params.hpp"

namespace ctes {

// Multivariate exponential-kernel self-exciting process with a common
// excitation matrix. Users are event marks.
struct HawkesParams {
    std::vector<double> mu;             // base rates, one per user
    std::vector<std::vector<double>> A;  // A[u][v]: influence of v's events on u
    double beta = 1.0;

    std::size_t num_users() const { return mu.size(); }
    void validate() const;
    double spectral_radius() const;

    void save(const std::string& path) const;
    static HawkesParams load(const std::string& path);
};

struct CommunityAssignment {
    std::vector<int> labels;
    int k = 0;
};

// lambda_u(t) = mu[u] + sum_{(v,t_i): t_i < t} A[u][v] * beta * exp(-beta (t - t_i))
double hawkes_intensity(const HawkesParams& p,
                        const std::vector<std::pair<int, double>>& history, int u, double t);

// Ogata thinning; refuses unstable matrices (spectral radius >= 1).
Sequence simulate_hawkes(const HawkesParams& p, double horizon, std::uint64_t seed,
                         const std::string& seq_id = "hawkes");

// Negative log-likelihood with the closed-form exponential compensator.
double hawkes_nll(const HawkesParams& p, const std::vector<Sequence>& seqs, double horizon);

struct HawkesFitConfig {
    int iters = 500;
    double lr = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
};

// Adam MLE of mu and A (softplus-parameterized) at fixed decay beta.
HawkesParams fit_hawkes_mle(const std::vector<Sequence>& seqs, int n_users, double beta,
                            double horizon, const HawkesFitConfig& cfg);

// NLL of the softplus-parameterized raw tensors; gradients land in `ps`.
// Exposed for gradient checking.
double hawkes_nll_grad(ParamStore& ps, const std::vector<Sequence>& seqs, int n_users,
                       double beta, double horizon);

// K-means over row-normalized [out-influence ; in-influence] profiles,
// best of 10 seeded restarts.
CommunityAssignment assign_communities(const std::vector<std::vector<double>>& A, int k,
                                       std::uint64_t seed);

}  // namespace ctes
