#pragma once

#include <string>
#include <vector>

#include "ctes/params.hpp"
#include "ctes/tape.hpp"

namespace ctes {

struct LogNormalParams {
    double mu = 0.0;
    double sigma2 = 1.0;
};

// closed forms on plain doubles
double lognormal_logpdf(double x, const LogNormalParams& p);
double lognormal_sample(const LogNormalParams& p, double noise);
double lognormal_point(const LogNormalParams& p);  // median exp(mu)
double kl_lognormal(const LogNormalParams& q, const LogNormalParams& p);

std::vector<double> softmax(const std::vector<double>& logits);
double kl_categorical(const std::vector<double>& q, const std::vector<double>& p);

// Affine head emitting (mu, sigma2) from a hidden state.
// sigma2 = softplus(pre) + 1e-6 keeps the variance positive.
struct LogNormalHead {
    std::string prefix;
    int in_dim = 0;
    bool constant = false;  // bias-only head, ignores the state

    void init(ParamStore& ps, RandomStream& rng) const;
    // returns (mu, sigma2) scalar vars
    std::pair<Var, Var> eval(Tape& T, ParamStore& ps, Var s) const;
};

struct MarkHead {
    std::string prefix;
    int in_dim = 0;
    int n_marks = 0;
    bool constant = false;

    void init(ParamStore& ps, RandomStream& rng) const;
    Var logits(Tape& T, ParamStore& ps, Var s) const;
};

// tape-side densities
Var lognormal_logpdf_t(Tape& T, Var x, Var mu, Var sigma2);
Var lognormal_logpdf_t(Tape& T, double x, Var mu, Var sigma2);
Var lognormal_sample_t(Tape& T, Var mu, Var sigma2, double noise);
Var kl_lognormal_t(Tape& T, Var mu_q, Var s2_q, const LogNormalParams& prior);
Var mark_nll_t(Tape& T, Var logits, int mark);
Var kl_categorical_uniform_t(Tape& T, Var logits);

}  // namespace ctes
