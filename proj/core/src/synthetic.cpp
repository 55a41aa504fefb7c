#include "ctes/synthetic.hpp"

#include <cmath>

#include "ctes/rng.hpp"

namespace ctes {

namespace {

std::vector<std::string> make_vocab(int n_marks, const std::string& prefix) {
    std::vector<std::string> v;
    for (int i = 0; i < n_marks; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

}  // namespace

Dataset gen_constant_lognormal(int n_seq, int seq_len, double mu, double sigma2,
                               int n_marks, std::uint64_t seed) {
    Dataset ds;
    ds.vocab = make_vocab(n_marks, "m");
    RandomStream rng(seed);
    double sigma = std::sqrt(sigma2);
    for (int s = 0; s < n_seq; ++s) {
        Sequence seq;
        seq.id = "seq" + std::to_string(s);
        double t = 0.0;
        for (int i = 0; i < seq_len; ++i) {
            t += std::exp(mu + sigma * rng.normal());
            Event e;
            e.mark = static_cast<int>(rng.below(n_marks));
            e.time = t;
            seq.events.push_back(e);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

Dataset gen_mark_biased(int n_seq, int seq_len, double p0, int n_marks, std::uint64_t seed) {
    Dataset ds;
    ds.vocab = make_vocab(n_marks, "m");
    RandomStream rng(seed);
    for (int s = 0; s < n_seq; ++s) {
        Sequence seq;
        seq.id = "seq" + std::to_string(s);
        double t = 0.0;
        for (int i = 0; i < seq_len; ++i) {
            t += std::exp(0.5 * rng.normal());
            Event e;
            e.mark = rng.uniform() < p0
                         ? 0
                         : 1 + static_cast<int>(rng.below(n_marks - 1));
            e.time = t;
            seq.events.push_back(e);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

Dataset gen_alternating(int n_seq, int seq_len, std::uint64_t seed, double noise) {
    Dataset ds;
    ds.vocab = {"short", "long"};
    RandomStream rng(seed);
    double s_noise = std::sqrt(noise);
    for (int s = 0; s < n_seq; ++s) {
        Sequence seq;
        seq.id = "seq" + std::to_string(s);
        double t = 0.0;
        for (int i = 0; i < seq_len; ++i) {
            int state = i % 2;
            double mu = state == 0 ? std::log(0.3) : std::log(2.0);
            t += std::exp(mu + s_noise * rng.normal());
            Event e;
            e.mark = state;
            e.time = t;
            seq.events.push_back(e);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

Dataset gen_parity_gaps(int n_seq, int seq_len, int n_marks, std::uint64_t seed,
                        const std::string& mark_prefix) {
    Dataset ds;
    ds.vocab = make_vocab(n_marks, mark_prefix);
    RandomStream rng(seed);
    double s_noise = std::sqrt(0.05);
    for (int s = 0; s < n_seq; ++s) {
        Sequence seq;
        seq.id = "seq" + std::to_string(s);
        double t = 0.0;
        for (int i = 0; i < seq_len; ++i) {
            double mu = i % 2 == 0 ? std::log(0.5) : std::log(1.5);
            t += std::exp(mu + s_noise * rng.normal());
            Event e;
            e.mark = static_cast<int>(rng.below(n_marks));
            e.time = t;
            seq.events.push_back(e);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

Dataset gen_spatial(int n_seq, int seq_len, int n_marks, std::uint64_t seed) {
    Dataset ds;
    ds.vocab = make_vocab(n_marks, "m");
    ds.has_locations = true;
    RandomStream rng(seed);
    for (int s = 0; s < n_seq; ++s) {
        Sequence seq;
        seq.id = "seq" + std::to_string(s);
        double t = 0.0, x = 0.0, y = 0.0;
        for (int i = 0; i < seq_len; ++i) {
            t += std::exp(0.4 * rng.normal());
            double step = std::exp(-0.5 + 0.5 * rng.normal());
            double ang = rng.uniform() * 6.283185307179586;
            x += step * std::cos(ang);
            y += step * std::sin(ang);
            Event e;
            e.mark = static_cast<int>(rng.below(n_marks));
            e.time = t;
            e.location = {x, y};
            seq.events.push_back(e);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

}  // namespace ctes
