#pragma once

#include <string>
#include <vector>

#include "ctes/data.hpp"
#include "ctes/params.hpp"
#include "ctes/tape.hpp"

namespace ctes {

struct EncoderConfig {
    int n_marks = 0;
    int d_emb = 16;
    int d_in = 16;
    int d_h = 32;
};

// Gated recurrent encoder over (mark embedding, log dt, log(dd+1)) features.
// The first event of a sequence has no predecessor; its delta features are 0
// so that hidden states depend on gaps only, never on absolute timestamps.
struct Encoder {
    EncoderConfig cfg;
    std::string prefix;

    void init(ParamStore& ps, RandomStream& rng) const;

    Var s0(Tape& T, ParamStore& ps) const { return T.param(ps, prefix + "s0"); }

    // log_dt / log_dd1 are scalar vars (leaves for observed events, live
    // nodes for reparameterized samples)
    Var featurize(Tape& T, ParamStore& ps, int mark, Var log_dt, Var log_dd1) const;

    // h' = z.h + (1-z).tanh_candidate, gates in (0,1)
    Var step(Tape& T, ParamStore& ps, Var h, Var x) const;

    // states s_1..s_K
    std::vector<Var> encode(Tape& T, ParamStore& ps, const Sequence& seq) const;
};

// delta features used by the encoder: {0, 0} for the first event,
// {log dt, log(dd+1)} afterwards
std::pair<double, double> encoder_delta_features(const Sequence& seq, std::size_t i);

}  // namespace ctes
