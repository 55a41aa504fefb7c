#include "ctes/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace ctes {

void Encoder::init(ParamStore& ps, RandomStream& rng) const {
    const int de = cfg.d_emb, di = cfg.d_in, dh = cfg.d_h;
    ps.add_uniform(prefix + "emb", cfg.n_marks, de, de, rng);
    ps.add_uniform(prefix + "Win", di, de + 2, de + 2, rng);
    ps.add(prefix + "bin", Tensor::zeros(di));
    for (const char* g : {"z", "r", "c"}) {
        ps.add_uniform(prefix + "W" + std::string(g), dh, di, di, rng);
        ps.add_uniform(prefix + "U" + std::string(g), dh, dh, dh, rng);
        ps.add(prefix + "b" + std::string(g), Tensor::zeros(dh));
    }
    ps.add_uniform(prefix + "s0", dh, 1, dh, rng);
}

Var Encoder::featurize(Tape& T, ParamStore& ps, int mark, Var log_dt, Var log_dd1) const {
    if (mark < 0 || mark >= cfg.n_marks)
        throw std::runtime_error("featurize: mark index " + std::to_string(mark) +
                                 " out of range");
    Var e = T.row(T.param(ps, prefix + "emb"), mark);
    Var deltas = T.concat(log_dt, log_dd1);
    Var x = T.add(T.matvec(T.param(ps, prefix + "Win"), T.concat(e, deltas)),
                  T.param(ps, prefix + "bin"));
    return x;
}

Var Encoder::step(Tape& T, ParamStore& ps, Var h, Var x) const {
    if (T.val(x).rows != cfg.d_in || T.val(h).rows != cfg.d_h)
        throw std::runtime_error("encoder step: shape mismatch");
    auto gate = [&](const char* g) {
        return T.add(T.add(T.matvec(T.param(ps, prefix + "W" + std::string(g)), x),
                           T.matvec(T.param(ps, prefix + "U" + std::string(g)), h)),
                     T.param(ps, prefix + "b" + std::string(g)));
    };
    Var z = T.sigmoid_(gate("z"));
    Var r = T.sigmoid_(gate("r"));
    Var cand = T.tanh_(T.add(
        T.add(T.matvec(T.param(ps, prefix + "Wc"), x),
              T.matvec(T.param(ps, prefix + "Uc"), T.mul(r, h))),
        T.param(ps, prefix + "bc")));
    Var keep = T.mul(z, h);
    Var update = T.mul(T.add_const(T.neg(z), 1.0), cand);
    return T.add(keep, update);
}

std::pair<double, double> encoder_delta_features(const Sequence& seq, std::size_t i) {
    if (i == 0) return {0.0, 0.0};
    double dt = seq.events[i].time - seq.events[i - 1].time;
    if (!(dt > 0.0))
        throw std::runtime_error("sequence '" + seq.id + "': non-positive gap at index " +
                                 std::to_string(i));
    double dd1 = 0.0;
    if (seq.events[i].location && seq.events[i - 1].location) {
        auto [x0, y0] = *seq.events[i - 1].location;
        auto [x1, y1] = *seq.events[i].location;
        dd1 = std::log(std::hypot(x1 - x0, y1 - y0) + 1.0);
    }
    return {std::log(dt), dd1};
}

std::vector<Var> Encoder::encode(Tape& T, ParamStore& ps, const Sequence& seq) const {
    if (seq.events.empty()) throw std::runtime_error("encode: empty sequence");
    std::vector<Var> states;
    states.reserve(seq.events.size());
    Var h = s0(T, ps);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        auto [ldt, ldd1] = encoder_delta_features(seq, i);
        Var x = featurize(T, ps, seq.events[i].mark, T.scalar(ldt), T.scalar(ldd1));
        h = step(T, ps, h, x);
        states.push_back(h);
    }
    return states;
}

}  // namespace ctes
