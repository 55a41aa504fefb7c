#include "ctes/imtpp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctes {

namespace {
constexpr double kDistFloor = 1e-6;

double event_dd(const Event& a, const Event& b) {
    auto [x0, y0] = *a.location;
    auto [x1, y1] = *b.location;
    return std::hypot(x1 - x0, y1 - y0);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
}

}  // namespace

ImtppModel ImtppModel::make(const ModelConfig& cfg, const LogNormalParams& prior,
                            std::uint64_t seed, int max_missing_per_gap) {
    ImtppModel m;
    m.p = MtppModel::make(cfg, seed);
    m.q_enc = Encoder{EncoderConfig{cfg.n_marks, cfg.d_emb, cfg.d_in, cfg.d_h}, "q.enc."};
    m.q_time = LogNormalHead{"q.time.", cfg.d_h + cfg.d_in, false};
    m.q_mark = MarkHead{"q.mark.", cfg.d_h + cfg.d_in, cfg.n_marks, false};
    m.prior = prior;
    m.max_missing_per_gap = max_missing_per_gap;
    RandomStream rng(mix(seed, 0x71f3));
    m.q_enc.init(m.q_params, rng);
    m.q_time.init(m.q_params, rng);
    m.q_mark.init(m.q_params, rng);
    // start the posterior at the prior so the KL penalty begins near zero
    m.q_params.value("q.time.b1").v[0] = prior.mu;
    double pre = std::max(prior.sigma2 - 1e-6, 1e-6);
    m.q_params.value("q.time.b2").v[0] =
        pre > 30.0 ? pre : std::log(std::expm1(pre));  // softplus^-1
    return m;
}

namespace {

// result of sampling one observed gap from the posterior
struct GapRun {
    std::vector<MissingEvent> events;
    Var h_after = -1;
    Var qh_after = -1;
    Var pending = -1;  // sum of sampled gap vars; -1 when empty
    double pending_val = 0.0;
    Var kl = -1;  // -1 when empty
};

GapRun run_gap(ImtppModel& M, Tape& T, Var h, Var qh, double t_k, double t_next,
               Var feat_next, NoiseSource& noise, int max_count) {
    GapRun g;
    g.h_after = h;
    g.qh_after = qh;
    const double span = t_next - t_k;
    const bool p_recurrent = !M.p.cfg.constant_heads;
    while (static_cast<int>(g.events.size()) < max_count) {
        Var qin = T.concat(g.qh_after, feat_next);
        auto [qmu, qs2] = M.q_time.eval(T, M.q_params, qin);
        double z = noise.normal();
        Var expo = T.add(qmu, T.scale(T.sqrt_(qs2), z));
        Var dt = T.exp_(expo);
        double remain = span - g.pending_val - T.value(dt);
        if (remain <= 0.0) break;  // candidate overshoots the next observed event

        Var qlogits = M.q_mark.logits(T, M.q_params, qin);
        std::vector<double> probs = softmax(T.val(qlogits).v);
        double u = noise.uniform();
        int mark = static_cast<int>(probs.size()) - 1;
        double acc = 0.0;
        for (std::size_t c = 0; c < probs.size(); ++c) {
            acc += probs[c];
            if (u < acc) {
                mark = static_cast<int>(c);
                break;
            }
        }

        Var kl_gap = T.add(kl_lognormal_t(T, qmu, qs2, M.prior),
                           kl_categorical_uniform_t(T, qlogits));
        g.kl = g.kl < 0 ? kl_gap : T.add(g.kl, kl_gap);

        if (p_recurrent) {
            Var x = M.p.enc.featurize(T, M.p.params, mark, expo, T.scalar(0.0));
            g.h_after = M.p.enc.step(T, M.p.params, g.h_after, x);
        }
        Var qx = M.q_enc.featurize(T, M.q_params, mark, expo, T.scalar(0.0));
        g.qh_after = M.q_enc.step(T, M.q_params, g.qh_after, qx);

        g.pending = g.pending < 0 ? dt : T.add(g.pending, dt);
        g.pending_val = g.pending_val + T.value(dt);
        g.events.push_back(MissingEvent{mark, t_k + g.pending_val});
    }
    return g;
}

// weighted NLL term of observed event `nxt` following `prev`, with the time
// gap given either as a live var (missing events in between) or as a plain
// double. Arithmetic order matches MtppModel::sequence_nll_t.
Var score_observed(MtppModel& p, Tape& T, Var h, const Event& prev, const Event& nxt,
                   Var dt_var /* -1 => use double gap */) {
    const ModelConfig& cfg = p.cfg;
    bool use_dist = cfg.has_locations && cfg.w_dist > 0.0;
    Var term = T.scalar(0.0);
    if (cfg.w_mark > 0.0) {
        Var lg = p.mark_head.logits(T, p.params, h);
        term = T.add(term, T.scale(mark_nll_t(T, lg, nxt.mark), cfg.w_mark));
    }
    if (cfg.w_time > 0.0) {
        auto [mu, s2] = p.time_head.eval(T, p.params, h);
        Var lp = dt_var >= 0 ? lognormal_logpdf_t(T, dt_var, mu, s2)
                             : lognormal_logpdf_t(T, nxt.time - prev.time, mu, s2);
        term = T.add(term, T.scale(lp, -cfg.w_time));
    }
    if (use_dist) {
        double dd = std::max(event_dd(prev, nxt), kDistFloor);
        auto [mu, s2] = p.dist_head.eval(T, p.params, h);
        term = T.add(term, T.scale(lognormal_logpdf_t(T, dd, mu, s2), -cfg.w_dist));
    }
    return term;
}

// q-side featurization of the conditioning next observed event
Var featurize_next(ImtppModel& M, Tape& T, const Sequence& seq, std::size_t i_next) {
    auto [ldt, ldd1] = encoder_delta_features(seq, i_next);
    return M.q_enc.featurize(T, M.q_params, seq.events[i_next].mark, T.scalar(ldt),
                             T.scalar(ldd1));
}

}  // namespace

Var ImtppModel::elbo_t(Tape& T, const Sequence& seq, NoiseSource& noise,
                       std::vector<MissingEvent>* sampled) {
    const std::size_t K = seq.events.size();
    if (K < 2) throw std::runtime_error("elbo: sequence '" + seq.id + "' needs >= 2 events");
    const bool p_recurrent = !p.cfg.constant_heads;

    Var nll_obs = T.scalar(0.0);
    Var kl_total = T.scalar(0.0);
    Var h = p_recurrent ? p.enc.s0(T, p.params) : T.leaf(Tensor::zeros(p.cfg.d_h));
    Var qh = q_enc.s0(T, q_params);

    Var pending = -1;  // live gap sum carried from the previous observed gap
    for (std::size_t i = 0; i < K; ++i) {
        // p and q consume observed event i
        if (p_recurrent) {
            Var x;
            if (pending >= 0) {
                Var gap = T.sub(T.scalar(seq.events[i].time - seq.events[i - 1].time),
                                pending);
                double ldd1 = 0.0;
                if (i > 0 && seq.events[i].location && seq.events[i - 1].location)
                    ldd1 = std::log(event_dd(seq.events[i - 1], seq.events[i]) + 1.0);
                x = p.enc.featurize(T, p.params, seq.events[i].mark, T.log_(gap),
                                    T.scalar(ldd1));
            } else {
                auto [ldt, ldd1] = encoder_delta_features(seq, i);
                x = p.enc.featurize(T, p.params, seq.events[i].mark, T.scalar(ldt),
                                    T.scalar(ldd1));
            }
            h = p.enc.step(T, p.params, h, x);
        }
        {
            Var qx;
            if (pending >= 0) {
                Var gap = T.sub(T.scalar(seq.events[i].time - seq.events[i - 1].time),
                                pending);
                qx = q_enc.featurize(T, q_params, seq.events[i].mark, T.log_(gap),
                                     T.scalar(0.0));
            } else {
                auto [ldt, ldd1] = encoder_delta_features(seq, i);
                qx = q_enc.featurize(T, q_params, seq.events[i].mark, T.scalar(ldt),
                                     T.scalar(ldd1));
            }
            qh = q_enc.step(T, q_params, qh, qx);
        }
        if (i + 1 >= K) break;

        // posterior sampling inside (t_i, t_{i+1})
        Var feat_next = featurize_next(*this, T, seq, i + 1);
        GapRun g = run_gap(*this, T, h, qh, seq.events[i].time, seq.events[i + 1].time,
                           feat_next, noise, max_missing_per_gap);
        h = g.h_after;
        qh = g.qh_after;
        if (g.kl >= 0) kl_total = T.add(kl_total, g.kl);
        if (sampled)
            sampled->insert(sampled->end(), g.events.begin(), g.events.end());

        // score observed event i+1: the time term is the full observed
        // inter-arrival; sampled events only inform the state
        Var term = score_observed(p, T, h, seq.events[i], seq.events[i + 1], -1);
        if (!std::isfinite(T.value(term)))
            throw std::runtime_error("elbo: non-finite term in gap " + std::to_string(i) +
                                     " of sequence '" + seq.id + "'");
        nll_obs = T.add(nll_obs, term);
        pending = g.pending;
    }
    return T.neg(T.add(nll_obs, kl_total));
}

double ImtppModel::elbo(const Sequence& seq, std::uint64_t noise_seed) {
    Tape T;
    StreamNoise noise(noise_seed);
    return T.value(elbo_t(T, seq, noise));
}

std::vector<MissingEvent> ImtppModel::sample_missing_between(const Event& e_k,
                                                             const Event& e_next,
                                                             NoiseSource& noise,
                                                             int max_count) {
    if (!(e_k.time < e_next.time))
        throw std::runtime_error("sample_missing_between: events out of order");
    if (max_count < 0) throw std::runtime_error("sample_missing_between: negative max_count");
    Tape T;
    Var h = p.cfg.constant_heads ? T.leaf(Tensor::zeros(p.cfg.d_h)) : p.enc.s0(T, p.params);
    Var qh = q_enc.s0(T, q_params);
    double dt_next = e_next.time - e_k.time;
    Var feat_next = q_enc.featurize(T, q_params, e_next.mark, T.scalar(std::log(dt_next)),
                                    T.scalar(0.0));
    GapRun g = run_gap(*this, T, h, qh, e_k.time, e_next.time, feat_next, noise, max_count);
    return g.events;
}

Sequence ImtppModel::impute(const Sequence& seq, int samples_per_gap, std::uint64_t seed) {
    if (samples_per_gap < 1) throw std::runtime_error("impute: samples_per_gap must be >= 1");
    const std::size_t K = seq.events.size();
    Sequence out;
    out.id = seq.id;
    out.region = seq.region;
    if (K < 2) {
        out.events = seq.events;
        return out;
    }
    const bool p_recurrent = !p.cfg.constant_heads;
    Tape T;
    Var h = p_recurrent ? p.enc.s0(T, p.params) : T.leaf(Tensor::zeros(p.cfg.d_h));
    Var qh = q_enc.s0(T, q_params);
    Var pending = -1;

    for (std::size_t i = 0; i < K; ++i) {
        out.events.push_back(seq.events[i]);
        // consume observed event i
        auto consume = [&](Encoder& enc, ParamStore& ps, Var state, bool use_dd) {
            Var x;
            if (pending >= 0) {
                Var gap = T.sub(T.scalar(seq.events[i].time - seq.events[i - 1].time),
                                pending);
                double ldd1 = 0.0;
                if (use_dd && i > 0 && seq.events[i].location &&
                    seq.events[i - 1].location)
                    ldd1 = std::log(event_dd(seq.events[i - 1], seq.events[i]) + 1.0);
                x = enc.featurize(T, ps, seq.events[i].mark, T.log_(gap), T.scalar(ldd1));
            } else {
                auto [ldt, ldd1] = encoder_delta_features(seq, i);
                x = enc.featurize(T, ps, seq.events[i].mark, T.scalar(ldt), T.scalar(ldd1));
            }
            return enc.step(T, ps, state, x);
        };
        if (p_recurrent) h = consume(p.enc, p.params, h, true);
        qh = consume(q_enc, q_params, qh, false);
        if (i + 1 >= K) break;

        Var feat_next = featurize_next(*this, T, seq, i + 1);
        GapRun best;
        double best_score = 0.0;
        bool have_best = false;
        for (int trial = 0; trial < samples_per_gap; ++trial) {
            StreamNoise noise(mix(mix(seed, i), static_cast<std::uint64_t>(trial)));
            GapRun g = run_gap(*this, T, h, qh, seq.events[i].time,
                               seq.events[i + 1].time, feat_next, noise,
                               max_missing_per_gap);
            double score =
                -T.value(score_observed(p, T, g.h_after, seq.events[i], seq.events[i + 1],
                                        -1));
            if (g.kl >= 0) score -= T.value(g.kl);
            if (!have_best || score > best_score) {
                best = g;
                best_score = score;
                have_best = true;
            }
        }
        h = best.h_after;
        qh = best.qh_after;
        pending = best.pending;
        for (const MissingEvent& me : best.events) {
            Event e;
            e.mark = me.mark;
            e.time = me.time;
            e.imputed = true;
            if (seq.events[i].location && seq.events[i + 1].location) {
                double f = (me.time - seq.events[i].time) /
                           (seq.events[i + 1].time - seq.events[i].time);
                e.location = {seq.events[i].location->first * (1 - f) +
                                  seq.events[i + 1].location->first * f,
                              seq.events[i].location->second * (1 - f) +
                                  seq.events[i + 1].location->second * f};
            }
            out.events.push_back(e);
        }
    }
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    return out;
}

double ImtppModel::observed_nll(const Sequence& merged) {
    const std::size_t K = merged.events.size();
    if (K < 2)
        throw std::runtime_error("observed_nll: sequence '" + merged.id +
                                 "' needs >= 2 events");
    const bool p_recurrent = !p.cfg.constant_heads;
    Tape T;
    Var h = p_recurrent ? p.enc.s0(T, p.params) : T.leaf(Tensor::zeros(p.cfg.d_h));
    double total = 0.0;
    std::size_t prev_obs = K;  // index of the last observed event seen so far
    for (std::size_t j = 0; j < K; ++j) {
        const Event& e = merged.events[j];
        if (!e.imputed) {
            if (prev_obs < K)
                total += T.value(
                    score_observed(p, T, h, merged.events[prev_obs], e, -1));
            prev_obs = j;
        }
        if (!p_recurrent) continue;
        double ldt = 0.0, ldd1 = 0.0;
        if (j > 0) ldt = std::log(e.time - merged.events[j - 1].time);
        if (!e.imputed && j > 0) {
            // distance feature pairs consecutive observed events
            std::size_t q = j;
            while (q > 0 && merged.events[--q].imputed) {}
            if (!merged.events[q].imputed && merged.events[q].location && e.location)
                ldd1 = std::log(event_dd(merged.events[q], e) + 1.0);
        }
        Var x = p.enc.featurize(T, p.params, e.mark, T.scalar(j > 0 ? ldt : 0.0),
                                T.scalar(j > 0 ? ldd1 : 0.0));
        h = p.enc.step(T, p.params, h, x);
    }
    return total;
}

std::vector<Event> ImtppModel::forecast_with_missing(const Sequence& prefix, int horizon,
                                                     std::uint64_t seed,
                                                     int samples_per_gap,
                                                     bool point_estimates) {
    Sequence merged = impute(prefix, samples_per_gap, mix(seed, 0xf0));
    return p.forecast(merged, horizon, mix(seed, 0x0f), point_estimates);
}

TrainTrace train_imtpp(ImtppModel& model, const Dataset& train_ds, const Dataset* val_ds,
                       const TrainConfig& tc) {
    if (train_ds.sequences.empty()) throw std::runtime_error("train_imtpp: empty dataset");
    const std::size_t n = train_ds.sequences.size();
    TrainTrace trace;
    RandomStream rng(tc.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.below(i + 1)]);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < n; start += tc.batch_size) {
            std::size_t end = std::min(n, start + tc.batch_size);
            Tape T;
            Var batch = T.scalar(0.0);
            for (std::size_t j = start; j < end; ++j) {
                const Sequence& seq = train_ds.sequences[order[j]];
                StreamNoise noise(rng.next_u64());
                Var neg_elbo = T.neg(model.elbo_t(T, seq, noise));
                double v = T.value(neg_elbo);
                if (!std::isfinite(v))
                    throw std::runtime_error("non-finite ELBO on sequence '" + seq.id + "'");
                batch = T.add(batch, T.scale(neg_elbo, 1.0 / static_cast<double>(
                                                           seq.events.size() - 1)));
            }
            batch = T.scale(batch, 1.0 / static_cast<double>(end - start));
            epoch_sum += T.value(batch) * static_cast<double>(end - start);
            T.backward(batch);
            T.accumulate_grads();
            clip_global_norm(model.p.params, tc.clip);
            clip_global_norm(model.q_params, tc.clip);
            model.p.params.adam_step(tc.lr, tc.beta1, tc.beta2, tc.eps);
            model.q_params.adam_step(tc.lr, tc.beta1, tc.beta2, tc.eps);
        }
        trace.train_loss.push_back(epoch_sum / static_cast<double>(n));
        if (val_ds && !val_ds->sequences.empty()) {
            double v = 0.0;
            for (const auto& seq : val_ds->sequences)
                v -= model.elbo(seq, mix(tc.seed, 0x5eed)) /
                     static_cast<double>(seq.events.size() - 1);
            trace.val_loss.push_back(v / static_cast<double>(val_ds->sequences.size()));
        }
    }
    return trace;
}

LogNormalParams default_missing_prior(const Dataset& ds) {
    std::vector<double> gaps;
    for (const auto& s : ds.sequences)
        for (std::size_t i = 1; i < s.events.size(); ++i)
            gaps.push_back(s.events[i].time - s.events[i - 1].time);
    if (gaps.empty()) throw std::runtime_error("default_missing_prior: no gaps in dataset");
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    double median = gaps[gaps.size() / 2];
    return LogNormalParams{std::log(median / 2.0), 1.0};
}

}  // namespace ctes
