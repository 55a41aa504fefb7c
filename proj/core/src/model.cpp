#include "ctes/model.hpp"

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
}  // namespace

MtppModel MtppModel::make(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.n_marks < 1) throw std::runtime_error("model needs a non-empty mark vocabulary");
    if (cfg.w_mark < 0 || cfg.w_time < 0 || cfg.w_dist < 0 ||
        (cfg.w_mark == 0 && cfg.w_time == 0 && cfg.w_dist == 0))
        throw std::runtime_error("loss weights must be >= 0 and not all zero");
    MtppModel m;
    m.cfg = cfg;
    m.enc = Encoder{EncoderConfig{cfg.n_marks, cfg.d_emb, cfg.d_in, cfg.d_h}, "enc."};
    m.time_head = LogNormalHead{"time.", cfg.d_h, cfg.constant_heads};
    m.dist_head = LogNormalHead{"dist.", cfg.d_h, cfg.constant_heads};
    m.mark_head = MarkHead{"mark.", cfg.d_h, cfg.n_marks, cfg.constant_heads};
    RandomStream rng(seed);
    m.enc.init(m.params, rng);
    m.time_head.init(m.params, rng);
    if (cfg.has_locations) m.dist_head.init(m.params, rng);
    m.mark_head.init(m.params, rng);
    return m;
}

void MtppModel::set_temporal_only(bool on) { cfg.w_dist = on ? 0.0 : 1.0; }

Var MtppModel::sequence_nll_t(Tape& T, const Sequence& seq) {
    const std::size_t K = seq.events.size();
    if (K < 2) throw std::runtime_error("sequence '" + seq.id +
                                        "' has no prediction target (needs >= 2 events)");
    bool use_dist = cfg.has_locations && cfg.w_dist > 0.0;
    Var nll = T.scalar(0.0);
    Var h = cfg.constant_heads ? T.leaf(Tensor::zeros(cfg.d_h)) : enc.s0(T, params);
    for (std::size_t i = 0; i < K; ++i) {
        if (!cfg.constant_heads) {
            auto [ldt, ldd1] = encoder_delta_features(seq, i);
            Var x = enc.featurize(T, params, seq.events[i].mark, T.scalar(ldt),
                                  T.scalar(ldd1));
            h = enc.step(T, params, h, x);
        }
        if (i + 1 >= K) break;
        const Event& nxt = seq.events[i + 1];
        double dt = nxt.time - seq.events[i].time;
        Var term = T.scalar(0.0);
        if (cfg.w_mark > 0.0) {
            Var lg = mark_head.logits(T, params, h);
            term = T.add(term, T.scale(mark_nll_t(T, lg, nxt.mark), cfg.w_mark));
        }
        if (cfg.w_time > 0.0) {
            auto [mu, s2] = time_head.eval(T, params, h);
            term = T.add(term, T.scale(lognormal_logpdf_t(T, dt, mu, s2), -cfg.w_time));
        }
        if (use_dist) {
            double dd = std::max(event_dd(seq.events[i], nxt), kDistFloor);
            auto [mu, s2] = dist_head.eval(T, params, h);
            term = T.add(term, T.scale(lognormal_logpdf_t(T, dd, mu, s2), -cfg.w_dist));
        }
        nll = T.add(nll, term);
    }
    return nll;
}

double MtppModel::sequence_nll(const Sequence& seq) {
    Tape T;
    return T.value(sequence_nll_t(T, seq));
}

NllComponents MtppModel::nll_components(const Sequence& seq) {
    const std::size_t K = seq.events.size();
    if (K < 2) throw std::runtime_error("sequence '" + seq.id + "' has no prediction target");
    Tape T;
    NllComponents out;
    Var h = cfg.constant_heads ? T.leaf(Tensor::zeros(cfg.d_h)) : 0;
    if (!cfg.constant_heads) h = enc.s0(T, params);
    for (std::size_t i = 0; i + 1 < K; ++i) {
        if (!cfg.constant_heads) {
            auto [ldt, ldd1] = encoder_delta_features(seq, i);
            Var x = enc.featurize(T, params, seq.events[i].mark, T.scalar(ldt),
                                  T.scalar(ldd1));
            h = enc.step(T, params, h, x);
        }
        const Event& nxt = seq.events[i + 1];
        Var lg = mark_head.logits(T, params, h);
        out.mark += T.value(mark_nll_t(T, lg, nxt.mark));
        auto [mu, s2] = time_head.eval(T, params, h);
        out.time -= T.value(lognormal_logpdf_t(T, nxt.time - seq.events[i].time, mu, s2));
        if (cfg.has_locations) {
            double dd = std::max(event_dd(seq.events[i], nxt), kDistFloor);
            auto [mu_d, s2_d] = dist_head.eval(T, params, h);
            out.dist -= T.value(lognormal_logpdf_t(T, dd, mu_d, s2_d));
        }
        ++out.n_terms;
    }
    return out;
}

std::vector<double> MtppModel::per_event_terms(const Sequence& seq) {
    const std::size_t K = seq.events.size();
    if (K < 2) throw std::runtime_error("sequence '" + seq.id + "' has no prediction target");
    Tape T;
    std::vector<double> terms;
    Var h = cfg.constant_heads ? T.leaf(Tensor::zeros(cfg.d_h)) : 0;
    if (!cfg.constant_heads) h = enc.s0(T, params);
    bool use_dist = cfg.has_locations && cfg.w_dist > 0.0;
    for (std::size_t i = 0; i + 1 < K; ++i) {
        if (!cfg.constant_heads) {
            auto [ldt, ldd1] = encoder_delta_features(seq, i);
            Var x = enc.featurize(T, params, seq.events[i].mark, T.scalar(ldt),
                                  T.scalar(ldd1));
            h = enc.step(T, params, h, x);
        }
        const Event& nxt = seq.events[i + 1];
        double term = 0.0;
        if (cfg.w_mark > 0.0) {
            Var lg = mark_head.logits(T, params, h);
            term += cfg.w_mark * T.value(mark_nll_t(T, lg, nxt.mark));
        }
        if (cfg.w_time > 0.0) {
            auto [mu, s2] = time_head.eval(T, params, h);
            term -= cfg.w_time *
                    T.value(lognormal_logpdf_t(T, nxt.time - seq.events[i].time, mu, s2));
        }
        if (use_dist) {
            double dd = std::max(event_dd(seq.events[i], nxt), kDistFloor);
            auto [mu_d, s2_d] = dist_head.eval(T, params, h);
            term -= cfg.w_dist * T.value(lognormal_logpdf_t(T, dd, mu_d, s2_d));
        }
        terms.push_back(term);
    }
    return terms;
}

Prediction MtppModel::predict_next(const Sequence& prefix) {
    if (prefix.events.empty()) throw std::runtime_error("predict_next: empty prefix");
    Tape T;
    Var h;
    if (cfg.constant_heads)
        h = T.leaf(Tensor::zeros(cfg.d_h));
    else
        h = enc.encode(T, params, prefix).back();
    Prediction p;
    Var lg = mark_head.logits(T, params, h);
    p.mark_probs = softmax(T.val(lg).v);
    auto [mu, s2] = time_head.eval(T, params, h);
    p.dt = std::exp(T.value(mu));
    if (cfg.has_locations) {
        auto [mu_d, s2_d] = dist_head.eval(T, params, h);
        p.dd = std::exp(T.value(mu_d));
    }
    return p;
}

std::vector<Event> MtppModel::forecast(const Sequence& prefix, int horizon,
                                       std::uint64_t seed, bool point_estimates) {
    if (horizon < 1) throw std::runtime_error("forecast: horizon must be >= 1");
    if (prefix.events.empty()) throw std::runtime_error("forecast: empty prefix");
    RandomStream rng(seed);
    Sequence work = prefix;
    std::vector<Event> out;

    // bearing of the last observed displacement; (1,0) when undefined
    double bx = 1.0, by = 0.0;
    auto update_bearing = [&](const Event& a, const Event& b) {
        if (!a.location || !b.location) return;
        double dx = b.location->first - a.location->first;
        double dy = b.location->second - a.location->second;
        double n = std::hypot(dx, dy);
        if (n > 0.0) {
            bx = dx / n;
            by = dy / n;
        }
    };
    if (work.events.size() >= 2)
        update_bearing(work.events[work.events.size() - 2], work.events.back());

    for (int step = 0; step < horizon; ++step) {
        Prediction p = predict_next(work);
        Event e;
        if (point_estimates) {
            e.mark = static_cast<int>(std::max_element(p.mark_probs.begin(),
                                                       p.mark_probs.end()) -
                                      p.mark_probs.begin());
            e.time = work.events.back().time + p.dt;
        } else {
            Tape T;
            Var h = cfg.constant_heads ? T.leaf(Tensor::zeros(cfg.d_h))
                                       : enc.encode(T, params, work).back();
            auto [mu, s2] = time_head.eval(T, params, h);
            double dt = lognormal_sample({T.value(mu), T.value(s2)}, rng.normal());
            double u = rng.uniform();
            double acc = 0.0;
            int mark = static_cast<int>(p.mark_probs.size()) - 1;
            for (std::size_t c = 0; c < p.mark_probs.size(); ++c) {
                acc += p.mark_probs[c];
                if (u < acc) {
                    mark = static_cast<int>(c);
                    break;
                }
            }
            e.mark = mark;
            e.time = work.events.back().time + dt;
        }
        if (cfg.has_locations && work.events.back().location) {
            double dd;
            if (point_estimates) {
                dd = *p.dd;
            } else {
                Tape T;
                Var h = enc.encode(T, params, work).back();
                auto [mu_d, s2_d] = dist_head.eval(T, params, h);
                dd = lognormal_sample({T.value(mu_d), T.value(s2_d)}, rng.normal());
            }
            const auto& last = *work.events.back().location;
            e.location = {last.first + dd * bx, last.second + dd * by};
            update_bearing(work.events.back(), e);
        }
        out.push_back(e);
        work.events.push_back(e);
    }
    return out;
}

void clip_global_norm(ParamStore& ps, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& name : ps.names()) {
        if (ps.is_frozen(name)) continue;
        for (double g : ps.grad(name).v) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    double s = max_norm / norm;
    for (const auto& name : ps.names())
        for (double& g : ps.grad(name).v) g *= s;
}

TrainTrace train(MtppModel& model, const Dataset& train_ds, const Dataset* val_ds,
                 const TrainConfig& tc) {
    if (train_ds.sequences.empty()) throw std::runtime_error("train: empty dataset");
    if (tc.epochs < 0 || tc.batch_size < 1 || !(tc.lr > 0.0))
        throw std::runtime_error("train: invalid config");
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
                Var nll = model.sequence_nll_t(T, seq);
                double v = T.value(nll);
                if (!std::isfinite(v))
                    throw std::runtime_error("non-finite loss on sequence '" + seq.id + "'");
                batch = T.add(batch, T.scale(nll, 1.0 / static_cast<double>(
                                                      seq.events.size() - 1)));
            }
            batch = T.scale(batch, 1.0 / static_cast<double>(end - start));
            epoch_sum += T.value(batch) * static_cast<double>(end - start);
            T.backward(batch);
            T.accumulate_grads();
            clip_global_norm(model.params, tc.clip);
            model.params.adam_step(tc.lr, tc.beta1, tc.beta2, tc.eps);
        }
        trace.train_loss.push_back(epoch_sum / static_cast<double>(n));
        if (val_ds && !val_ds->sequences.empty()) {
            double v = 0.0;
            for (const auto& seq : val_ds->sequences)
                v += model.sequence_nll(seq) / static_cast<double>(seq.events.size() - 1);
            trace.val_loss.push_back(v / static_cast<double>(val_ds->sequences.size()));
        }
    }
    return trace;
}

double dataset_nll_per_event(MtppModel& model, const Dataset& ds) {
    double sum = 0.0;
    std::size_t terms = 0;
    for (const auto& seq : ds.sequences) {
        sum += model.sequence_nll(seq);
        terms += seq.events.size() - 1;
    }
    return sum / static_cast<double>(terms);
}

double dataset_time_nll_per_event(MtppModel& model, const Dataset& ds) {
    double sum = 0.0;
    std::size_t terms = 0;
    for (const auto& seq : ds.sequences) {
        NllComponents c = model.nll_components(seq);
        sum += c.time;
        terms += static_cast<std::size_t>(c.n_terms);
    }
    return sum / static_cast<double>(terms);
}

}  // namespace ctes
