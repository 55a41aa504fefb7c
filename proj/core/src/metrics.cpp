#include "ctes/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctes {

MetricsReport evaluate(MtppModel& model, const Dataset& test) {
    if (static_cast<int>(test.vocab.size()) != model.cfg.n_marks)
        throw std::runtime_error("evaluate: vocabulary size mismatch (model " +
                                 std::to_string(model.cfg.n_marks) + ", dataset " +
                                 std::to_string(test.vocab.size()) + ")");
    MetricsReport rep;
    const int ks[3] = {1, 5, 10};
    std::map<int, std::size_t> hits;
    for (int k : ks) hits[k] = 0;
    std::size_t n_pred = 0;
    double time_abs = 0.0, dist_abs = 0.0, nll_sum = 0.0;
    std::size_t dist_n = 0;

    for (const auto& seq : test.sequences) {
        if (seq.events.size() < 2) continue;
        Tape T;
        std::vector<Var> states;
        if (!model.cfg.constant_heads) states = model.enc.encode(T, model.params, seq);
        Var zero_h = model.cfg.constant_heads ? T.leaf(Tensor::zeros(model.cfg.d_h)) : -1;
        for (std::size_t i = 0; i + 1 < seq.events.size(); ++i) {
            Var h = model.cfg.constant_heads ? zero_h : states[i];
            const Event& nxt = seq.events[i + 1];
            Var lg = model.mark_head.logits(T, model.params, h);
            const auto& logits = T.val(lg).v;
            double lt = logits[nxt.mark];
            int rank = 0;
            for (int c = 0; c < static_cast<int>(logits.size()); ++c) {
                if (logits[c] > lt) ++rank;
                else if (logits[c] == lt && c < nxt.mark) ++rank;
            }
            for (int k : ks)
                if (rank < k) ++hits[k];
            auto [mu, s2] = model.time_head.eval(T, model.params, h);
            double dt_hat = std::exp(T.value(mu));
            time_abs += std::abs(dt_hat - (nxt.time - seq.events[i].time));
            if (model.cfg.has_locations) {
                auto [mu_d, s2_d] = model.dist_head.eval(T, model.params, h);
                auto [x0, y0] = *seq.events[i].location;
                auto [x1, y1] = *nxt.location;
                dist_abs += std::abs(std::exp(T.value(mu_d)) - std::hypot(x1 - x0, y1 - y0));
                ++dist_n;
            }
            ++n_pred;
        }
        nll_sum += model.sequence_nll(seq);
    }
    if (n_pred == 0) throw std::runtime_error("evaluate: no prediction targets in test set");
    rep.time_mae = time_abs / static_cast<double>(n_pred);
    if (dist_n > 0) rep.dist_mae = dist_abs / static_cast<double>(dist_n);
    for (int k : ks)
        rep.mark_accuracy_at_k[k] =
            static_cast<double>(hits[k]) / static_cast<double>(n_pred);
    rep.nll_per_event = nll_sum / static_cast<double>(n_pred);
    return rep;
}

ImputationMetrics evaluate_imputation(const Sequence& imputed,
                                      const std::vector<Event>& deleted) {
    std::vector<double> observed_times;
    std::vector<double> imputed_times;
    for (const auto& e : imputed.events)
        (e.imputed ? imputed_times : observed_times).push_back(e.time);

    ImputationMetrics m;
    std::size_t n_del = deleted.size();
    std::size_t n_imp = imputed_times.size();
    m.count_error = std::abs(static_cast<double>(n_imp) - static_cast<double>(n_del)) /
                    std::max<double>(static_cast<double>(n_del), 1.0);
    if (n_del == 0 || n_imp == 0) return m;

    // bin both sides by observed gap, then match greedily within each gap
    auto gap_of = [&](double t) {
        auto it = std::upper_bound(observed_times.begin(), observed_times.end(), t);
        return static_cast<long>(it - observed_times.begin());
    };
    std::map<long, std::pair<std::vector<double>, std::vector<double>>> gaps;
    for (double t : imputed_times) gaps[gap_of(t)].first.push_back(t);
    for (const auto& e : deleted) gaps[gap_of(e.time)].second.push_back(e.time);

    double abs_sum = 0.0;
    std::size_t matched = 0;
    for (auto& [g, pair] : gaps) {
        auto& [imp, del] = pair;
        std::vector<bool> used_i(imp.size(), false), used_d(del.size(), false);
        while (true) {
            double best = 0.0;
            long bi = -1, bd = -1;
            for (std::size_t a = 0; a < imp.size(); ++a) {
                if (used_i[a]) continue;
                for (std::size_t b = 0; b < del.size(); ++b) {
                    if (used_d[b]) continue;
                    double d = std::abs(imp[a] - del[b]);
                    if (bi < 0 || d < best) {
                        best = d;
                        bi = static_cast<long>(a);
                        bd = static_cast<long>(b);
                    }
                }
            }
            if (bi < 0) break;
            used_i[bi] = true;
            used_d[bd] = true;
            abs_sum += best;
            ++matched;
        }
    }
    if (matched > 0) m.matched_mae = abs_sum / static_cast<double>(matched);
    return m;
}

}  // namespace ctes
