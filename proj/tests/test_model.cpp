#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ctes/model.hpp"
#include "ctes/synthetic.hpp"

using namespace ctes;

namespace {

ModelConfig small_cfg(int n_marks, bool locations = false) {
    ModelConfig mc;
    mc.n_marks = n_marks;
    mc.has_locations = locations;
    mc.d_emb = 4;
    mc.d_in = 4;
    mc.d_h = 5;
    return mc;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("sequence NLL equals the sum of per-event terms") {
    Dataset ds = gen_spatial(1, 10, 3, 5);
    MtppModel m = MtppModel::make(small_cfg(3, true), 2);
    const Sequence& s = ds.sequences[0];
    auto terms = m.per_event_terms(s);
    CHECK(terms.size() == s.events.size() - 1);
    double total = std::accumulate(terms.begin(), terms.end(), 0.0);
    CHECK(m.sequence_nll(s) == doctest::Approx(total).epsilon(1e-12));

    NllComponents c = m.nll_components(s);
    CHECK(c.n_terms == static_cast<int>(terms.size()));
    CHECK(c.weighted(m.cfg.w_mark, m.cfg.w_time, m.cfg.w_dist) ==
          doctest::Approx(m.sequence_nll(s)).epsilon(1e-10));
}

TEST_CASE("full loss gradients match finite differences") {
    Dataset ds = gen_spatial(1, 6, 2, 8);
    MtppModel m = MtppModel::make(small_cfg(2, true), 3);
    auto loss = [&]() {
        Tape T;
        Var l = m.sequence_nll_t(T, ds.sequences[0]);
        T.backward(l);
        T.accumulate_grads();
        return T.value(l);
    };
    CHECK(grad_check(loss, {&m.params}, 1e-5) < 1e-4);
}

TEST_CASE("zero epochs leave parameters untouched") {
    Dataset ds = gen_constant_lognormal(4, 8, 0.0, 1.0, 2, 1);
    MtppModel m = MtppModel::make(small_cfg(2), 4);
    ParamStore before = m.params;
    TrainConfig tc;
    tc.epochs = 0;
    TrainTrace tr = train(m, ds, nullptr, tc);
    CHECK(tr.train_loss.empty());
    for (const auto& name : before.names())
        for (std::size_t i = 0; i < before.value(name).v.size(); ++i)
            CHECK(m.params.value(name).v[i] == before.value(name).v[i]);
}

TEST_CASE("training lowers the loss on learnable data") {
    Dataset ds = gen_alternating(12, 20, 6);
    MtppModel m = MtppModel::make(small_cfg(2), 5);
    double before = dataset_nll_per_event(m, ds);
    TrainConfig tc;
    tc.epochs = 15;
    tc.lr = 5e-3;
    tc.seed = 6;
    train(m, ds, nullptr, tc);
    CHECK(dataset_nll_per_event(m, ds) < before);
}

TEST_CASE("predict_next returns a normalized mark distribution") {
    Dataset ds = gen_constant_lognormal(1, 6, 0.0, 1.0, 3, 9);
    MtppModel m = MtppModel::make(small_cfg(3), 7);
    Prediction p = m.predict_next(ds.sequences[0]);
    double mass = std::accumulate(p.mark_probs.begin(), p.mark_probs.end(), 0.0);
    CHECK(mass == doctest::Approx(1.0));
    CHECK(p.dt > 0.0);
    CHECK_FALSE(p.dd.has_value());
}

TEST_CASE("forecast emits strictly increasing future times") {
    Dataset ds = gen_spatial(1, 8, 2, 3);
    MtppModel m = MtppModel::make(small_cfg(2, true), 8);
    auto fc = m.forecast(ds.sequences[0], 5, 17);
    REQUIRE(fc.size() == 5);
    double last = ds.sequences[0].events.back().time;
    for (const auto& e : fc) {
        CHECK(e.time > last);
        last = e.time;
        CHECK(e.location.has_value());
    }
    // deterministic in the seed
    auto fc2 = m.forecast(ds.sequences[0], 5, 17);
    for (std::size_t i = 0; i < fc.size(); ++i) CHECK(fc[i].time == fc2[i].time);
}

TEST_CASE("constant heads ignore history") {
    ModelConfig mc = small_cfg(2);
    mc.constant_heads = true;
    MtppModel m = MtppModel::make(mc, 10);
    Dataset ds = gen_constant_lognormal(2, 10, 0.3, 0.5, 2, 11);
    Prediction a = m.predict_next(ds.sequences[0]);
    Prediction b = m.predict_next(ds.sequences[1]);
    CHECK(a.dt == b.dt);
    CHECK(a.mark_probs == b.mark_probs);
}

}  // TEST_SUITE
