#pragma once

#include <optional>
#include <vector>

#include "ctes/data.hpp"
#include "ctes/encoder.hpp"
#include "ctes/heads.hpp"

namespace ctes {

struct ModelConfig {
    int n_marks = 0;
    bool has_locations = false;
    int d_emb = 16;
    int d_in = 16;
    int d_h = 32;
    bool constant_heads = false;
    double w_mark = 1.0;
    double w_time = 1.0;
    double w_dist = 1.0;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    double clip = 5.0;  // global grad norm; 0 disables
};

struct TrainTrace {
    std::vector<double> train_loss;
    std::vector<double> val_loss;  // empty when no validation split given
};

struct Prediction {
    std::vector<double> mark_probs;
    double dt = 0.0;
    std::optional<double> dd;
};

struct NllComponents {
    double mark = 0.0;
    double time = 0.0;
    double dist = 0.0;
    int n_terms = 0;
    double weighted(double wm, double wt, double wd) const {
        return wm * mark + wt * time + wd * dist;
    }
};

struct MtppModel {
    ModelConfig cfg;
    Encoder enc;
    LogNormalHead time_head;
    LogNormalHead dist_head;  // active iff cfg.has_locations
    MarkHead mark_head;
    ParamStore params;

    static MtppModel make(const ModelConfig& cfg, std::uint64_t seed);

    // sum of weighted per-event NLL terms for events 2..K
    Var sequence_nll_t(Tape& T, const Sequence& seq);
    double sequence_nll(const Sequence& seq);
    // unweighted per-component sums plus term count
    NllComponents nll_components(const Sequence& seq);
    // weighted per-event terms (events 2..K), for additivity checks
    std::vector<double> per_event_terms(const Sequence& seq);

    Prediction predict_next(const Sequence& prefix);
    std::vector<Event> forecast(const Sequence& prefix, int horizon, std::uint64_t seed,
                                bool point_estimates = false);

    void set_temporal_only(bool on);
};

TrainTrace train(MtppModel& model, const Dataset& train_ds, const Dataset* val_ds,
                 const TrainConfig& tc);

// mean per-event NLL over a dataset
double dataset_nll_per_event(MtppModel& model, const Dataset& ds);
// mean per-event time-component NLL
double dataset_time_nll_per_event(MtppModel& model, const Dataset& ds);

void clip_global_norm(ParamStore& ps, double max_norm);

}  // namespace ctes
