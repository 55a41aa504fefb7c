#pragma once

#include "ctes/model.hpp"

namespace ctes {

struct MissingEvent {
    int mark = 0;
    double time = 0.0;
};

// Noise used by the posterior sampler; tests can substitute a zero source.
struct NoiseSource {
    virtual ~NoiseSource() = default;
    virtual double normal() = 0;
    virtual double uniform() = 0;
};

struct StreamNoise final : NoiseSource {
    RandomStream rs;
    explicit StreamNoise(std::uint64_t seed) : rs(seed) {}
    double normal() override { return rs.normal(); }
    double uniform() override { return rs.uniform(); }
};

struct ZeroNoise final : NoiseSource {
    double normal() override { return 0.0; }
    double uniform() override { return 0.0; }
};

// Observed-process MTPP p plus posterior process q over missing events.
// q has its own encoder; its heads additionally condition on the featurized
// next observed event. The prior over missing gaps is fixed.
struct ImtppModel {
    MtppModel p;
    Encoder q_enc;
    LogNormalHead q_time;
    MarkHead q_mark;
    ParamStore q_params;
    LogNormalParams prior{0.0, 1.0};
    int max_missing_per_gap = 8;

    static ImtppModel make(const ModelConfig& cfg, const LogNormalParams& prior,
                           std::uint64_t seed, int max_missing_per_gap = 8);

    // Single-sample reparameterized ELBO estimate; optionally reports the
    // sampled missing events.
    Var elbo_t(Tape& T, const Sequence& seq, NoiseSource& noise,
               std::vector<MissingEvent>* sampled = nullptr);
    double elbo(const Sequence& seq, std::uint64_t noise_seed);

    // Posterior sampling in one observed gap starting from q's initial state.
    std::vector<MissingEvent> sample_missing_between(const Event& e_k, const Event& e_next,
                                                     NoiseSource& noise, int max_count);

    // Best-of-n posterior trajectories per gap, merged time-ordered with the
    // observed events; inserted events carry imputed=true.
    Sequence impute(const Sequence& seq, int samples_per_gap, std::uint64_t seed);

    // Summed NLL of the observed (non-imputed) events in a merged sequence;
    // p's encoder consumes the full interleaved stream between targets.
    double observed_nll(const Sequence& merged);

    std::vector<Event> forecast_with_missing(const Sequence& prefix, int horizon,
                                             std::uint64_t seed, int samples_per_gap = 3,
                                             bool point_estimates = false);
};

TrainTrace train_imtpp(ImtppModel& model, const Dataset& train_ds, const Dataset* val_ds,
                       const TrainConfig& tc);

// LogNormal(log(median observed gap / 2), 1)
LogNormalParams default_missing_prior(const Dataset& ds);

}  // namespace ctes
