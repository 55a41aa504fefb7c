#pragma once

#include "ctes/model.hpp"

namespace ctes {

struct TransferConfig {
    double lr_mult = 0.1;
    std::vector<std::string> freeze;  // of: encoder, time_head, dist_head, mark_head
    TrainConfig target_train;
    std::uint64_t reinit_seed = 0;  // for the target mark head / embeddings
};

// Delegates to train() on the source dataset.
MtppModel train_source(const Dataset& source, const ModelConfig& cfg, const TrainConfig& tc,
                       TrainTrace* trace = nullptr);

// Copies the source model, re-initializes mark head and mark embeddings for
// the target vocabulary, optionally freezes components, and trains on the
// target with lr * lr_mult.
MtppModel fine_tune(const MtppModel& source, const Dataset& target,
                    const TransferConfig& cfg, TrainTrace* trace = nullptr);

}  // namespace ctes
