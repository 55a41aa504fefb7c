#include "ctes/transfer.hpp"

#include <stdexcept>

namespace ctes {

MtppModel train_source(const Dataset& source, const ModelConfig& cfg, const TrainConfig& tc,
                       TrainTrace* trace) {
    MtppModel m = MtppModel::make(cfg, tc.seed);
    TrainTrace t = train(m, source, nullptr, tc);
    if (trace) *trace = std::move(t);
    return m;
}

namespace {

const char* freeze_prefix(const std::string& component) {
    if (component == "encoder") return "enc.";
    if (component == "time_head") return "time.";
    if (component == "dist_head") return "dist.";
    if (component == "mark_head") return "mark.";
    throw std::runtime_error("unknown freeze component '" + component +
                             "' (expected encoder|time_head|dist_head|mark_head)");
}

}  // namespace

MtppModel fine_tune(const MtppModel& source, const Dataset& target,
                    const TransferConfig& cfg, TrainTrace* trace) {
    if (target.sequences.empty()) throw std::runtime_error("fine_tune: empty target dataset");
    if (!(cfg.lr_mult > 0.0)) throw std::runtime_error("fine_tune: lr_mult must be positive");
    if (cfg.freeze.size() >= 4)
        throw std::runtime_error("fine_tune: at least one component must stay unfrozen");

    ModelConfig tcfg = source.cfg;
    tcfg.n_marks = static_cast<int>(target.vocab.size());
    MtppModel m = MtppModel::make(tcfg, cfg.reinit_seed);

    // transfer everything except the mark-specific tensors, which keep their
    // fresh target-vocabulary initialization
    for (const auto& name : m.params.names()) {
        if (name == "enc.emb" || name == "mark.W" || name == "mark.b") continue;
        if (!source.params.has(name)) continue;  // e.g. dist head absent
        const Tensor& src = source.params.value(name);
        Tensor& dst = m.params.value(name);
        if (!src.same_shape(dst))
            throw std::runtime_error("fine_tune: shape mismatch for '" + name + "'");
        dst = src;
    }

    std::vector<std::string> frozen;
    for (const auto& c : cfg.freeze) frozen.push_back(freeze_prefix(c));
    m.params.set_frozen(frozen);

    TrainConfig tc = cfg.target_train;
    tc.lr *= cfg.lr_mult;
    TrainTrace t = train(m, target, nullptr, tc);
    if (trace) *trace = std::move(t);
    m.params.set_frozen({});
    return m;
}

}  // namespace ctes
