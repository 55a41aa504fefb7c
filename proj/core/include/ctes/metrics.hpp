#pragma once

#include <map>
#include <optional>

#include "ctes/data.hpp"
#include "ctes/model.hpp"

namespace ctes {

struct ImputationMetrics {
    std::optional<double> matched_mae;  // absent when nothing matched
    double count_error = 0.0;
};

struct MetricsReport {
    double time_mae = 0.0;
    std::optional<double> dist_mae;
    std::map<int, double> mark_accuracy_at_k;  // k in {1, 5, 10}
    double nll_per_event = 0.0;
    std::optional<ImputationMetrics> imputation;
    std::optional<double> elbo_final;
    std::vector<double> forecast_mae_per_step;  // filled by forecast evaluation
};

// Next-event metrics over all prefixes of all test sequences.
MetricsReport evaluate(MtppModel& model, const Dataset& test);

// Greedy nearest-neighbor time matching of imputed events against deleted
// ground truth, within each observed gap.
ImputationMetrics evaluate_imputation(const Sequence& imputed,
                                      const std::vector<Event>& deleted);

}  // namespace ctes
