#include "ctes/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctes/rng.hpp"

namespace ctes {

void validate_sequence(const Sequence& seq) {
    if (seq.events.empty()) throw std::runtime_error("sequence '" + seq.id + "' is empty");
    bool any_loc = false, all_loc = true;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const Event& e = seq.events[i];
        if (e.time < 0.0)
            throw std::runtime_error("sequence '" + seq.id + "': negative time at index " +
                                     std::to_string(i));
        if (i > 0 && !(seq.events[i - 1].time < e.time))
            throw std::runtime_error("sequence '" + seq.id +
                                     "': non-increasing timestamps at index " +
                                     std::to_string(i));
        if (e.location) any_loc = true; else all_loc = false;
    }
    if (any_loc && !all_loc)
        throw std::runtime_error("sequence '" + seq.id + "': mixed presence of locations");
}

void validate_dataset(const Dataset& ds) {
    for (const auto& s : ds.sequences) {
        validate_sequence(s);
        for (const auto& e : s.events)
            if (e.mark < 0 || e.mark >= static_cast<int>(ds.vocab.size()))
                throw std::runtime_error("sequence '" + s.id + "': mark index out of vocab");
        bool has_loc = s.events.front().location.has_value();
        if (has_loc != ds.has_locations)
            throw std::runtime_error("sequence '" + s.id + "': location presence inconsistent");
    }
}

DeltaView compute_deltas(const Sequence& seq) {
    validate_sequence(seq);
    DeltaView dv;
    dv.dt.reserve(seq.events.size());
    double prev_t = 0.0;  // t_0 := 0
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        double dt = seq.events[i].time - prev_t;
        if (!(dt > 0.0))
            throw std::runtime_error("sequence '" + seq.id + "': non-positive gap at index " +
                                     std::to_string(i));
        dv.dt.push_back(dt);
        prev_t = seq.events[i].time;
    }
    if (seq.events.front().location) {
        dv.dd.reserve(seq.events.size());
        dv.dd.push_back(0.0);
        for (std::size_t i = 1; i < seq.events.size(); ++i) {
            auto [x0, y0] = *seq.events[i - 1].location;
            auto [x1, y1] = *seq.events[i].location;
            dv.dd.push_back(std::hypot(x1 - x0, y1 - y0));
        }
    }
    return dv;
}

std::array<Dataset, 3> split_dataset(const Dataset& ds, double train, double val,
                                     double test, std::uint64_t seed) {
    const double ratios[3] = {train, val, test};
    double sum = train + val + test;
    for (double r : ratios)
        if (!(r > 0.0)) throw std::runtime_error("split ratios must be positive");
    if (std::abs(sum - 1.0) > 1e-9) throw std::runtime_error("split ratios must sum to 1");
    std::size_t n = ds.sequences.size();
    if (n < 3) throw std::runtime_error("fewer sequences than splits requested");

    // largest-remainder rounding
    std::size_t counts[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - std::floor(exact);
        assigned += counts[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        counts[best]++;
        rem[best] = -1.0;
        assigned++;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RandomStream rng(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);

    std::array<Dataset, 3> out;
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        out[i].vocab = ds.vocab;
        out[i].has_locations = ds.has_locations;
        for (std::size_t j = 0; j < counts[i]; ++j)
            out[i].sequences.push_back(ds.sequences[order[pos++]]);
    }
    return out;
}

std::pair<Sequence, std::vector<Event>> delete_events(const Sequence& seq,
                                                      double fraction,
                                                      std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::runtime_error("deletion fraction must lie in [0, 1)");
    validate_sequence(seq);
    Sequence observed;
    observed.id = seq.id;
    observed.region = seq.region;
    std::vector<Event> deleted;
    RandomStream rng(seed);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        bool interior = i > 0 && i + 1 < seq.events.size();
        if (interior && rng.uniform() < fraction)
            deleted.push_back(seq.events[i]);
        else
            observed.events.push_back(seq.events[i]);
    }
    return {std::move(observed), std::move(deleted)};
}

}  // namespace ctes
