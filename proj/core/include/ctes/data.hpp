#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ctes {

struct Event {
    int mark = 0;
    double time = 0.0;
    std::optional<std::pair<double, double>> location;
    bool imputed = false;
};

struct Sequence {
    std::string id;
    std::vector<Event> events;
    std::optional<std::string> region;

    std::size_t size() const { return events.size(); }
};

struct Dataset {
    std::vector<Sequence> sequences;
    std::vector<std::string> vocab;
    bool has_locations = false;

    std::size_t num_events() const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += s.events.size();
        return n;
    }
};

// Per-event inter-arrival times and inter-event distances.
// dt[0] uses the convention t_0 := 0; dd[0] := 0.
struct DeltaView {
    std::vector<double> dt;
    std::vector<double> dd;  // empty when the sequence has no locations
};

DeltaView compute_deltas(const Sequence& seq);

void validate_sequence(const Sequence& seq);
void validate_dataset(const Dataset& ds);

// Partition at sequence granularity, deterministic given seed.
// Split sizes follow largest-remainder rounding of the ratios.
std::array<Dataset, 3> split_dataset(const Dataset& ds, double train, double val,
                                     double test, std::uint64_t seed);

// Drop interior events independently with probability `fraction`.
// First and last events are always retained.
std::pair<Sequence, std::vector<Event>> delete_events(const Sequence& seq,
                                                      double fraction,
                                                      std::uint64_t seed);

}  // namespace ctes
