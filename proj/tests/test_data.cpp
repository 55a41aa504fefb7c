#include <doctest.h>

#include <set>

#include "ctes/data.hpp"
#include "ctes/synthetic.hpp"

using namespace ctes;

namespace {

Sequence make_seq(std::vector<double> times) {
    Sequence s;
    s.id = "s";
    for (double t : times) {
        Event e;
        e.time = t;
        s.events.push_back(e);
    }
    return s;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("compute_deltas uses t0 = 0 and dd0 = 0") {
    Sequence s = make_seq({1.0, 3.0, 6.0});
    DeltaView d = compute_deltas(s);
    REQUIRE(d.dt.size() == 3);
    CHECK(d.dt[0] == doctest::Approx(1.0));
    CHECK(d.dt[1] == doctest::Approx(2.0));
    CHECK(d.dt[2] == doctest::Approx(3.0));
    CHECK(d.dd.empty());

    s.events[0].location = {0.0, 0.0};
    s.events[1].location = {3.0, 4.0};
    s.events[2].location = {3.0, 4.0};
    d = compute_deltas(s);
    REQUIRE(d.dd.size() == 3);
    CHECK(d.dd[0] == 0.0);
    CHECK(d.dd[1] == doctest::Approx(5.0));
    CHECK(d.dd[2] == doctest::Approx(0.0));
}

TEST_CASE("validation rejects unordered times") {
    Sequence s = make_seq({1.0, 0.5});
    CHECK_THROWS(validate_sequence(s));
    s = make_seq({1.0, 1.0});
    CHECK_THROWS(validate_sequence(s));
    s = make_seq({1.0, 2.0});
    CHECK_NOTHROW(validate_sequence(s));
}

TEST_CASE("split_dataset partitions with largest-remainder sizes") {
    Dataset ds = gen_constant_lognormal(10, 5, 0.0, 1.0, 2, 3);
    auto parts = split_dataset(ds, 0.8, 0.1, 0.1, 42);
    CHECK(parts[0].sequences.size() == 8);
    CHECK(parts[1].sequences.size() == 1);
    CHECK(parts[2].sequences.size() == 1);

    std::set<std::string> ids;
    for (const auto& p : parts)
        for (const auto& s : p.sequences) ids.insert(s.id);
    CHECK(ids.size() == 10);

    auto again = split_dataset(ds, 0.8, 0.1, 0.1, 42);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(again[i].sequences.size() == parts[i].sequences.size());
        for (std::size_t j = 0; j < parts[i].sequences.size(); ++j)
            CHECK(again[i].sequences[j].id == parts[i].sequences[j].id);
    }
}

TEST_CASE("split_dataset rejects tiny datasets") {
    Dataset ds = gen_constant_lognormal(2, 5, 0.0, 1.0, 2, 3);
    CHECK_THROWS(split_dataset(ds, 0.8, 0.1, 0.1, 1));
}

TEST_CASE("delete_events keeps endpoints") {
    Sequence s = make_seq({1, 2, 3, 4, 5, 6, 7, 8});
    auto [kept0, del0] = delete_events(s, 0.0, 7);
    CHECK(kept0.events.size() == 8);
    CHECK(del0.empty());

    CHECK_THROWS(delete_events(s, 1.0, 7));
    CHECK_THROWS(delete_events(s, -0.1, 7));

    auto [kept, del] = delete_events(s, 0.5, 7);
    CHECK(kept.events.size() + del.size() == 8);
    CHECK(kept.events.front().time == 1.0);
    CHECK(kept.events.back().time == 8.0);
    for (std::size_t i = 1; i < kept.events.size(); ++i)
        CHECK(kept.events[i - 1].time < kept.events[i].time);
}

}  // TEST_SUITE
