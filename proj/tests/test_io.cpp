#include <doctest.h>

#include <sstream>

#include "ctes/io.hpp"

using namespace ctes;

TEST_SUITE("io") {

TEST_CASE("csv round trip") {
    std::istringstream in(
        "seq_id,time,mark,x,y\n"
        "a,1.5,walk,0.0,0.0\n"
        "a,2.25,run,1.0,1.0\n"
        "b,0.5,run,2.0,0.5\n");
    Dataset ds = parse_dataset(in, FileFormat::csv);
    REQUIRE(ds.sequences.size() == 2);
    CHECK(ds.vocab == std::vector<std::string>{"walk", "run"});
    CHECK(ds.has_locations);
    CHECK(ds.sequences[0].events[1].mark == 1);

    std::ostringstream out;
    serialize_dataset(ds, out, FileFormat::csv);
    std::istringstream back(out.str());
    Dataset ds2 = parse_dataset(back, FileFormat::csv);
    REQUIRE(ds2.num_events() == ds.num_events());
    CHECK(ds2.vocab == ds.vocab);
    for (std::size_t s = 0; s < ds.sequences.size(); ++s)
        for (std::size_t i = 0; i < ds.sequences[s].events.size(); ++i) {
            CHECK(ds2.sequences[s].events[i].time == ds.sequences[s].events[i].time);
            CHECK(ds2.sequences[s].events[i].mark == ds.sequences[s].events[i].mark);
        }
}

TEST_CASE("jsonl round trip with imputed flags") {
    std::istringstream in(
        "{\"seq_id\":\"a\",\"time\":1.0,\"mark\":\"x\"}\n"
        "{\"seq_id\":\"a\",\"time\":2.0,\"mark\":\"y\",\"imputed\":true}\n");
    Dataset ds = parse_dataset(in, FileFormat::jsonl);
    REQUIRE(ds.num_events() == 2);
    CHECK(ds.sequences[0].events[1].imputed);

    std::ostringstream out;
    serialize_dataset(ds, out, FileFormat::jsonl);
    std::istringstream back(out.str());
    Dataset ds2 = parse_dataset(back, FileFormat::jsonl);
    CHECK(ds2.sequences[0].events[1].imputed);
    CHECK_FALSE(ds2.sequences[0].events[0].imputed);
}

TEST_CASE("events are sorted by time within a sequence") {
    std::istringstream in(
        "seq_id,time,mark\n"
        "a,3.0,x\n"
        "a,1.0,y\n"
        "a,2.0,x\n");
    Dataset ds = parse_dataset(in, FileFormat::csv);
    CHECK(ds.sequences[0].events[0].time == 1.0);
    CHECK(ds.sequences[0].events[2].time == 3.0);
}

TEST_CASE("duplicate timestamps are rejected with a line number") {
    std::istringstream in(
        "seq_id,time,mark\n"
        "a,1.0,x\n"
        "a,1.0,y\n");
    try {
        parse_dataset(in, FileFormat::csv);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        std::string msg = e.what();
        CHECK(msg.find("a") != std::string::npos);
    }
}

TEST_CASE("malformed header is rejected") {
    std::istringstream in("id,when,what\na,1.0,x\n");
    CHECK_THROWS(parse_dataset(in, FileFormat::csv));
}

}  // TEST_SUITE
