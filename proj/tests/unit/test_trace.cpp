#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "broker/trace.hpp"

using namespace broker;

TEST_CASE("load_trace: single row, empty file, validation errors") {
    {
        std::istringstream in("request_id,start_time,end_time\nq1,0,10\n");
        Trace t = load_trace(in);
        REQUIRE(t.requests.size() == 1);
        CHECK(t.requests[0].duration() == 10);
        CHECK(t.horizon == 10);
        CHECK(t.label(0) == "q1");
    }
    {
        std::istringstream in("request_id,start_time,end_time\n");
        Trace t = load_trace(in);
        CHECK(t.requests.empty());
    }
    {
        std::istringstream in("request_id,start_time,end_time\nq1,5,5\n");
        CHECK_THROWS_AS(load_trace(in), ValidationError);
    }
    {
        std::istringstream in("request_id,start_time,end_time\nq1,0,10\nq1,3,7\n");
        CHECK_THROWS_AS(load_trace(in), ValidationError);  // duplicate id
    }
    {
        std::istringstream in("bad,header\n");
        CHECK_THROWS_AS(load_trace(in), ValidationError);
    }
    {
        std::istringstream in("request_id,start_time,end_time\nq1,zero,10\n");
        CHECK_THROWS_AS(load_trace(in), ValidationError);
    }
}

TEST_CASE("load_trace sorts by start, keeps file order on ties, skips comments") {
    std::istringstream in(
        "# a workload\n"
        "request_id,start_time,end_time\n"
        "b,5,9\n"
        "a,1,4\n"
        "# mid comment\n"
        "c,5,6\n");
    Trace t = load_trace(in);
    REQUIRE(t.requests.size() == 3);
    CHECK(t.label(0) == "a");
    CHECK(t.label(1) == "b");
    CHECK(t.label(2) == "c");
    CHECK(t.requests[1].id == 1);  // dense re-assigned ids
}

TEST_CASE("save/load round trip") {
    std::istringstream in("request_id,start_time,end_time\nx,0,3\ny,2,5\n");
    Trace t = load_trace(in);
    std::ostringstream os;
    save_trace(t, os);
    std::istringstream back(os.str());
    Trace t2 = load_trace(back);
    REQUIRE(t2.requests.size() == 2);
    CHECK(t2.requests[0].start == t.requests[0].start);
    CHECK(t2.label(1) == "y");
}

TEST_CASE("trace stats basics") {
    Trace t;
    t.horizon = 2;
    t.requests = {{0, 0, 2}};
    CHECK(trace_stats(t).mean == doctest::Approx(0.5));

    Trace c;
    c.horizon = 50;
    for (SimTime m = 0; m < 50; ++m)
        for (int i = 0; i < 3; ++i) c.requests.push_back({c.requests.size(), m, m + 1});
    TraceStats s = trace_stats(c);
    CHECK(s.mean == doctest::Approx(3.0));
    CHECK(s.sd == doctest::Approx(0.0));
    CHECK(s.q50 == doctest::Approx(3.0));
}

TEST_CASE("trace stats validation") {
    TraceStats s{0, 5, 1, 0, 10, 2, 4, 6};
    CHECK_NOTHROW(s.validate());
    s.q25 = 5;  // q25 > q50
    CHECK_THROWS_AS(s.validate(), ValidationError);
    TraceStats zero{0, 3, 0, 2, 4, 3, 3, 3};  // sd 0 but min != max
    CHECK_THROWS_AS(zero.validate(), ValidationError);
}

TEST_CASE("synthesize: constant profile gives one request per minute") {
    TraceStats s{0, 1, 0, 1, 1, 1, 1, 1};
    DurationDist d;
    d.log_sd = 0.0;  // constant durations
    Trace t = synthesize_trace(s, d, 500, 42);
    CHECK(t.requests.size() == 500);
    std::vector<std::uint32_t> counts = arrival_counts(t);
    for (std::uint32_t c : counts) CHECK(c == 1);
}

TEST_CASE("synthesize: non-integer mean with sd = 0 is infeasible") {
    TraceStats s{0, 1.5, 0, 1.5, 1.5, 1.5, 1.5, 1.5};
    CHECK_THROWS_AS(synthesize_trace(s, DurationDist{}, 10, 1), ValidationError);
}

TEST_CASE("synthesize round trip: dataset-1 profile recovers mean and sd") {
    SimTime horizon = 30000;
    Trace t = synthesize_trace(dataset1_profile(), DurationDist{}, horizon, 7);
    TraceStats s = trace_stats(t);
    CHECK(s.mean == doctest::Approx(77.08).epsilon(0.05));
    CHECK(s.sd == doctest::Approx(96.98).epsilon(0.10));
    // determinism
    Trace t2 = synthesize_trace(dataset1_profile(), DurationDist{}, horizon, 7);
    REQUIRE(t2.requests.size() == t.requests.size());
    CHECK(t2.requests[100].start == t.requests[100].start);
    CHECK(t2.requests[100].end == t.requests[100].end);
}

TEST_CASE("synthesize round trip over randomized profiles") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        double mean = 1.0 + static_cast<double>(rng() % 200) / 4.0;
        double sd = mean * (1.1 + static_cast<double>(rng() % 30) / 10.0);
        TraceStats target{0, mean, sd, 0, mean + 20 * sd, 0, mean, mean + sd};
        Trace t = synthesize_trace(target, DurationDist{}, 20000, 1000 + trial);
        TraceStats got = trace_stats(t);
        CHECK(got.mean == doctest::Approx(mean).epsilon(0.05));
        CHECK(got.sd == doctest::Approx(sd).epsilon(0.10));
    }
}

TEST_CASE("streaming source equals materialized trace across passes") {
    SyntheticTraceSource src(dataset1_profile(), DurationDist{}, 2000, 5);
    Trace whole = synthesize_trace(dataset1_profile(), DurationDist{}, 2000, 5);
    std::vector<UserRequest> got;
    for (int pass = 0; pass < 2; ++pass) {
        got.clear();
        for (SimTime m = 0; m < 2000; ++m) src.arrivals_at(m, got);
        REQUIRE(got.size() == whole.requests.size());
        for (std::size_t i = 0; i < got.size(); i += 97) {
            CHECK(got[i].start == whole.requests[i].start);
            CHECK(got[i].end == whole.requests[i].end);
        }
        src.reset();
    }
}

namespace {

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace

TEST_CASE("resample: horizon, stats preservation, duration KS, determinism") {
    Trace src = synthesize_trace(dataset1_profile(), DurationDist{}, 720, 3);  // 12 hours
    SimTime target = 30 * kMinutesPerDay;
    Trace big = resample_trace(src, target, 11);
    CHECK(big.horizon == target);

    TraceStats ss = trace_stats(src), bs = trace_stats(big);
    CHECK(bs.mean == doctest::Approx(ss.mean).epsilon(0.10));
    CHECK(bs.sd == doctest::Approx(ss.sd).epsilon(0.10));

    std::vector<double> sd_, bd_;
    for (const UserRequest& r : src.requests) sd_.push_back(static_cast<double>(r.duration()));
    for (std::size_t i = 0; i < big.requests.size(); i += 13)
        bd_.push_back(static_cast<double>(big.requests[i].duration()));
    CHECK(ks_distance(sd_, bd_) <= 0.05);

    Trace big2 = resample_trace(src, target, 11);
    REQUIRE(big2.requests.size() == big.requests.size());
    CHECK(big2.requests[500].start == big.requests[500].start);
    CHECK(big2.requests[500].end == big.requests[500].end);
}

TEST_CASE("resample validation") {
    Trace empty;
    CHECK_THROWS_AS(resample_trace(empty, 100, 1), ValidationError);
    Trace src = synthesize_trace(dataset1_profile(), DurationDist{}, 720, 3);
    CHECK_THROWS_AS(resample_trace(src, 720, 1), ValidationError);  // not larger
}
