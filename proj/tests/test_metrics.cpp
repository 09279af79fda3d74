#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "omnistream/metrics.hpp"

using namespace omnistream;

namespace {

EventRecord ev(std::int64_t t, Stage stage, const char* kind, int turn) {
    EventRecord e;
    e.time_ms = t;
    e.stage = stage;
    e.kind = kind;
    e.payload["turn"] = static_cast<std::int64_t>(turn);
    return e;
}

EventLog single_turn_log() {
    EventLog log;
    log.events.push_back(ev(0, Stage::Vad, "speech_start", 0));
    log.events.push_back(ev(2000, Stage::Vad, "speech_end", 0));
    log.events.push_back(ev(2300, Stage::Vad, "speculative", 0));
    log.events.push_back(ev(2650, Stage::Vad, "endpoint", 0));
    log.events.push_back(ev(2650, Stage::Sink, "frame_delivered", 0));
    log.events.push_back(ev(2710, Stage::Sink, "frame_delivered", 0));
    EventRecord end;
    end.time_ms = 4000;
    end.stage = Stage::Vad;
    end.kind = "session_end";
    log.events.push_back(end);
    return log;
}

}  // namespace

TEST_CASE("summarize builds one row per turn with the gated latency") {
    const MetricsReport report = summarize(single_turn_log());
    REQUIRE(report.turns.size() == 1);
    const TurnMetrics& row = report.turns[0];
    CHECK(row.endpoint_ms == 2650);
    CHECK(row.speculative_ms == 2300);
    CHECK(row.first_response_latency_ms == 0);
    CHECK(row.delivered_frames == 2);
    CHECK(row.rollback_count == 0);
    CHECK_FALSE(row.barge_in);
    CHECK_FALSE(row.truncated);
    CHECK(report.aggregate.turns_with_response == 1);
    CHECK(report.aggregate.p50_first_response_latency_ms == 0);
    CHECK(first_response_latency_ms(single_turn_log()) == 0);
}

TEST_CASE("a rollback-only turn has no latency but counts its cancel") {
    EventLog log;
    log.events.push_back(ev(0, Stage::Vad, "speech_start", 0));
    log.events.push_back(ev(1000, Stage::Vad, "speech_end", 0));
    log.events.push_back(ev(1300, Stage::Vad, "speculative", 0));
    log.events.push_back(ev(1400, Stage::Vad, "speculative_cancel", 0));
    EventRecord end;
    end.time_ms = 3000;
    end.stage = Stage::Vad;
    end.kind = "session_end";
    log.events.push_back(end);

    const MetricsReport report = summarize(log);
    REQUIRE(report.turns.size() == 1);
    CHECK(report.turns[0].rollback_count == 1);
    CHECK_FALSE(report.turns[0].endpoint_ms.has_value());
    CHECK_FALSE(report.turns[0].first_response_latency_ms.has_value());
    CHECK(report.aggregate.turns_with_response == 0);
    CHECK_FALSE(report.aggregate.p50_first_response_latency_ms.has_value());
    CHECK_THROWS_AS(first_response_latency_ms(log), NoResponseInTurnError);
}

TEST_CASE("a log without session_end is incomplete") {
    EventLog log;
    log.events.push_back(ev(0, Stage::Vad, "speech_start", 0));
    CHECK_THROWS_AS(summarize(log), IncompleteLogError);
}

TEST_CASE("nearest-rank percentiles match direct computation on 100 turns") {
    std::mt19937_64 rng(37);
    std::uniform_int_distribution<int> latency(0, 400);
    EventLog log;
    std::vector<std::int64_t> latencies;
    for (int turn = 0; turn < 100; ++turn) {
        const std::int64_t base = turn * 10000;
        log.events.push_back(ev(base, Stage::Vad, "speech_start", turn));
        log.events.push_back(ev(base + 2000, Stage::Vad, "speech_end", turn));
        log.events.push_back(ev(base + 2650, Stage::Vad, "endpoint", turn));
        const std::int64_t lat = latency(rng);
        latencies.push_back(lat);
        log.events.push_back(ev(base + 2650 + lat, Stage::Sink, "frame_delivered", turn));
    }
    EventRecord end;
    end.time_ms = 100 * 10000;
    end.stage = Stage::Vad;
    end.kind = "session_end";
    log.events.push_back(end);

    const MetricsReport report = summarize(log);
    REQUIRE(report.turns.size() == 100);

    std::vector<std::int64_t> sorted = latencies;
    std::sort(sorted.begin(), sorted.end());
    const std::int64_t p50 = sorted[49];  // ceil(50*100/100) = 50th of 100 (1-based)
    const std::int64_t p95 = sorted[94];
    CHECK(report.aggregate.p50_first_response_latency_ms == p50);
    CHECK(report.aggregate.p95_first_response_latency_ms == p95);

    // self-consistency: the aggregate block recomputes from the rows
    const MetricsAggregate again = aggregate_from_rows(report.turns);
    CHECK(again.p50_first_response_latency_ms == report.aggregate.p50_first_response_latency_ms);
    CHECK(again.p95_first_response_latency_ms == report.aggregate.p95_first_response_latency_ms);
    CHECK(again.turns_with_response == report.aggregate.turns_with_response);
}

TEST_CASE("nearest-rank percentile handles small and empty samples") {
    CHECK_FALSE(nearest_rank_percentile({}, 50).has_value());
    CHECK(nearest_rank_percentile({7}, 50) == 7);
    CHECK(nearest_rank_percentile({7}, 95) == 7);
    CHECK(nearest_rank_percentile({1, 2}, 50) == 1);
    CHECK(nearest_rank_percentile({1, 2}, 95) == 2);
}

TEST_CASE("metrics JSON and latency CSV render stable shapes") {
    const MetricsReport report = summarize(single_turn_log());
    const std::string json = format_metrics(report);
    CHECK(json.find("\"turns\":[{\"turn\":0,") != std::string::npos);
    CHECK(json.find("\"p95_first_response_latency_ms\":0") != std::string::npos);
    const std::string csv = format_latency_csv(report);
    CHECK(csv == "turn,first_response_latency_ms\n0,0\n");
}
