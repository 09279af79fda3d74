#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnistream/event_log.hpp"

namespace omnistream {

struct IncompleteLogError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoResponseInTurnError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TurnMetrics {
    int turn = 0;
    std::optional<std::int64_t> endpoint_ms;
    std::optional<std::int64_t> speculative_ms;  // the one preceding the endpoint
    std::optional<std::int64_t> first_response_latency_ms;
    int rollback_count = 0;
    bool barge_in = false;
    std::int64_t delivered_frames = 0;
    bool truncated = false;
};

struct MetricsAggregate {
    int turns = 0;
    int turns_with_response = 0;
    std::optional<std::int64_t> p50_first_response_latency_ms;
    std::optional<std::int64_t> p95_first_response_latency_ms;
};

struct MetricsReport {
    std::vector<TurnMetrics> turns;
    MetricsAggregate aggregate;
};

/// Nearest-rank percentile: the value at 1-based index ceil(p*N/100) of the
/// sorted sample. Undefined (nullopt) on an empty sample.
std::optional<std::int64_t> nearest_rank_percentile(std::vector<std::int64_t> values, int p);

/// Recomputes the aggregate block from the per-turn rows.
MetricsAggregate aggregate_from_rows(const std::vector<TurnMetrics>& rows);

/// Pure function of the log; throws IncompleteLogError when the log has no
/// session_end event.
MetricsReport summarize(const EventLog& log);

/// First turn with both an endpoint and a delivery; throws
/// NoResponseInTurnError when no turn responded.
std::int64_t first_response_latency_ms(const EventLog& log);

std::string format_metrics(const MetricsReport& report);

/// latency-vs-turn series for external plotting (turns without a response
/// are skipped).
std::string format_latency_csv(const MetricsReport& report);

}  // namespace omnistream
