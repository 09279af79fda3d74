#include "omnistream/metrics.hpp"

#include <algorithm>
#include <map>

namespace omnistream {
namespace {

std::int64_t payload_int(const EventRecord& e, const char* key) {
    auto it = e.payload.find(key);
    if (it == e.payload.end() || !std::holds_alternative<std::int64_t>(it->second)) {
        throw IncompleteLogError(std::string("event '") + e.kind + "' lacks integer payload '" +
                                 key + "'");
    }
    return std::get<std::int64_t>(it->second);
}

}  // namespace

std::optional<std::int64_t> nearest_rank_percentile(std::vector<std::int64_t> values, int p) {
    if (values.empty()) {
        return std::nullopt;
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;  // ceil(p*n/100)
    rank = std::max<std::size_t>(1, std::min(rank, n));
    return values[rank - 1];
}

MetricsAggregate aggregate_from_rows(const std::vector<TurnMetrics>& rows) {
    MetricsAggregate agg;
    agg.turns = static_cast<int>(rows.size());
    std::vector<std::int64_t> latencies;
    for (const TurnMetrics& row : rows) {
        if (row.first_response_latency_ms) {
            latencies.push_back(*row.first_response_latency_ms);
        }
    }
    agg.turns_with_response = static_cast<int>(latencies.size());
    agg.p50_first_response_latency_ms = nearest_rank_percentile(latencies, 50);
    agg.p95_first_response_latency_ms = nearest_rank_percentile(latencies, 95);
    return agg;
}

MetricsReport summarize(const EventLog& log) {
    bool complete = false;
    std::map<int, TurnMetrics> rows;
    std::map<int, std::int64_t> first_delivery;

    for (const EventRecord& e : log.events) {
        if (e.kind == "session_end") {
            complete = true;
            continue;
        }
        auto turn_it = e.payload.find("turn");
        if (turn_it == e.payload.end()) {
            continue;
        }
        const int turn = static_cast<int>(std::get<std::int64_t>(turn_it->second));
        TurnMetrics& row = rows.try_emplace(turn, TurnMetrics{}).first->second;
        row.turn = turn;
        if (e.kind == "endpoint") {
            row.endpoint_ms = e.time_ms;
        } else if (e.kind == "speculative") {
            row.speculative_ms = e.time_ms;  // last one wins: the pre-endpoint switch
        } else if (e.kind == "speculative_cancel") {
            ++row.rollback_count;
        } else if (e.kind == "barge_in") {
            row.barge_in = true;
        } else if (e.kind == "frame_delivered") {
            ++row.delivered_frames;
            auto [it, inserted] = first_delivery.try_emplace(turn, e.time_ms);
            if (!inserted) {
                it->second = std::min(it->second, e.time_ms);
            }
        } else if (e.kind == "truncation") {
            row.truncated = true;
        } else if (e.kind == "speech_start") {
            // ensures silent-response turns still get a row
            row.turn = turn;
        }
    }
    if (!complete) {
        throw IncompleteLogError("log has no session_end event");
    }

    MetricsReport report;
    for (auto& [turn, row] : rows) {
        if (row.endpoint_ms) {
            auto it = first_delivery.find(turn);
            if (it != first_delivery.end()) {
                row.first_response_latency_ms = it->second - *row.endpoint_ms;
            }
        }
        report.turns.push_back(row);
    }
    report.aggregate = aggregate_from_rows(report.turns);
    return report;
}

std::int64_t first_response_latency_ms(const EventLog& log) {
    std::map<int, std::int64_t> endpoints;
    for (const EventRecord& e : log.events) {
        if (e.kind == "endpoint") {
            endpoints.try_emplace(static_cast<int>(payload_int(e, "turn")), e.time_ms);
        } else if (e.kind == "frame_delivered") {
            auto it = endpoints.find(static_cast<int>(payload_int(e, "turn")));
            if (it != endpoints.end()) {
                return e.time_ms - it->second;
            }
        }
    }
    throw NoResponseInTurnError("no turn has both an endpoint and a delivery");
}

namespace {

std::string opt_to_json(const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : "null";
}

}  // namespace

std::string format_metrics(const MetricsReport& report) {
    std::string out = "{\"version\":1,\"turns\":[";
    for (std::size_t i = 0; i < report.turns.size(); ++i) {
        const TurnMetrics& row = report.turns[i];
        if (i) {
            out += ',';
        }
        out += "{\"turn\":" + std::to_string(row.turn);
        out += ",\"endpoint_ms\":" + opt_to_json(row.endpoint_ms);
        out += ",\"speculative_ms\":" + opt_to_json(row.speculative_ms);
        out += ",\"first_response_latency_ms\":" + opt_to_json(row.first_response_latency_ms);
        out += ",\"rollback_count\":" + std::to_string(row.rollback_count);
        out += ",\"barge_in\":" + std::string(row.barge_in ? "true" : "false");
        out += ",\"delivered_frames\":" + std::to_string(row.delivered_frames);
        out += ",\"truncated\":" + std::string(row.truncated ? "true" : "false");
        out += '}';
    }
    out += "],\"aggregate\":{";
    out += "\"turns\":" + std::to_string(report.aggregate.turns);
    out += ",\"turns_with_response\":" + std::to_string(report.aggregate.turns_with_response);
    out += ",\"p50_first_response_latency_ms\":" +
           opt_to_json(report.aggregate.p50_first_response_latency_ms);
    out += ",\"p95_first_response_latency_ms\":" +
           opt_to_json(report.aggregate.p95_first_response_latency_ms);
    out += "}}\n";
    return out;
}

std::string format_latency_csv(const MetricsReport& report) {
    std::string out = "turn,first_response_latency_ms\n";
    for (const TurnMetrics& row : report.turns) {
        if (row.first_response_latency_ms) {
            out += std::to_string(row.turn) + ',' +
                   std::to_string(*row.first_response_latency_ms) + '\n';
        }
    }
    return out;
}

}  // namespace omnistream
