#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnistream/config.hpp"
#include "omnistream/event_log.hpp"
#include "omnistream/interleave.hpp"
#include "omnistream/metrics.hpp"
#include "omnistream/trace.hpp"

namespace omnistream {

struct TraceFormatError : std::runtime_error {
    std::vector<TraceViolation> violations;
    TraceFormatError(std::string what, std::vector<TraceViolation> v)
        : std::runtime_error(std::move(what)), violations(std::move(v)) {}
};

struct SessionResult {
    EventLog log;
    MetricsReport metrics;
    InterleavedSequence sequence;  // the stream as the backend prefilled it
};

/// Drives the four-stage pipeline (VAD & frame sampling, audio-visual
/// encoding, LLM prefill/decode, audio decoding) over a deterministic
/// microsecond virtual clock. Identical inputs produce byte-identical logs;
/// simultaneous events order by stage (vad < encode < llm < sink), then by
/// scheduling sequence.
SessionResult run_session(const Trace& trace, const SessionConfig& config);

}  // namespace omnistream
