#pragma once

#include "omnistream/config.hpp"
#include "omnistream/event_log.hpp"
#include "omnistream/trace.hpp"

namespace omnistream {

// Concurrent variant of the pipeline: four stage workers joined by ordered
// single-producer single-consumer channels, timed by the wall clock instead
// of the virtual one. Timestamps are real elapsed milliseconds, so runs are
// not reproducible byte-for-byte; the deterministic engine is the testable
// core and this mode exists for demonstration. time_scale compresses every
// modeled duration (0.01 plays a 10 s session in ~0.1 s).
struct WallClockOptions {
    double time_scale = 1.0;
};

EventLog run_session_wall_clock(const Trace& trace, const SessionConfig& config,
                                const WallClockOptions& options);

}  // namespace omnistream
