#pragma once

// Test-side oracles and generators. These stay independent of the library's
// implementation paths: the resize oracle re-derives the grid search from
// scratch, and the VAD reference walks the mask millisecond by millisecond.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "omnistream/trace.hpp"
#include "omnistream/vad.hpp"

namespace testutil {

// ---- resize oracle ---------------------------------------------------------

struct OracleResize {
    int out_width = 0;
    int out_height = 0;
    bool minimal = false;
};

// |log(p/q)| comparison by folding the ratio above 1 and cross-multiplying.
inline int cmp_abs_log(std::int64_t p1, std::int64_t q1, std::int64_t p2, std::int64_t q2) {
    if (p1 < q1) std::swap(p1, q1);
    if (p2 < q2) std::swap(p2, q2);
    const __int128 lhs = static_cast<__int128>(p1) * q2;
    const __int128 rhs = static_cast<__int128>(p2) * q1;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

inline OracleResize oracle_plan_resize(int w, int h) {
    auto round112 = [](int v) { return (v + 56) / 112 * 112; };
    const int rw = round112(w);
    const int rh = round112(h);
    const std::int64_t rounded_patches =
        static_cast<std::int64_t>(rw / 14) * static_cast<std::int64_t>(rh / 14);
    if (rounded_patches >= 576 && rounded_patches <= 5832) {
        return {rw, rh, true};
    }
    OracleResize best;
    bool have = false;
    std::int64_t ba = 0, bb = 0;
    for (std::int64_t a = 1; a <= 91; ++a) {
        for (std::int64_t b = 1; a * b <= 91; ++b) {
            if (a * b < 9) continue;
            bool better = false;
            if (!have) {
                better = true;
            } else {
                const int aspect = cmp_abs_log(a * h, b * w, ba * h, bb * w);
                if (aspect != 0) {
                    better = aspect < 0;
                } else {
                    const int scale =
                        cmp_abs_log(12544 * a * b, static_cast<std::int64_t>(w) * h,
                                    12544 * ba * bb, static_cast<std::int64_t>(w) * h);
                    if (scale != 0) {
                        better = scale < 0;
                    } else if (a * b != ba * bb) {
                        better = a * b > ba * bb;
                    } else {
                        better = a > ba;
                    }
                }
            }
            if (better) {
                ba = a;
                bb = b;
                best = {static_cast<int>(a * 112), static_cast<int>(b * 112), false};
                have = true;
            }
        }
    }
    return best;
}

// ---- sampling oracle -------------------------------------------------------

struct OracleSampling {
    std::vector<std::int64_t> times;
    bool capped = false;
};

inline OracleSampling oracle_plan_sampling(std::int64_t duration_ms, int fps, int min_frames,
                                           int max_frames) {
    OracleSampling out;
    const std::int64_t at_default = duration_ms * fps / 1000;
    std::int64_t count;
    if (at_default >= min_frames && at_default <= max_frames) {
        count = at_default;
        for (std::int64_t i = 0; i < count; ++i) out.times.push_back(i * 1000 / fps);
        return out;
    }
    if (at_default < min_frames) {
        count = std::min<std::int64_t>(min_frames, duration_ms);
    } else {
        count = max_frames;
        out.capped = true;
    }
    for (std::int64_t i = 0; i < count; ++i) out.times.push_back(i * duration_ms / count);
    return out;
}

// ---- millisecond-stepping VAD reference -------------------------------------

struct RefVadResult {
    std::vector<omnistream::VadEvent> events;
};

// Walks the concatenated mask one millisecond at a time. Threshold checks
// happen at each instant before that millisecond's speech flag is consumed,
// and once more at the very end of the stream.
inline RefVadResult reference_vad(const std::vector<bool>& mask, int speculative_ms,
                                  int endpoint_ms) {
    using omnistream::VadEvent;
    using omnistream::VadEventKind;
    RefVadResult out;
    enum class P { Idle, Speak, Pend, Spec, End };
    P phase = P::Idle;
    std::int64_t t2 = -1;
    const std::int64_t total = static_cast<std::int64_t>(mask.size());
    for (std::int64_t u = 0; u <= total; ++u) {
        if (phase == P::Pend && u == t2 + speculative_ms) {
            out.events.push_back({VadEventKind::Speculative, u, 0});
            phase = P::Spec;
        }
        if (phase == P::Spec && u == t2 + endpoint_ms) {
            out.events.push_back({VadEventKind::Endpoint, u, 0});
            phase = P::End;
        }
        if (u == total) {
            break;
        }
        const bool s = mask[static_cast<std::size_t>(u)];
        if (s) {
            switch (phase) {
                case P::Idle:
                    out.events.push_back({VadEventKind::SpeechStart, u, 0});
                    phase = P::Speak;
                    break;
                case P::Pend:
                    phase = P::Speak;
                    break;
                case P::Spec:
                    out.events.push_back({VadEventKind::SpeculativeCancel, u, 0});
                    phase = P::Speak;
                    break;
                default:
                    break;
            }
        } else if (phase == P::Speak) {
            t2 = u;
            out.events.push_back({VadEventKind::SpeechEnd, u, 0});
            phase = P::Pend;
        }
    }
    return out;
}

// ---- trace builders ----------------------------------------------------------

inline omnistream::TraceRecord packet_record(std::int64_t start_ms,
                                             const std::vector<std::pair<int, bool>>& runs) {
    omnistream::TraceRecord r;
    r.time_ms = start_ms;
    r.kind = omnistream::TraceRecordKind::AudioPacket;
    r.duration_ms = 1000;
    int offset = 0;
    for (const auto& [dur, speech] : runs) {
        r.runs.push_back({offset, dur, speech});
        offset += dur;
    }
    return r;
}

inline omnistream::TraceRecord frame_record(std::int64_t time_ms, int w, int h) {
    omnistream::TraceRecord r;
    r.time_ms = time_ms;
    r.kind = omnistream::TraceRecordKind::VideoFrame;
    r.width = w;
    r.height = h;
    return r;
}

inline omnistream::TraceRecord end_record(std::int64_t time_ms) {
    omnistream::TraceRecord r;
    r.time_ms = time_ms;
    r.kind = omnistream::TraceRecordKind::SessionEnd;
    return r;
}

/// Builds a well-formed trace from a millisecond speech mask: contiguous 1 s
/// packets from t=0, two frames per packet at +250 and +750.
inline omnistream::Trace trace_from_mask(const std::vector<bool>& mask, int frame_w = 100,
                                         int frame_h = 100) {
    omnistream::Trace trace;
    const std::int64_t seconds = (static_cast<std::int64_t>(mask.size()) + 999) / 1000;
    for (std::int64_t s = 0; s < seconds; ++s) {
        std::vector<std::pair<int, bool>> runs;
        for (int ms = 0; ms < 1000; ++ms) {
            const std::size_t idx = static_cast<std::size_t>(s * 1000 + ms);
            const bool speech = idx < mask.size() && mask[idx];
            if (!runs.empty() && runs.back().second == speech) {
                ++runs.back().first;
            } else {
                runs.push_back({1, speech});
            }
        }
        trace.records.push_back(packet_record(s * 1000, runs));
        trace.records.push_back(frame_record(s * 1000 + 250, frame_w, frame_h));
        trace.records.push_back(frame_record(s * 1000 + 750, frame_w, frame_h));
    }
    trace.records.push_back(end_record(seconds * 1000));
    return trace;
}

/// Random mask with speech/silence runs drawn from the given bounds.
inline std::vector<bool> random_mask(std::mt19937_64& rng, int total_ms, int min_run = 50,
                                     int max_run = 1800) {
    std::vector<bool> mask;
    mask.reserve(static_cast<std::size_t>(total_ms));
    std::uniform_int_distribution<int> run_len(min_run, max_run);
    bool speech = true;  // sessions open with speech so a turn exists
    while (static_cast<int>(mask.size()) < total_ms) {
        int len = run_len(rng);
        for (int i = 0; i < len && static_cast<int>(mask.size()) < total_ms; ++i) {
            mask.push_back(speech);
        }
        speech = !speech;
    }
    return mask;
}

}  // namespace testutil
