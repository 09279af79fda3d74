#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnistream {

struct SpeechRun {
    int offset_ms = 0;
    int duration_ms = 0;
    bool speech = false;
};

// One second of annotated audio; runs tile [0, duration_ms) exactly.
struct AudioPacket {
    std::int64_t start_ms = 0;
    int duration_ms = 1000;
    std::vector<SpeechRun> runs;

    void validate() const;
    std::int64_t end_ms() const { return start_ms + duration_ms; }
};

struct VadConfig {
    int endpoint_silence_ms = 650;     // valid band 600..700
    int speculative_silence_ms = 300;  // must stay below the endpoint span

    void validate() const;
};

enum class VadPhase {
    Idle,
    UserSpeaking,
    SilencePending,
    SpeculativeFired,
    Endpointed,
    ModelResponding,
};

enum class VadEventKind {
    SpeechStart,
    SpeechEnd,          // t2: speech -> silence transition
    Speculative,        // t3 = t2 + speculative_silence_ms
    SpeculativeCancel,  // speech resumed inside (t2, t4): rollback signal
    Endpoint,           // t4 = t2 + endpoint_silence_ms
    BargeIn,            // t5: speech while the model responds
};

const char* to_string(VadEventKind kind);
const char* to_string(VadPhase phase);

struct VadEvent {
    VadEventKind kind;
    std::int64_t at_ms;
    int turn_index;
};

struct OutOfOrderPacketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IllegalPhaseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Endpointing state machine over ground-truth speech runs. The silent-span
// clock restarts at every speech->silence transition. Thresholds fire the
// instant the span reaches them: silence over [t2, t2+650) endpoints at
// t2+650 even when speech resumes exactly then, matching a per-millisecond
// reference that checks thresholds before consuming the next millisecond.
class VadMachine {
  public:
    explicit VadMachine(VadConfig config);

    /// Packet-level interface: packets must be contiguous and in order.
    std::vector<VadEvent> feed(const AudioPacket& packet);

    /// Run-level interface: emits events with exact millisecond times inside
    /// (from_ms, to_ms]; the phase advances to the end of the run.
    void advance(std::int64_t from_ms, std::int64_t to_ms, bool speech,
                 std::vector<VadEvent>& out);

    // Instant-level transitions for event-driven drivers that must keep the
    // machine in lockstep with a virtual clock.

    /// Speech observed at t: SpeechStart from idle, SpeculativeCancel while a
    /// speculative decode is pending, BargeIn (once) during a response.
    std::optional<VadEvent> on_speech_at(std::int64_t t_ms);

    /// Silence following speech: starts the silent span, returns SpeechEnd.
    std::optional<VadEvent> on_silence_started(std::int64_t t_ms);

    /// Next pending threshold (t3 or t4) while a silent span is open.
    std::optional<std::int64_t> next_threshold_ms() const;

    /// Fires the threshold due exactly at t (from next_threshold_ms).
    std::optional<VadEvent> fire_threshold(std::int64_t t_ms);

    /// Endpointed/ModelResponding -> Idle with the turn index bumped.
    void reset_for_next_turn();

    void mark_responding();

    VadPhase phase() const { return phase_; }
    int turn_index() const { return turn_index_; }
    std::int64_t last_speech_end_ms() const { return last_speech_end_ms_; }
    const VadConfig& config() const { return config_; }

  private:
    VadConfig config_;
    VadPhase phase_ = VadPhase::Idle;
    int turn_index_ = 0;
    std::int64_t last_speech_end_ms_ = -1;
    std::int64_t expected_next_ms_ = -1;
    bool barge_emitted_ = false;
};

}  // namespace omnistream
