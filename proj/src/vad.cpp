#include "omnistream/vad.hpp"

namespace omnistream {

void AudioPacket::validate() const {
    if (start_ms < 0 || duration_ms <= 0) {
        throw std::invalid_argument("audio packet needs a non-negative start and positive duration");
    }
    int at = 0;
    for (const SpeechRun& r : runs) {
        if (r.offset_ms != at || r.duration_ms <= 0) {
            throw std::invalid_argument("speech runs must tile the packet window exactly");
        }
        at += r.duration_ms;
    }
    if (at != duration_ms) {
        throw std::invalid_argument("speech runs must cover the full packet window");
    }
}

void VadConfig::validate() const {
    if (endpoint_silence_ms < 600 || endpoint_silence_ms > 700) {
        throw std::invalid_argument("vad.endpoint_silence_ms must lie in [600, 700]");
    }
    if (speculative_silence_ms <= 0 || speculative_silence_ms >= endpoint_silence_ms) {
        throw std::invalid_argument(
            "vad.speculative_silence_ms must satisfy 0 < speculative < endpoint");
    }
}

const char* to_string(VadEventKind kind) {
    switch (kind) {
        case VadEventKind::SpeechStart: return "speech_start";
        case VadEventKind::SpeechEnd: return "speech_end";
        case VadEventKind::Speculative: return "speculative";
        case VadEventKind::SpeculativeCancel: return "speculative_cancel";
        case VadEventKind::Endpoint: return "endpoint";
        case VadEventKind::BargeIn: return "barge_in";
    }
    return "?";
}

const char* to_string(VadPhase phase) {
    switch (phase) {
        case VadPhase::Idle: return "idle";
        case VadPhase::UserSpeaking: return "user_speaking";
        case VadPhase::SilencePending: return "silence_pending";
        case VadPhase::SpeculativeFired: return "speculative_fired";
        case VadPhase::Endpointed: return "endpointed";
        case VadPhase::ModelResponding: return "model_responding";
    }
    return "?";
}

VadMachine::VadMachine(VadConfig config) : config_(config) {
    config_.validate();
}

std::vector<VadEvent> VadMachine::feed(const AudioPacket& packet) {
    packet.validate();
    if (expected_next_ms_ >= 0 && packet.start_ms != expected_next_ms_) {
        throw OutOfOrderPacketError("packet start does not continue the stream");
    }
    expected_next_ms_ = packet.end_ms();

    std::vector<VadEvent> events;
    for (const SpeechRun& r : packet.runs) {
        advance(packet.start_ms + r.offset_ms, packet.start_ms + r.offset_ms + r.duration_ms,
                r.speech, events);
    }
    return events;
}

void VadMachine::advance(std::int64_t from_ms, std::int64_t to_ms, bool speech,
                         std::vector<VadEvent>& out) {
    if (to_ms <= from_ms) {
        throw std::invalid_argument("empty speech run");
    }
    if (speech) {
        if (auto e = on_speech_at(from_ms)) {
            out.push_back(*e);
        }
        return;
    }
    if (auto e = on_silence_started(from_ms)) {
        out.push_back(*e);
    }
    while (auto nt = next_threshold_ms()) {
        if (*nt > to_ms) {
            break;
        }
        out.push_back(*fire_threshold(*nt));
    }
}

std::optional<VadEvent> VadMachine::on_speech_at(std::int64_t t_ms) {
    switch (phase_) {
        case VadPhase::Idle:
            phase_ = VadPhase::UserSpeaking;
            return VadEvent{VadEventKind::SpeechStart, t_ms, turn_index_};
        case VadPhase::UserSpeaking:
            return std::nullopt;
        case VadPhase::SilencePending:
            phase_ = VadPhase::UserSpeaking;
            return std::nullopt;
        case VadPhase::SpeculativeFired:
            phase_ = VadPhase::UserSpeaking;
            return VadEvent{VadEventKind::SpeculativeCancel, t_ms, turn_index_};
        case VadPhase::Endpointed:
        case VadPhase::ModelResponding:
            if (!barge_emitted_) {
                barge_emitted_ = true;
                return VadEvent{VadEventKind::BargeIn, t_ms, turn_index_};
            }
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<VadEvent> VadMachine::on_silence_started(std::int64_t t_ms) {
    if (phase_ != VadPhase::UserSpeaking) {
        return std::nullopt;
    }
    phase_ = VadPhase::SilencePending;
    last_speech_end_ms_ = t_ms;
    return VadEvent{VadEventKind::SpeechEnd, t_ms, turn_index_};
}

std::optional<std::int64_t> VadMachine::next_threshold_ms() const {
    if (phase_ == VadPhase::SilencePending) {
        return last_speech_end_ms_ + config_.speculative_silence_ms;
    }
    if (phase_ == VadPhase::SpeculativeFired) {
        return last_speech_end_ms_ + config_.endpoint_silence_ms;
    }
    return std::nullopt;
}

std::optional<VadEvent> VadMachine::fire_threshold(std::int64_t t_ms) {
    if (phase_ == VadPhase::SilencePending &&
        t_ms == last_speech_end_ms_ + config_.speculative_silence_ms) {
        phase_ = VadPhase::SpeculativeFired;
        return VadEvent{VadEventKind::Speculative, t_ms, turn_index_};
    }
    if (phase_ == VadPhase::SpeculativeFired &&
        t_ms == last_speech_end_ms_ + config_.endpoint_silence_ms) {
        phase_ = VadPhase::Endpointed;
        return VadEvent{VadEventKind::Endpoint, t_ms, turn_index_};
    }
    return std::nullopt;
}

void VadMachine::reset_for_next_turn() {
    if (phase_ != VadPhase::Endpointed && phase_ != VadPhase::ModelResponding) {
        throw IllegalPhaseError("reset_for_next_turn is only legal after a turn endpointed");
    }
    phase_ = VadPhase::Idle;
    ++turn_index_;
    last_speech_end_ms_ = -1;
    barge_emitted_ = false;
}

void VadMachine::mark_responding() {
    if (phase_ != VadPhase::Endpointed) {
        throw IllegalPhaseError("mark_responding requires an endpointed turn");
    }
    phase_ = VadPhase::ModelResponding;
}

}  // namespace omnistream
