#include "omnistream/backend.hpp"

#include <fstream>

#include "omnistream/text.hpp"

namespace omnistream {

Script Script::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open script file: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return Script(std::move(lines));
}

const std::string& Script::line_for_turn(int turn_index) const {
    if (lines_.empty()) {
        return empty_;
    }
    return lines_[static_cast<std::size_t>(turn_index) % lines_.size()];
}

MockBackend::MockBackend(Script script, std::uint64_t seed)
    : script_(std::move(script)), seed_(seed) {
    set_turn(0);
}

void MockBackend::set_turn(int turn_index) {
    if (mode_ != BackendMode::Prefill) {
        throw ModeError("set_turn is only legal in prefill mode");
    }
    turn_index_ = turn_index;
    line_cps_ = to_u32(script_.line_for_turn(turn_index));
    cursor_ = 0;
    turn_complete_ = false;
}

int MockBackend::text_token_count() const {
    return static_cast<int>(line_cps_.size());
}

std::uint32_t MockBackend::token_id(int head, int position) const {
    std::uint64_t h = fnv1a64_u64(seed_);
    h = fnv1a64_u64(static_cast<std::uint64_t>(turn_index_), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(head), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(position), h);
    if (position >= 0 && position < static_cast<int>(line_cps_.size())) {
        h = fnv1a64_u64(static_cast<std::uint64_t>(line_cps_[position]), h);
    }
    return static_cast<std::uint32_t>(h % 900000u) + 1;
}

void MockBackend::prefill(const Chunk& chunk) {
    if (mode_ != BackendMode::Prefill) {
        throw ModeError("prefill while decoding");
    }
    prefilled_token_count_ += chunk.token_count();
}

void MockBackend::prefill_marker_tokens(int count) {
    if (mode_ != BackendMode::Prefill) {
        throw ModeError("prefill while decoding");
    }
    if (count < 0) {
        throw std::invalid_argument("marker token count must be non-negative");
    }
    prefilled_token_count_ += count;
}

void MockBackend::begin_decode() {
    if (mode_ != BackendMode::Prefill) {
        throw ModeError("begin_decode while already decoding");
    }
    mode_ = BackendMode::Decode;
    committed_boundary_ = prefilled_token_count_;
    cursor_ = 0;
    turn_complete_ = line_cps_.empty();
}

GenStep MockBackend::decode_step() {
    if (mode_ != BackendMode::Decode) {
        throw ModeError("decode_step outside decode mode");
    }
    if (turn_complete_) {
        throw ExhaustedError("decode_step after turn completion");
    }
    const int n = static_cast<int>(line_cps_.size());
    GenStep step;
    step.step_index = cursor_;
    if (cursor_ < n) {
        step.text_token = token_id(0, cursor_);
        step.semantic_token = token_id(1, cursor_);
    }
    if (cursor_ >= 1) {
        AcousticTokens ac;
        ac.source_step = cursor_ - 1;
        for (int cb = 0; cb < 3; ++cb) {
            ac.ids[static_cast<std::size_t>(cb)] = token_id(2 + cb, cursor_ - 1);
        }
        step.acoustic = ac;
    }
    ++cursor_;
    if (cursor_ > n) {
        turn_complete_ = true;  // the flush step carried the last acoustics
    }
    return step;
}

void MockBackend::rollback() {
    if (mode_ != BackendMode::Decode) {
        throw ModeError("rollback outside decode mode");
    }
    mode_ = BackendMode::Prefill;
    prefilled_token_count_ = committed_boundary_;
    cursor_ = 0;
    turn_complete_ = false;
}

void MockBackend::append_end_marker() {
    if (mode_ != BackendMode::Decode) {
        throw ModeError("the end marker joins the context at the decode switch");
    }
    ++prefilled_token_count_;
}

void MockBackend::finish_turn() {
    if (mode_ != BackendMode::Decode || !turn_complete_) {
        throw ModeError("finish_turn requires a completed decode");
    }
    mode_ = BackendMode::Prefill;
    cursor_ = 0;
}

}  // namespace omnistream
