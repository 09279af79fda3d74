#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnistream/interleave.hpp"

namespace omnistream {

struct ModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BackendMode { Prefill, Decode };

// Acoustic codebook tokens (codebooks 1..3) for the semantic token emitted
// one step earlier; source_step makes the offset checkable.
struct AcousticTokens {
    int source_step = 0;
    std::array<std::uint32_t, 3> ids{};
};

struct GenStep {
    int step_index = 0;
    std::optional<std::uint32_t> text_token;      // empty on audio-only flush steps
    std::optional<std::uint32_t> semantic_token;  // codebook 0; empty on the flush step
    std::optional<AcousticTokens> acoustic;       // empty (pending) at step 0
};

// Deterministic per-turn responses: line N serves turn N (wrapping when the
// file is shorter than the session).
class Script {
  public:
    Script() = default;
    explicit Script(std::vector<std::string> lines) : lines_(std::move(lines)) {}
    static Script load(const std::string& path);

    const std::string& line_for_turn(int turn_index) const;
    std::size_t line_count() const { return lines_.size(); }

  private:
    std::string empty_;
    std::vector<std::string> lines_;
};

// Mock of the LLM serving stage: counts prefilled tokens, switches between
// prefill and decode, generates one text token plus four codebook tokens per
// step from the script, and can roll decode back to the last commit point.
// It holds no KV cache; a real backend must restore attention state to
// committed_boundary() on rollback.
class MockBackend {
  public:
    MockBackend(Script script, std::uint64_t seed);

    void prefill(const Chunk& chunk);
    void prefill_marker_tokens(int count);

    void begin_decode();
    GenStep decode_step();
    void rollback();

    /// Speculatively appends the turn-end marker token to the context after
    /// begin_decode; a rollback reverts it along with the decode.
    void append_end_marker();

    /// Decode -> Prefill once the turn completed; the context keeps the
    /// prefilled tokens.
    void finish_turn();

    /// Selects the script line for the coming decode; legal only in prefill.
    void set_turn(int turn_index);

    bool turn_complete() const { return turn_complete_; }
    BackendMode mode() const { return mode_; }
    std::int64_t prefilled_token_count() const { return prefilled_token_count_; }
    std::int64_t committed_boundary() const { return committed_boundary_; }

    /// Text tokens (code points) the current turn's script line yields; the
    /// decode emits this many steps plus one acoustic flush step.
    int text_token_count() const;

    std::uint32_t token_id(int head, int position) const;

  private:
    Script script_;
    std::uint64_t seed_;
    BackendMode mode_ = BackendMode::Prefill;
    std::int64_t prefilled_token_count_ = 0;
    std::int64_t committed_boundary_ = 0;
    int turn_index_ = 0;
    std::u32string line_cps_;
    int cursor_ = 0;
    bool turn_complete_ = false;
};

}  // namespace omnistream
