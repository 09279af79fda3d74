#include "omnistream/orchestrator.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <queue>

#include "omnistream/backend.hpp"
#include "omnistream/sink.hpp"
#include "omnistream/text.hpp"
#include "omnistream/vision.hpp"

namespace omnistream {
namespace {

constexpr std::int64_t kUsPerMs = 1000;

std::uint32_t mock_id(std::uint64_t seed, const char* tag, std::int64_t a, std::int64_t b) {
    std::uint64_t h = fnv1a64_u64(seed);
    h = fnv1a64(tag, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(a), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(b), h);
    return static_cast<std::uint32_t>(h % 900000u) + 1;
}

struct PacketInput {
    AudioPacket audio;
    std::vector<FrameSpec> frames;  // exactly two, inside the window
};

struct SimEvent {
    std::int64_t t_us;
    Stage stage;
    std::uint64_t seq;
    std::function<void()> fn;
};

struct SimEventAfter {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
        if (a.t_us != b.t_us) return a.t_us > b.t_us;
        if (a.stage != b.stage) return a.stage > b.stage;
        return a.seq > b.seq;
    }
};

struct MaskSegment {
    std::int64_t from_ms;
    std::int64_t to_ms;
    bool speech;
};

// One speculative decode attempt and the audio stream it produced.
struct Response {
    std::uint64_t gen = 0;
    int turn = 0;
    bool active = false;
    int total_steps = 0;  // text tokens + one flush step (0 for empty lines)
    int text_tokens = 0;
    int steps_done = 0;
    bool decode_done = false;
    std::vector<std::pair<int, std::int64_t>> held_playable;  // playable before the endpoint
    std::int64_t delivered = 0;
    std::int64_t play_end_us = 0;
    bool endpoint_fired = false;
    std::int64_t endpoint_us = 0;
    bool complete_scheduled = false;
    std::string text;
};

// Dense chunk whose packet completed while speculative decode was active:
// prefill waits for a rollback; an endpoint discards it (frames fall back to
// the sparse stream).
struct HeldChunk {
    Chunk chunk;
    std::int64_t encode_done_us = 0;
};

class Engine {
  public:
    Engine(const Trace& trace, const SessionConfig& cfg)
        : cfg_(cfg),
          compute_(cfg.compute),
          vad_(cfg.vad),
          script_(cfg.script_path.empty() ? Script() : Script::load(cfg.script_path)),
          backend_(script_, cfg.seed),
          punctuation_(parse_punctuation(cfg.punctuation)) {
        clock_.rate_num = cfg.feature_rate_num;
        clock_.rate_den = cfg.feature_rate_den;
        ingest(trace);
    }

    SessionResult run() {
        for (const PacketInput& p : packets_) {
            schedule_packet(p);
        }
        schedule(session_end_us_, Stage::Vad,
                 [this] { log(session_end_us_, Stage::Vad, "session_end", {}); });
        while (!queue_.empty()) {
            SimEvent ev = queue_.top();
            queue_.pop();
            ev.fn();
        }
        SessionResult result;
        result.log = std::move(log_);
        result.metrics = summarize(result.log);
        result.sequence = std::move(sequence_);
        return result;
    }

  private:
    using Payload = std::map<std::string, PayloadValue>;

    // ---- setup -------------------------------------------------------------

    void ingest(const Trace& trace) {
        auto violations = validate_trace(trace);
        if (!violations.empty()) {
            std::string what = "trace failed validation: " + violations.front().code + ": " +
                               violations.front().message;
            throw TraceFormatError(std::move(what), std::move(violations));
        }
        for (const TraceRecord& r : trace.records) {
            switch (r.kind) {
                case TraceRecordKind::AudioPacket: {
                    PacketInput p;
                    p.audio.start_ms = r.time_ms;
                    p.audio.duration_ms = r.duration_ms;
                    p.audio.runs = r.runs;
                    packets_.push_back(std::move(p));
                    break;
                }
                case TraceRecordKind::VideoFrame:
                    frame_dims_[r.time_ms] = {r.width, r.height};
                    break;
                case TraceRecordKind::SessionEnd:
                    session_end_us_ = r.time_ms * kUsPerMs;
                    break;
            }
        }
        // frames attach to packets by window, not by record adjacency
        for (const TraceRecord& r : trace.records) {
            if (r.kind != TraceRecordKind::VideoFrame) {
                continue;
            }
            for (PacketInput& p : packets_) {
                if (r.time_ms >= p.audio.start_ms && r.time_ms < p.audio.end_ms()) {
                    p.frames.push_back(FrameSpec{r.width, r.height, r.time_ms});
                    break;
                }
            }
        }
        if (!packets_.empty()) {
            high_water_ms_ = packets_.front().audio.start_ms;
            next_window_start_ms_ = high_water_ms_;  // sparse stream live while idle
            session_end_us_ =
                std::max(session_end_us_, packets_.back().audio.end_ms() * kUsPerMs);
        }
    }

    // ---- scheduling ----------------------------------------------------------

    void schedule(std::int64_t t_us, Stage stage, std::function<void()> fn) {
        queue_.push(SimEvent{t_us, stage, next_seq_++, std::move(fn)});
    }

    void log(std::int64_t t_us, Stage stage, std::string kind, Payload payload) {
        EventRecord e;
        e.time_ms = ceil_ms(t_us);
        e.stage = stage;
        e.kind = std::move(kind);
        e.seq = log_seq_++;
        e.payload = std::move(payload);
        log_.events.push_back(std::move(e));
    }

    // ---- VAD stage: packet ingestion and the mask-segment chain --------------

    void schedule_packet(const PacketInput& p) {
        const std::int64_t start_us = p.audio.start_ms * kUsPerMs;
        schedule(start_us, Stage::Vad, [this, &p, start_us] {
            log(start_us, Stage::Vad, "packet_arrival",
                {{"start_ms", p.audio.start_ms},
                 {"frames", static_cast<std::int64_t>(p.frames.size())}});
            for (const SpeechRun& r : p.audio.runs) {
                const std::int64_t from = p.audio.start_ms + r.offset_ms;
                segments_.push_back(MaskSegment{from, from + r.duration_ms, r.speech});
            }
            kick_chain();
        });
        schedule(p.audio.end_ms() * kUsPerMs, Stage::Encode, [this, &p] { on_packet_complete(p); });
    }

    void kick_chain() {
        if (chain_scheduled_ || segments_.empty()) {
            return;
        }
        chain_scheduled_ = true;
        schedule(segments_.front().from_ms * kUsPerMs, Stage::Vad, [this] { chain_step(); });
    }

    // Advances the endpointing machine in lockstep with the virtual clock:
    // each dispatch handles exactly the transitions due at its own instant,
    // so thresholds, cancellations, and barge-ins interleave with the other
    // stages in true time order.
    void chain_step() {
        chain_scheduled_ = false;
        if (segments_.empty()) {
            return;
        }
        MaskSegment& seg = segments_.front();
        const std::int64_t t = seg.from_ms;
        if (seg.speech) {
            handle_speech_instant(t);
            segments_.pop_front();
        } else {
            if (vad_.phase() == VadPhase::UserSpeaking && t < seg.to_ms) {
                if (auto e = vad_.on_silence_started(t)) {
                    log(t * kUsPerMs, Stage::Vad, "speech_end",
                        {{"turn", e->turn_index}, {"t2", e->at_ms}});
                }
            }
            while (auto nt = vad_.next_threshold_ms()) {
                if (*nt != t || *nt > seg.to_ms) {
                    break;
                }
                handle_threshold(*vad_.fire_threshold(*nt));
            }
            if (auto nt = vad_.next_threshold_ms(); nt && *nt <= seg.to_ms) {
                seg.from_ms = *nt;  // re-dispatch exactly at the threshold
                kick_chain();
                return;
            }
            segments_.pop_front();
        }
        kick_chain();
    }

    void handle_speech_instant(std::int64_t t_ms) {
        auto e = vad_.on_speech_at(t_ms);
        if (!e) {
            return;
        }
        const std::int64_t t_us = t_ms * kUsPerMs;
        switch (e->kind) {
            case VadEventKind::SpeechStart:
                log(t_us, Stage::Vad, "speech_start", {{"turn", e->turn_index}});
                on_turn_started(t_ms);
                break;
            case VadEventKind::SpeculativeCancel:
                log(t_us, Stage::Vad, "speculative_cancel", {{"turn", e->turn_index}});
                on_rollback(t_ms);
                break;
            case VadEventKind::BargeIn: {
                log(t_us, Stage::Vad, "barge_in", {{"turn", e->turn_index}});
                on_barge_in(t_ms);
                vad_.reset_for_next_turn();
                handle_speech_instant(t_ms);  // the same speech opens the next turn
                break;
            }
            default:
                break;
        }
    }

    void handle_threshold(const VadEvent& e) {
        const std::int64_t t_us = e.at_ms * kUsPerMs;
        if (e.kind == VadEventKind::Speculative) {
            log(t_us, Stage::Vad, "speculative",
                {{"turn", e.turn_index}, {"t2", vad_.last_speech_end_ms()}});
            start_response(t_us, e.turn_index);
        } else if (e.kind == VadEventKind::Endpoint) {
            log(t_us, Stage::Vad, "endpoint",
                {{"turn", e.turn_index}, {"t2", vad_.last_speech_end_ms()}});
            on_endpoint(t_us);
        }
    }

    void on_turn_started(std::int64_t at_ms) {
        turn_dense_prefills_ = 0;
        last_marked_chunk_ = -1;
        next_window_start_ms_ = -1;  // sparse buffering pauses during the turn
        sparse_frames_.clear();
        const std::int64_t at_us = at_ms * kUsPerMs;
        // buffered sparse chunks are prepended ahead of this turn's dense ones
        for (auto& [chunk, encode_done] : prepend_queue_) {
            schedule_prefill(std::move(chunk), std::max(at_us, encode_done));
        }
        prepend_queue_.clear();
    }

    void on_endpoint(std::int64_t t4_us) {
        vad_.mark_responding();
        resp_.endpoint_fired = true;
        resp_.endpoint_us = t4_us;
        // speculative-held packets never join the turn once it endpointed;
        // their frames fall back to the sparse stream
        for (HeldChunk& h : held_) {
            for (const VideoGroup& g : h.chunk.video_groups) {
                sparse_frames_.push_back(g.timestamp_ms);
            }
        }
        held_.clear();
        next_window_start_ms_ = high_water_ms_;
        const std::uint64_t gen = resp_.gen;
        for (const auto& [frame, playable_us] : resp_.held_playable) {
            const int f = frame;
            schedule(t4_us, Stage::Sink, [this, gen, f, t4_us] {
                if (gen == resp_gen_) {
                    deliver_frame(f, t4_us);
                }
            });
        }
        resp_.held_playable.clear();
        maybe_finish_response(t4_us);
    }

    // ---- LLM stage: speculative decode, rollback, termination ----------------

    void start_response(std::int64_t t3_us, int turn) {
        resp_ = Response{};
        resp_.gen = ++resp_gen_;
        resp_.turn = turn;
        resp_.active = true;
        resp_.text = script_.line_for_turn(turn);
        resp_.text_tokens = static_cast<int>(cp_count(resp_.text));
        resp_.total_steps = resp_.text_tokens > 0 ? resp_.text_tokens + 1 : 0;

        const std::uint64_t gen = resp_.gen;
        const std::int64_t marker_tokens = turn_dense_prefills_ > 0 ? 1 : 0;
        const std::int64_t start = std::max(t3_us, llm_free_us_);
        const std::int64_t begin_us = start + marker_tokens * compute_.prefill_cost_per_token_us;
        llm_free_us_ =
            begin_us + static_cast<std::int64_t>(resp_.total_steps) * compute_.decode_step_us;

        schedule(begin_us, Stage::Llm, [this, gen, turn, begin_us, marker_tokens] {
            if (gen != resp_gen_) {
                return;
            }
            backend_.set_turn(turn);
            backend_.begin_decode();
            if (marker_tokens > 0) {
                backend_.append_end_marker();
                mark_last_dense_chunk(true);
                log(begin_us, Stage::Llm, "prefill_done",
                    {{"kind", std::string("turn_end_marker")},
                     {"tokens", marker_tokens},
                     {"total", backend_.prefilled_token_count()},
                     {"turn", turn}});
            }
            log(begin_us, Stage::Llm, "begin_decode",
                {{"turn", turn},
                 {"boundary", backend_.committed_boundary()},
                 {"steps", resp_.total_steps}});
            if (resp_.total_steps == 0) {
                finish_decode(begin_us);
                return;
            }
            for (int k = 0; k < resp_.total_steps; ++k) {
                const std::int64_t at = begin_us + (k + 1) * compute_.decode_step_us;
                schedule(at, Stage::Llm, [this, gen, k, at] { on_decode_step(gen, k, at); });
            }
        });
    }

    void on_decode_step(std::uint64_t gen, int k, std::int64_t at_us) {
        if (gen != resp_gen_) {
            return;
        }
        const GenStep step = backend_.decode_step();
        ++resp_.steps_done;
        log(at_us, Stage::Llm, "decode_step",
            {{"turn", resp_.turn}, {"resp", static_cast<std::int64_t>(gen)}, {"step", k}});
        if (step.acoustic) {
            const int frame = step.acoustic->source_step;
            schedule(at_us, Stage::Sink,
                     [this, gen, frame, at_us] { on_frame_ready(gen, frame, at_us); });
        }
        if (k + 1 == resp_.total_steps) {
            finish_decode(at_us);
        }
    }

    void finish_decode(std::int64_t at_us) {
        backend_.finish_turn();
        resp_.decode_done = true;
        log(at_us, Stage::Llm, "turn_complete",
            {{"turn", resp_.turn}, {"steps", resp_.steps_done}});
        // end-of-stream flush: the trailing frames wait on no further look-ahead
        const int n = resp_.text_tokens;
        const std::uint64_t gen = resp_.gen;
        for (int i = std::max(0, n - kLookaheadFrames); i < n; ++i) {
            const std::int64_t playable = at_us + compute_.audio_decode_cost_per_frame_us +
                                          (i == 0 ? compute_.sink_startup_cost_us : 0);
            schedule(playable, Stage::Sink,
                     [this, gen, i, playable] { on_frame_playable(gen, i, playable); });
        }
        maybe_finish_response(at_us);
    }

    void on_rollback(std::int64_t at_ms) {
        const std::int64_t at_us = at_ms * kUsPerMs;
        const std::uint64_t stale = resp_gen_;
        ++resp_gen_;  // cancels every pending llm/sink event of this response
        resp_.active = false;
        llm_free_us_ = std::min(llm_free_us_, at_us);
        std::vector<HeldChunk> rejoin = std::move(held_);
        held_.clear();
        schedule(at_us, Stage::Llm, [this, at_us, stale, rejoin = std::move(rejoin)]() mutable {
            if (backend_.mode() == BackendMode::Decode) {
                backend_.rollback();
            }
            mark_last_dense_chunk(false);  // the speculative end marker is gone
            log(at_us, Stage::Llm, "rollback",
                {{"turn", vad_.turn_index()},
                 {"resp", static_cast<std::int64_t>(stale)},
                 {"boundary", backend_.prefilled_token_count()}});
            // speculative-held packets rejoin the turn
            for (HeldChunk& h : rejoin) {
                high_water_ms_ = std::max(high_water_ms_, h.chunk.start_ms + h.chunk.duration_ms);
                schedule_prefill(std::move(h.chunk), std::max(at_us, h.encode_done_us));
            }
        });
    }

    void on_barge_in(std::int64_t t5_ms) {
        const std::int64_t t5_us = t5_ms * kUsPerMs;
        const std::uint64_t stale = resp_gen_;
        ++resp_gen_;  // cancels pending steps and deliveries at or after t5
        resp_.active = false;
        llm_free_us_ = std::min(llm_free_us_, t5_us);
        const int text_emitted = std::min(resp_.steps_done, resp_.text_tokens);
        const std::string text = resp_.text;
        const int turn = resp_.turn;
        const int total_tokens = resp_.text_tokens;
        schedule(t5_us, Stage::Llm, [this, t5_us, turn, stale] {
            if (backend_.mode() == BackendMode::Decode) {
                backend_.rollback();  // a real backend truncates its cache here
            }
            log(t5_us, Stage::Llm, "decode_terminated",
                {{"turn", turn}, {"resp", static_cast<std::int64_t>(stale)}});
        });
        schedule(t5_us, Stage::Sink, [this, t5_us, turn, text, text_emitted, total_tokens] {
            const TruncationResult cut = truncate_on_interrupt(
                text, static_cast<std::size_t>(text_emitted), punctuation_, total_tokens);
            log(t5_us, Stage::Sink, "truncation",
                {{"turn", turn},
                 {"kept_cp", static_cast<std::int64_t>(cut.cut_at_cp)},
                 {"total_cp", total_tokens},
                 {"kept_frames", cut.kept_frame_count},
                 {"digest", hex64(fnv1a64(cut.kept_text))}});
        });
    }

    // ---- encode stage ---------------------------------------------------------

    void on_packet_complete(const PacketInput& p) {
        const std::int64_t end_us = p.audio.end_ms() * kUsPerMs;
        const int feature_count = clock_.advance(p.audio.duration_ms);
        log(end_us, Stage::Encode, "packet_complete",
            {{"start_ms", p.audio.start_ms}, {"audio_features", feature_count}});

        const VadPhase phase = vad_.phase();
        if (phase == VadPhase::UserSpeaking || phase == VadPhase::SilencePending) {
            Chunk chunk = make_dense_chunk(p, feature_count);
            high_water_ms_ = p.audio.end_ms();
            const std::int64_t encode_done = run_encode(chunk, end_us);
            schedule_prefill(std::move(chunk), encode_done);
        } else if (phase == VadPhase::SpeculativeFired) {
            HeldChunk held;
            held.chunk = make_dense_chunk(p, feature_count);
            held.encode_done_us = run_encode(held.chunk, end_us);
            held_.push_back(std::move(held));
        } else {
            // response or idle period: frames buffer into the sparse stream
            for (const FrameSpec& f : p.frames) {
                sparse_frames_.push_back(f.timestamp_ms);
            }
        }
        drain_sparse_windows(p.audio.end_ms());
    }

    Chunk make_dense_chunk(const PacketInput& p, int feature_count) {
        std::vector<VideoGroup> groups;
        for (const FrameSpec& f : p.frames) {
            groups.push_back(make_video_group(f.timestamp_ms, f.width, f.height));
        }
        std::vector<std::uint32_t> audio;
        audio.reserve(static_cast<std::size_t>(feature_count));
        for (int i = 0; i < feature_count; ++i) {
            audio.push_back(mock_id(cfg_.seed, "audio", p.audio.start_ms, i));
        }
        return build_chunk(std::move(groups), std::move(audio), p.audio.start_ms,
                           p.audio.end_ms(), ChunkMode::Dense);
    }

    VideoGroup make_video_group(std::int64_t ts_ms, int width, int height) {
        const ResizePlan plan = plan_resize(width, height);
        const int tokens = std::min(plan.tokens_after_unshuffle, cfg_.sampler.per_frame_limit);
        VideoGroup g;
        g.timestamp_ms = ts_ms;
        g.token_ids.reserve(static_cast<std::size_t>(tokens));
        for (int i = 0; i < tokens; ++i) {
            g.token_ids.push_back(mock_id(cfg_.seed, "vis", ts_ms, i));
        }
        return g;
    }

    std::int64_t encode_cost_us(const Chunk& c) const {
        std::int64_t cost =
            static_cast<std::int64_t>(c.video_groups.size()) * compute_.encode_cost_per_frame_us;
        if (c.mode == ChunkMode::Dense) {
            cost += compute_.encode_cost_per_audio_second_us * c.duration_ms / 1000;
        }
        return cost;
    }

    /// Books the chunk on the encode server and logs start/done; returns the
    /// completion time.
    std::int64_t run_encode(const Chunk& c, std::int64_t release_us) {
        const std::int64_t start = std::max(release_us, encode_free_us_);
        const std::int64_t done = start + encode_cost_us(c);
        encode_free_us_ = done;
        Payload payload{{"mode", std::string(c.mode == ChunkMode::Dense ? "dense" : "sparse")},
                        {"start_ms", c.start_ms},
                        {"frames", static_cast<std::int64_t>(c.video_groups.size())},
                        {"audio", static_cast<std::int64_t>(c.audio_feature_ids.size())}};
        schedule(start, Stage::Encode,
                 [this, start, payload] { log(start, Stage::Encode, "encode_start", payload); });
        schedule(done, Stage::Encode,
                 [this, done, payload] { log(done, Stage::Encode, "encode_done", payload); });
        return done;
    }

    void schedule_prefill(Chunk chunk, std::int64_t release_us) {
        if (chunk.mode == ChunkMode::Dense) {
            chunk.is_first_of_turn = turn_dense_prefills_ == 0;
            ++turn_dense_prefills_;
        }
        const std::int64_t tokens = chunk.token_count();
        const std::int64_t start = std::max(release_us, llm_free_us_);
        const std::int64_t done = start + tokens * compute_.prefill_cost_per_token_us;
        llm_free_us_ = done;
        Payload head{{"mode", std::string(chunk.mode == ChunkMode::Dense ? "dense" : "sparse")},
                     {"start_ms", chunk.start_ms},
                     {"tokens", tokens}};
        schedule(start, Stage::Llm,
                 [this, start, head] { log(start, Stage::Llm, "prefill_start", head); });
        schedule(done, Stage::Llm, [this, done, head, c = std::move(chunk)]() mutable {
            backend_.prefill(c);
            Payload payload = head;
            payload["total"] = backend_.prefilled_token_count();
            log(done, Stage::Llm, "prefill_done", payload);
            if (c.mode == ChunkMode::Dense) {
                last_marked_chunk_ = static_cast<std::int64_t>(sequence_.size());
            }
            sequence_.push_back(std::move(c));
        });
    }

    void mark_last_dense_chunk(bool value) {
        if (last_marked_chunk_ >= 0 &&
            last_marked_chunk_ < static_cast<std::int64_t>(sequence_.size())) {
            sequence_[static_cast<std::size_t>(last_marked_chunk_)].is_last_of_turn = value;
        }
    }

    // ---- sparse buffering -------------------------------------------------------

    void drain_sparse_windows(std::int64_t now_ms) {
        if (next_window_start_ms_ < 0) {
            return;
        }
        while (next_window_start_ms_ + kSparseChunkMs <= now_ms) {
            const std::int64_t ws = next_window_start_ms_;
            next_window_start_ms_ += kSparseChunkMs;
            // first buffered frame; packet cadence keeps it within the
            // window's first second, and windows without one are skipped
            std::int64_t chosen = -1;
            for (std::int64_t ts : sparse_frames_) {
                if (ts >= ws && ts < ws + 1000 && (chosen < 0 || ts < chosen)) {
                    chosen = ts;
                }
            }
            std::erase_if(sparse_frames_,
                          [&](std::int64_t ts) { return ts < ws + kSparseChunkMs; });
            if (chosen < 0) {
                continue;
            }
            const auto dims = frame_dims_.find(chosen);
            if (dims == frame_dims_.end()) {
                continue;
            }
            Chunk c =
                build_chunk({make_video_group(chosen, dims->second.first, dims->second.second)},
                            {}, ws, ws + kSparseChunkMs, ChunkMode::Sparse);
            high_water_ms_ = ws + kSparseChunkMs;
            const std::int64_t encode_done = run_encode(c, (ws + kSparseChunkMs) * kUsPerMs);
            prepend_queue_.emplace_back(std::move(c), encode_done);
        }
    }

    // ---- sink stage ---------------------------------------------------------------

    void on_frame_ready(std::uint64_t gen, int frame, std::int64_t at_us) {
        if (gen != resp_gen_) {
            return;
        }
        log(at_us, Stage::Sink, "frame_ready",
            {{"turn", resp_.turn}, {"resp", static_cast<std::int64_t>(gen)}, {"frame", frame}});
        const int unlocked = frame - kLookaheadFrames;
        if (unlocked >= 0) {
            const std::int64_t playable = at_us + compute_.audio_decode_cost_per_frame_us +
                                          (unlocked == 0 ? compute_.sink_startup_cost_us : 0);
            schedule(playable, Stage::Sink,
                     [this, gen, unlocked, playable] { on_frame_playable(gen, unlocked, playable); });
        }
    }

    void on_frame_playable(std::uint64_t gen, int frame, std::int64_t at_us) {
        if (gen != resp_gen_) {
            return;
        }
        log(at_us, Stage::Sink, "frame_playable",
            {{"turn", resp_.turn}, {"resp", static_cast<std::int64_t>(gen)}, {"frame", frame}});
        if (resp_.endpoint_fired) {
            deliver_frame(frame, std::max(at_us, resp_.endpoint_us));
        } else {
            resp_.held_playable.emplace_back(frame, at_us);
        }
    }

    void deliver_frame(int frame, std::int64_t at_us) {
        log(at_us, Stage::Sink, "frame_delivered",
            {{"turn", resp_.turn},
             {"resp", static_cast<std::int64_t>(resp_.gen)},
             {"frame", frame}});
        ++resp_.delivered;
        const std::int64_t play_start = std::max(at_us, resp_.play_end_us);
        resp_.play_end_us = play_start + codec_frame_duration_ms(frame) * kUsPerMs;
        maybe_finish_response(at_us);
    }

    void maybe_finish_response(std::int64_t now_us) {
        if (!resp_.active || resp_.complete_scheduled || !resp_.endpoint_fired ||
            !resp_.decode_done || resp_.delivered != resp_.text_tokens) {
            return;
        }
        resp_.complete_scheduled = true;
        const std::uint64_t gen = resp_.gen;
        const std::int64_t at = std::max({now_us, resp_.play_end_us, resp_.endpoint_us});
        schedule(at, Stage::Sink, [this, gen, at] {
            if (gen != resp_gen_) {
                return;
            }
            resp_.active = false;
            log(at, Stage::Sink, "response_complete",
                {{"turn", resp_.turn},
                 {"delivered", resp_.delivered},
                 {"next_turn", vad_.turn_index() + 1}});
            vad_.reset_for_next_turn();
        });
    }

    // ---- members --------------------------------------------------------------------

    SessionConfig cfg_;
    ComputeModel compute_;
    VadMachine vad_;
    Script script_;
    MockBackend backend_;
    std::u32string punctuation_;
    AudioFeatureClock clock_;

    std::vector<PacketInput> packets_;
    std::map<std::int64_t, std::pair<int, int>> frame_dims_;
    std::int64_t session_end_us_ = 0;

    std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t log_seq_ = 0;
    EventLog log_;

    std::deque<MaskSegment> segments_;
    bool chain_scheduled_ = false;

    std::int64_t encode_free_us_ = 0;
    std::int64_t llm_free_us_ = 0;

    int turn_dense_prefills_ = 0;
    std::int64_t last_marked_chunk_ = -1;
    std::vector<HeldChunk> held_;
    std::vector<std::pair<Chunk, std::int64_t>> prepend_queue_;
    std::vector<std::int64_t> sparse_frames_;
    std::int64_t next_window_start_ms_ = -1;
    std::int64_t high_water_ms_ = 0;

    Response resp_;
    std::uint64_t resp_gen_ = 0;
    InterleavedSequence sequence_;
};

}  // namespace

SessionResult run_session(const Trace& trace, const SessionConfig& config) {
    config.validate();
    Engine engine(trace, config);
    return engine.run();
}

}  // namespace omnistream
