#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "speakstream/interleave.hpp"
#include "speakstream/model.hpp"

namespace speakstream::engine {

using dmel::DmelFrame;
using interleave::Scheme;
using interleave::Token;
using interleave::TokenKind;
using Clock = std::chrono::steady_clock;

struct EngineConfig {
    Scheme scheme = Scheme::S1;
    int m = 3;
    int n = 1;
    long max_frames_per_segment = 512;
    int silence_prompt_frames = 12;  // 300ms at the default 25ms hop
    DmelFrame silence_frame;         // required when silence_prompt_frames > 0
    nn::DecodeOptions decode;

    void validate() const;
};

enum class Phase { AwaitingText, Generating, Flushing, Done };

enum class EventKind {
    FirstWordIn,
    SegmentStart,
    FrameOut,
    SegmentEos,
    FirstFrameOut,
    StreamDone,
};

const char* event_kind_name(EventKind k);

struct EngineEvent {
    EventKind kind;
    int segment = 0;
    Clock::time_point timestamp;
};

// Incremental decoding surface the engine drives. consume() feeds a token
// into the model's kv-cache; step() consumes last_token and decodes the
// following step from its logits.
class IncrementalDecoder {
public:
    virtual ~IncrementalDecoder() = default;
    virtual void consume(const Token& tok) = 0;
    virtual nn::StepResult step(const Token& last_token) = 0;
    virtual long cached_length() const = 0;
};

// IncrementalDecoder backed by the transformer with a kv-cache.
class ModelDecoder : public IncrementalDecoder {
public:
    ModelDecoder(const nn::ModelConfig& cfg, const nn::Params<float>& params,
                 const nn::DecodeOptions& opts = {});

    void consume(const Token& tok) override;
    nn::StepResult step(const Token& last_token) override;
    long cached_length() const override { return cache_.length; }

private:
    const nn::ModelConfig& cfg_;
    const nn::Params<float>& params_;
    nn::KvCache<float> cache_;
    nn::DecodeOptions opts_;
    std::mt19937_64 rng_;
};

// Dual-streaming inference state machine: ingests words incrementally,
// triggers segment generation per the interleave schedule, detects EOS, and
// timestamps latency events.
class StreamingEngine {
public:
    StreamingEngine(IncrementalDecoder& decoder, EngineConfig config);

    std::vector<EngineEvent> push_word(const std::string& word);
    std::vector<EngineEvent> end_of_text();

    Phase phase() const { return phase_; }
    int segment_index() const { return segment_; }
    const std::vector<DmelFrame>& frames() const { return frames_; }
    const std::vector<EngineEvent>& events() const { return events_; }
    const std::vector<std::string>& buffered_words() const { return words_; }

private:
    void log(EventKind kind, int segment = 0);
    void generate_segment(int i, int known_t /* -1 while streaming */);
    long words_needed(int segment) const;

    IncrementalDecoder& decoder_;
    EngineConfig cfg_;
    Phase phase_ = Phase::AwaitingText;
    std::vector<std::string> words_;
    int segment_ = 1;  // next segment to generate (1-based)
    std::vector<DmelFrame> frames_;
    std::vector<EngineEvent> events_;
    bool saw_first_word_ = false;
    bool saw_first_frame_ = false;
};

struct TimedWord {
    std::string word;
    double delay_before = 0.0;  // seconds to wait before delivering
};

struct StreamRunReport {
    double tts_latency = 0.0;  // seconds, FirstWordIn -> first FrameOut
    std::vector<double> segment_times;  // seconds per completed segment
    long frames_emitted = 0;
    long words_waited = 0;  // words consumed before the first frame
    std::vector<EngineEvent> events;
};

struct StreamRunResult {
    std::vector<DmelFrame> frames;
    StreamRunReport report;
};

// Drives push_word/end_of_text against the source's timestamps.
StreamRunResult run_stream(IncrementalDecoder& decoder, const EngineConfig& config,
                           const std::vector<TimedWord>& words);

// Equivalence-oracle path: drives the same segments with all text known
// upfront, bypassing the word-streaming state machine.
std::vector<DmelFrame> offline_drive(IncrementalDecoder& decoder, const EngineConfig& config,
                                     const std::vector<std::string>& words);

}  // namespace speakstream::engine
