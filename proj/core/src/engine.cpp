#include "speakstream/engine.hpp"

#include <thread>

namespace speakstream::engine {

void EngineConfig::validate() const {
    if (scheme == Scheme::NonStreaming)
        throw Error(ErrorCode::InvalidConfig, "engine requires S1 or S2");
    if (m < 1 || n < 1 || n > m)
        throw Error(ErrorCode::InvalidConfig, "need 1 <= n <= m");
    if (max_frames_per_segment < 1)
        throw Error(ErrorCode::InvalidConfig, "max_frames_per_segment must be >= 1");
    if (silence_prompt_frames < 0)
        throw Error(ErrorCode::InvalidConfig, "silence_prompt_frames must be >= 0");
    if (silence_prompt_frames > 0 && silence_frame.bins.empty())
        throw Error(ErrorCode::InvalidConfig, "silence prompt requires a silence frame");
}

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::FirstWordIn: return "FirstWordIn";
        case EventKind::SegmentStart: return "SegmentStart";
        case EventKind::FrameOut: return "FrameOut";
        case EventKind::SegmentEos: return "SegmentEos";
        case EventKind::FirstFrameOut: return "FirstFrameOut";
        case EventKind::StreamDone: return "StreamDone";
    }
    return "?";
}

ModelDecoder::ModelDecoder(const nn::ModelConfig& cfg, const nn::Params<float>& params,
                           const nn::DecodeOptions& opts)
    : cfg_(cfg), params_(params), cache_(cfg.num_layers), opts_(opts), rng_(opts.seed) {}

void ModelDecoder::consume(const Token& tok) {
    forward_incremental(cfg_, params_, {tok}, cache_);
}

nn::StepResult ModelDecoder::step(const Token& last_token) {
    return nn::generate_step(cfg_, params_, cache_, last_token, opts_, &rng_);
}

StreamingEngine::StreamingEngine(IncrementalDecoder& decoder, EngineConfig config)
    : decoder_(decoder), cfg_(std::move(config)) {
    cfg_.validate();
    if (cfg_.silence_prompt_frames > 0) {
        // Prime the cache with the silence prompt wrapped as a completed
        // speech segment. Inference-only; no events are logged for it.
        Token bos{TokenKind::SpeechBos};
        decoder_.consume(bos);
        Token frame{TokenKind::SpeechFrame};
        frame.frame = cfg_.silence_frame;
        for (int i = 0; i < cfg_.silence_prompt_frames; ++i) decoder_.consume(frame);
        Token eos{TokenKind::SpeechEos};
        decoder_.consume(eos);
    }
}

void StreamingEngine::log(EventKind kind, int segment) {
    events_.push_back({kind, segment, Clock::now()});
}

long StreamingEngine::words_needed(int segment) const {
    return static_cast<long>(cfg_.n) * (segment - 1) + cfg_.m;
}

void StreamingEngine::generate_segment(int i, int known_t) {
    phase_ = Phase::Generating;
    log(EventKind::SegmentStart, i);

    const int t = known_t > 0 ? known_t : static_cast<int>(words_.size());
    const auto counts =
        known_t > 0 ? interleave::segment_counts(cfg_.scheme, cfg_.m, cfg_.n, known_t)
                    : interleave::SegmentCounts{i, i};
    if (i <= counts.text_segments) {
        const auto [w0, w1] = interleave::text_window(cfg_.scheme, cfg_.m, cfg_.n, i, t);
        for (int w = w0; w < w1; ++w) {
            if (w > w0) {
                Token sep{TokenKind::WordSep};
                sep.segment_index = i;
                decoder_.consume(sep);
            }
            for (char c : words_[static_cast<size_t>(w)]) {
                Token tok{TokenKind::TextChar};
                tok.ch = c;
                tok.segment_index = i;
                decoder_.consume(tok);
            }
        }
    }

    Token last{TokenKind::SpeechBos};
    last.segment_index = i;
    long emitted = 0;
    while (true) {
        const nn::StepResult res = decoder_.step(last);
        if (res.eos) {
            Token eos{TokenKind::SpeechEos};
            eos.segment_index = i;
            decoder_.consume(eos);
            log(EventKind::SegmentEos, i);
            break;
        }
        if (++emitted > cfg_.max_frames_per_segment)
            throw Error(ErrorCode::SegmentOverrun,
                        "segment " + std::to_string(i) + " exceeded " +
                            std::to_string(cfg_.max_frames_per_segment) + " frames");
        frames_.push_back(res.frame);
        log(EventKind::FrameOut, i);
        if (!saw_first_frame_) {
            saw_first_frame_ = true;
            events_.push_back({EventKind::FirstFrameOut, i, events_.back().timestamp});
        }
        last = Token{TokenKind::SpeechFrame};
        last.frame = res.frame;
        last.segment_index = i;
    }
    segment_ = i + 1;
}

std::vector<EngineEvent> StreamingEngine::push_word(const std::string& word) {
    if (phase_ == Phase::Done)
        throw Error(ErrorCode::InvalidPhase, "push_word after stream completion");
    const size_t before = events_.size();
    words_.push_back(word);
    if (!saw_first_word_) {
        saw_first_word_ = true;
        log(EventKind::FirstWordIn);
    }
    if (phase_ == Phase::AwaitingText) {
        while (static_cast<long>(words_.size()) >= words_needed(segment_)) {
            generate_segment(segment_, -1);
        }
        phase_ = Phase::AwaitingText;
    }
    return {events_.begin() + static_cast<long>(before), events_.end()};
}

std::vector<EngineEvent> StreamingEngine::end_of_text() {
    if (phase_ == Phase::Done)
        throw Error(ErrorCode::InvalidPhase, "end_of_text called twice");
    if (words_.empty()) throw Error(ErrorCode::InvalidInput, "no words were pushed");
    const size_t before = events_.size();
    phase_ = Phase::Flushing;
    const int t = static_cast<int>(words_.size());
    const auto counts = interleave::segment_counts(cfg_.scheme, cfg_.m, cfg_.n, t);
    while (segment_ <= counts.speech_segments) generate_segment(segment_, t);
    log(EventKind::StreamDone);
    phase_ = Phase::Done;
    return {events_.begin() + static_cast<long>(before), events_.end()};
}

StreamRunResult run_stream(IncrementalDecoder& decoder, const EngineConfig& config,
                           const std::vector<TimedWord>& words) {
    if (words.empty()) throw Error(ErrorCode::InvalidInput, "empty word source");
    StreamingEngine engine(decoder, config);
    for (const auto& tw : words) {
        if (tw.delay_before > 0.0)
            std::this_thread::sleep_for(std::chrono::duration<double>(tw.delay_before));
        engine.push_word(tw.word);
    }
    engine.end_of_text();

    StreamRunResult result;
    result.frames = engine.frames();
    result.report.events = engine.events();
    result.report.frames_emitted = static_cast<long>(result.frames.size());
    result.report.words_waited =
        std::min<long>(static_cast<long>(words.size()), config.m);

    Clock::time_point first_word{}, first_frame{};
    Clock::time_point seg_start{};
    bool have_word = false, have_frame = false;
    for (const auto& ev : engine.events()) {
        switch (ev.kind) {
            case EventKind::FirstWordIn:
                first_word = ev.timestamp;
                have_word = true;
                break;
            case EventKind::FirstFrameOut:
                first_frame = ev.timestamp;
                have_frame = true;
                break;
            case EventKind::SegmentStart:
                seg_start = ev.timestamp;
                break;
            case EventKind::SegmentEos:
                result.report.segment_times.push_back(
                    std::chrono::duration<double>(ev.timestamp - seg_start).count());
                break;
            default:
                break;
        }
    }
    if (have_word && have_frame)
        result.report.tts_latency =
            std::chrono::duration<double>(first_frame - first_word).count();
    return result;
}

std::vector<DmelFrame> offline_drive(IncrementalDecoder& decoder, const EngineConfig& config,
                                     const std::vector<std::string>& words) {
    config.validate();
    if (words.empty()) throw Error(ErrorCode::InvalidInput, "no words");
    if (config.silence_prompt_frames > 0) {
        decoder.consume(Token{TokenKind::SpeechBos});
        Token frame{TokenKind::SpeechFrame};
        frame.frame = config.silence_frame;
        for (int i = 0; i < config.silence_prompt_frames; ++i) decoder.consume(frame);
        decoder.consume(Token{TokenKind::SpeechEos});
    }
    const int t = static_cast<int>(words.size());
    const auto counts = interleave::segment_counts(config.scheme, config.m, config.n, t);
    std::vector<DmelFrame> frames;
    for (int i = 1; i <= counts.speech_segments; ++i) {
        if (i <= counts.text_segments) {
            const auto [w0, w1] = interleave::text_window(config.scheme, config.m, config.n, i, t);
            for (int w = w0; w < w1; ++w) {
                if (w > w0) decoder.consume(Token{TokenKind::WordSep});
                for (char c : words[static_cast<size_t>(w)]) {
                    Token tok{TokenKind::TextChar};
                    tok.ch = c;
                    decoder.consume(tok);
                }
            }
        }
        Token last{TokenKind::SpeechBos};
        long emitted = 0;
        while (true) {
            const nn::StepResult res = decoder.step(last);
            if (res.eos) {
                decoder.consume(Token{TokenKind::SpeechEos});
                break;
            }
            if (++emitted > config.max_frames_per_segment)
                throw Error(ErrorCode::SegmentOverrun, "offline segment overran the frame cap");
            frames.push_back(res.frame);
            last = Token{TokenKind::SpeechFrame};
            last.frame = res.frame;
        }
    }
    return frames;
}

}  // namespace speakstream::engine
