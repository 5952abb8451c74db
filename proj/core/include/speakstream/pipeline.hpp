#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "speakstream/engine.hpp"
#include "speakstream/trainer.hpp"
#include "speakstream/vocoder.hpp"

namespace speakstream::pipeline {

// Blocking bounded MPMC queue connecting pipeline stages.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

    void push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) throw Error(ErrorCode::InvalidPhase, "push to closed queue");
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    // Blocks until an item arrives or the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
};

struct StageStats {
    double mean = 0.0;
    double stddev = 0.0;
};

StageStats stats_of(const std::vector<double>& samples);

struct RunSample {
    double tts = 0.0;      // seconds, FirstWordIn -> first FrameOut
    double handoff = 0.0;  // seconds, first FrameOut -> vocoder first frame in
    double vocoder = 0.0;  // seconds, vocoder first frame in -> first chunk out
    double total = 0.0;    // seconds, FirstWordIn -> first chunk out
    long frames = 0;
    long words_waited = 0;
};

struct LatencyReport {
    std::vector<RunSample> samples;
    int vocoder_frame_latency = 1;  // 1 for Streaming, k for Buffered
    int failures = 0;

    StageStats tts() const;
    StageStats vocoder() const;
    StageStats total() const;
};

// Full engine -> vocoder pipeline in separate threads connected by bounded
// queues. word_delay_s spaces word arrivals (0 pushes all words at once;
// a realistic cadence is what makes buffered vocoders pay their latency,
// since with instantaneous arrival every frame is already queued before the
// vocoder starts and the buffer never has to wait).
LatencyReport bench_latency(const nn::ModelConfig& model_cfg, const nn::Params<float>& params,
                            const engine::EngineConfig& engine_cfg,
                            const dmel::MelConfig& mel_cfg,
                            const vocoder::VocoderConfig& vocoder_cfg,
                            const dmel::BinSpec& bin_spec,
                            const std::vector<std::vector<std::string>>& sentences, int runs,
                            double word_delay_s = 0.0);

// Index of the first frame whose bins differ from the silence template.
long first_phoneme_check(const std::vector<dmel::DmelFrame>& frames,
                         const dmel::DmelFrame& silence);

}  // namespace speakstream::pipeline
