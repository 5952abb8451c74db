#include "speakstream/pipeline.hpp"

#include <cmath>
#include <exception>
#include <thread>

namespace speakstream::pipeline {

using Clock = engine::Clock;

StageStats stats_of(const std::vector<double>& samples) {
    StageStats s;
    if (samples.empty()) return s;
    for (double v : samples) s.mean += v;
    s.mean /= static_cast<double>(samples.size());
    double sq = 0.0;
    for (double v : samples) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(samples.size()));
    return s;
}

namespace {
double seconds(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

std::vector<double> collect(const std::vector<RunSample>& samples, double RunSample::*field) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.*field);
    return out;
}
}  // namespace

StageStats LatencyReport::tts() const { return stats_of(collect(samples, &RunSample::tts)); }
StageStats LatencyReport::vocoder() const { return stats_of(collect(samples, &RunSample::vocoder)); }
StageStats LatencyReport::total() const { return stats_of(collect(samples, &RunSample::total)); }

LatencyReport bench_latency(const nn::ModelConfig& model_cfg, const nn::Params<float>& params,
                            const engine::EngineConfig& engine_cfg,
                            const dmel::MelConfig& mel_cfg,
                            const vocoder::VocoderConfig& vocoder_cfg,
                            const dmel::BinSpec& bin_spec,
                            const std::vector<std::vector<std::string>>& sentences, int runs,
                            double word_delay_s) {
    if (sentences.empty() || runs < 1)
        throw Error(ErrorCode::InvalidInput, "need at least one sentence and one run");
    if (word_delay_s < 0.0)
        throw Error(ErrorCode::InvalidInput, "word_delay_s must be >= 0");
    engine_cfg.validate();
    vocoder_cfg.validate();

    LatencyReport report;
    report.vocoder_frame_latency =
        vocoder_cfg.mode == vocoder::VocoderConfig::Mode::Buffered ? vocoder_cfg.buffer_frames : 1;

    for (const auto& sentence : sentences) {
        if (sentence.empty()) throw Error(ErrorCode::EmptyInput, "empty sentence");
        for (int r = 0; r < runs; ++r) {
            BoundedQueue<std::string> word_q(64);
            BoundedQueue<dmel::DmelFrame> frame_q(64);

            Clock::time_point first_word_tp{}, first_frame_tp{};
            Clock::time_point voc_in_tp{}, voc_out_tp{};
            bool saw_first_word = false, saw_first_frame = false;
            bool saw_voc_in = false, saw_voc_out = false;
            long frames_total = 0;
            std::exception_ptr engine_err, voc_err;

            std::thread engine_thread([&] {
                try {
                    engine::ModelDecoder decoder(model_cfg, params, engine_cfg.decode);
                    engine::StreamingEngine eng(decoder, engine_cfg);
                    size_t forwarded = 0;
                    auto drain = [&](const std::vector<engine::EngineEvent>& events) {
                        for (const auto& ev : events) {
                            if (ev.kind == engine::EventKind::FirstWordIn && !saw_first_word) {
                                first_word_tp = ev.timestamp;
                                saw_first_word = true;
                            }
                            if (ev.kind == engine::EventKind::FirstFrameOut && !saw_first_frame) {
                                first_frame_tp = ev.timestamp;
                                saw_first_frame = true;
                            }
                        }
                        const auto& frames = eng.frames();
                        for (; forwarded < frames.size(); ++forwarded)
                            frame_q.push(frames[forwarded]);
                    };
                    while (auto word = word_q.pop()) drain(eng.push_word(*word));
                    drain(eng.end_of_text());
                } catch (...) {
                    engine_err = std::current_exception();
                }
                frame_q.close();
            });

            std::thread voc_thread([&] {
                try {
                    vocoder::StreamVocoder voc(mel_cfg, vocoder_cfg);
                    std::vector<double> logmel(static_cast<size_t>(mel_cfg.num_channels));
                    while (auto frame = frame_q.pop()) {
                        if (!saw_voc_in) {
                            voc_in_tp = Clock::now();
                            saw_voc_in = true;
                        }
                        ++frames_total;
                        for (int c = 0; c < mel_cfg.num_channels; ++c)
                            logmel[static_cast<size_t>(c)] =
                                dmel::dequantize_bin(frame->bins[static_cast<size_t>(c)], bin_spec);
                        const auto chunk = voc.push_frame(logmel);
                        if (!chunk.empty() && !saw_voc_out) {
                            voc_out_tp = Clock::now();
                            saw_voc_out = true;
                        }
                    }
                    // Short streams may never fill a buffered vocoder; their
                    // first audio arrives with the end-of-stream flush.
                    const auto tail = voc.finalize();
                    if (!tail.empty() && !saw_voc_out) {
                        voc_out_tp = Clock::now();
                        saw_voc_out = true;
                    }
                } catch (...) {
                    voc_err = std::current_exception();
                }
            });

            bool first = true;
            for (const auto& w : sentence) {
                if (!first && word_delay_s > 0.0)
                    std::this_thread::sleep_for(std::chrono::duration<double>(word_delay_s));
                first = false;
                word_q.push(w);
            }
            word_q.close();
            engine_thread.join();
            voc_thread.join();

            if (engine_err || voc_err || !saw_first_word || !saw_first_frame || !saw_voc_out) {
                ++report.failures;
                continue;
            }
            RunSample s;
            s.tts = seconds(first_word_tp, first_frame_tp);
            s.handoff = seconds(first_frame_tp, voc_in_tp);
            s.vocoder = seconds(voc_in_tp, voc_out_tp);
            s.total = seconds(first_word_tp, voc_out_tp);
            s.frames = frames_total;
            s.words_waited =
                std::min<long>(static_cast<long>(sentence.size()), engine_cfg.m);
            report.samples.push_back(s);
        }
    }
    return report;
}

long first_phoneme_check(const std::vector<dmel::DmelFrame>& frames,
                         const dmel::DmelFrame& silence) {
    if (frames.empty()) throw Error(ErrorCode::EmptyInput, "no frames to inspect");
    for (size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].bins.size() != silence.bins.size())
            throw Error(ErrorCode::InvalidInput, "frame channel count mismatch");
        if (!(frames[i] == silence)) return static_cast<long>(i);
    }
    throw Error(ErrorCode::NoSpeechDetected, "all frames match the silence template");
}

}  // namespace speakstream::pipeline
