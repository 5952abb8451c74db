#pragma once

#include <deque>
#include <string>
#include <vector>

#include "speakstream/dmel.hpp"

namespace speakstream::vocoder {

struct VocoderConfig {
    enum class Mode { Streaming, Buffered };
    Mode mode = Mode::Streaming;
    int buffer_frames = 10;   // k, Buffered mode only
    int upsample_factor = 4;  // e.g. 25ms -> 6.25ms
    int channel_expand = 120; // e.g. 80 -> 120 channels

    void validate() const;
};

// Deterministic causal mel-inversion vocoder: a causal upsampler followed by
// a sinusoidal oscillator bank driven by the pseudo-inverse of the mel
// filterbank. Phase state carries across chunks. Streaming mode emits one
// waveform chunk per input frame; Buffered mode lags by k-1 frames.
class StreamVocoder {
public:
    StreamVocoder(const dmel::MelConfig& mel, const VocoderConfig& cfg);

    // Causal upsampling of one log-mel frame: channel expansion plus temporal
    // interpolation against the previous frame only.
    std::vector<std::vector<double>> upsample(const std::vector<double>& frame);

    // Returns hop * sample_rate samples in Streaming mode; possibly empty in
    // Buffered mode until k frames have arrived.
    std::vector<float> push_frame(const std::vector<double>& logmel);

    // Flushes Buffered pending frames; empty in Streaming mode.
    std::vector<float> finalize();

    long frames_received() const { return frames_received_; }
    long chunks_emitted() const { return chunks_emitted_; }
    int chunk_samples() const { return hop_samples_; }

    // One-shot synthesis of a whole matrix through a fresh streaming state.
    static std::vector<float> synthesize_all(const dmel::MelConfig& mel,
                                             const VocoderConfig& cfg,
                                             const dmel::MelFrameMatrix& frames);

private:
    std::vector<float> synth_frame(const std::vector<double>& logmel);

    dmel::MelConfig mel_;
    VocoderConfig cfg_;
    int nfft_;
    int spec_bins_;
    int hop_samples_;
    std::vector<double> pinv_;   // [spec_bins, channel_expand] row-major, clamped >= 0
    std::vector<double> omega_;  // per-bin phase increment per sample
    std::vector<double> phases_;
    std::vector<double> prev_expanded_;
    bool has_prev_ = false;
    std::deque<std::vector<double>> pending_;  // Buffered mode
    long frames_received_ = 0;
    long chunks_emitted_ = 0;
};

// 16-bit signed little-endian mono RIFF file.
void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate);

}  // namespace speakstream::vocoder
