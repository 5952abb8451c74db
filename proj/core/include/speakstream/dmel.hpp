#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speakstream/error.hpp"

namespace speakstream::dmel {

// Log floor added to mel energies before taking the log.
inline constexpr double kLogEpsilon = 1e-10;

struct MelConfig {
    int sample_rate = 22050;
    double hop = 0.025;     // seconds per frame
    double window = 0.1;    // analysis window, seconds (4x hop)
    int num_channels = 80;
    double fmin = 0.0;
    double fmax = 11025.0;

    void validate() const;
    int hop_samples() const;
    int window_samples() const;
};

struct BinSpec {
    int num_bins = 16;
    double lo = 0.0;
    double hi = 1.0;

    void validate() const;
};

struct MelFrameMatrix {
    std::vector<std::vector<double>> frames;  // [frame][channel], log-mel
    MelConfig config;
};

struct DmelFrame {
    std::vector<uint8_t> bins;  // one entry per channel, each in [0, num_bins)

    bool operator==(const DmelFrame&) const = default;
};

// Triangular mel filterbank over an FFT power spectrum: [num_channels][nfft/2+1].
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg, int nfft);

// FFT size used for a given config (next power of two >= window length).
int fft_size(const MelConfig& cfg);

MelFrameMatrix mel_spectrogram(const std::vector<double>& waveform, int sample_rate,
                               const MelConfig& cfg);

BinSpec fit_bin_spec(const std::vector<MelFrameMatrix>& corpus, int num_bins);

std::vector<DmelFrame> discretize(const MelFrameMatrix& frames, const BinSpec& spec);

MelFrameMatrix dequantize(const std::vector<DmelFrame>& frames, const BinSpec& spec,
                          const MelConfig& cfg);

// Scalar helpers shared by the batch operations above.
int discretize_value(double v, const BinSpec& spec);
double dequantize_bin(int bin, const BinSpec& spec);

// Binary frame dump: "DMEL" magic, version, channels, bins, hop in
// microseconds, frame count, then row-major one-byte bin values (little-endian
// header fields).
void save_frames(const std::string& path, const std::vector<DmelFrame>& frames,
                 int num_channels, int num_bins, double hop_seconds);
std::vector<DmelFrame> load_frames(const std::string& path, int* num_channels = nullptr,
                                   int* num_bins = nullptr, double* hop_seconds = nullptr);

void save_bin_spec(const std::string& path, const BinSpec& spec);
BinSpec load_bin_spec(const std::string& path);

}  // namespace speakstream::dmel
