#include "speakstream/dmel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace speakstream::dmel {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    // Little-endian hosts only; static_assert keeps the format honest.
    static_assert(std::endian::native == std::endian::little);
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
    static_assert(std::endian::native == std::endian::little);
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw Error(ErrorCode::IoError, "truncated frame dump");
    return v;
}

}  // namespace

void MelConfig::validate() const {
    if (hop <= 0.0) throw Error(ErrorCode::InvalidConfig, "hop must be > 0");
    if (window < hop) throw Error(ErrorCode::InvalidConfig, "window must be >= hop");
    if (num_channels < 1) throw Error(ErrorCode::InvalidConfig, "num_channels must be >= 1");
    if (fmin < 0.0 || fmin >= fmax || fmax > sample_rate / 2.0)
        throw Error(ErrorCode::InvalidConfig, "need 0 <= fmin < fmax <= sample_rate/2");
    if (sample_rate <= 0) throw Error(ErrorCode::InvalidConfig, "sample_rate must be > 0");
}

int MelConfig::hop_samples() const { return static_cast<int>(std::lround(hop * sample_rate)); }
int MelConfig::window_samples() const {
    return static_cast<int>(std::lround(window * sample_rate));
}

void BinSpec::validate() const {
    if (num_bins < 2) throw Error(ErrorCode::InvalidConfig, "num_bins must be >= 2");
    if (!(lo < hi)) throw Error(ErrorCode::InvalidConfig, "need lo < hi");
}

int fft_size(const MelConfig& cfg) {
    int n = 1;
    while (n < cfg.window_samples()) n <<= 1;
    return n;
}

std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg, int nfft) {
    const int num_bins = nfft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.num_channels + 2);
    for (int i = 0; i < cfg.num_channels + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.num_channels + 1));

    std::vector<std::vector<double>> fb(cfg.num_channels, std::vector<double>(num_bins, 0.0));
    for (int c = 0; c < cfg.num_channels; ++c) {
        const double left = edges[c], center = edges[c + 1], right = edges[c + 2];
        for (int b = 0; b < num_bins; ++b) {
            const double f = static_cast<double>(b) * cfg.sample_rate / nfft;
            if (f <= left || f >= right) continue;
            fb[c][b] = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
        }
    }
    return fb;
}

MelFrameMatrix mel_spectrogram(const std::vector<double>& waveform, int sample_rate,
                               const MelConfig& cfg) {
    cfg.validate();
    if (waveform.empty()) throw Error(ErrorCode::EmptyInput, "empty waveform");
    if (sample_rate != cfg.sample_rate)
        throw Error(ErrorCode::InvalidConfig, "waveform sample rate does not match config");

    const int hop = cfg.hop_samples();
    const int win = cfg.window_samples();
    const int nfft = fft_size(cfg);
    const int num_frames =
        static_cast<int>((waveform.size() + hop - 1) / static_cast<size_t>(hop));

    // Periodic Hann window.
    std::vector<double> hann(win);
    for (int j = 0; j < win; ++j) hann[j] = 0.5 - 0.5 * std::cos(2.0 * kPi * j / win);

    const auto fb = mel_filterbank(cfg, nfft);
    const int spec_bins = nfft / 2 + 1;

    MelFrameMatrix out;
    out.config = cfg;
    out.frames.reserve(num_frames);
    std::vector<std::complex<double>> buf(nfft);
    for (int i = 0; i < num_frames; ++i) {
        const size_t start = static_cast<size_t>(i) * hop;
        for (int j = 0; j < nfft; ++j) {
            const size_t s = start + static_cast<size_t>(j);
            buf[j] = (j < win && s < waveform.size()) ? waveform[s] * hann[j] : 0.0;
        }
        fft(buf);
        std::vector<double> power(spec_bins);
        for (int b = 0; b < spec_bins; ++b) power[b] = std::norm(buf[b]);
        std::vector<double> frame(cfg.num_channels);
        for (int c = 0; c < cfg.num_channels; ++c) {
            double e = 0.0;
            for (int b = 0; b < spec_bins; ++b) e += fb[c][b] * power[b];
            frame[c] = std::log(e + kLogEpsilon);
        }
        out.frames.push_back(std::move(frame));
    }
    return out;
}

BinSpec fit_bin_spec(const std::vector<MelFrameMatrix>& corpus, int num_bins) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    size_t total = 0;
    for (const auto& m : corpus) {
        for (const auto& f : m.frames) {
            ++total;
            for (double v : f) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (total == 0) throw Error(ErrorCode::EmptyInput, "no frames to fit bins on");
    if (!(lo < hi)) {
        // Degenerate corpus: widen around the constant value.
        const double eps = std::max(1e-6, std::abs(lo) * 1e-6);
        lo -= eps;
        hi += eps;
    }
    BinSpec spec;
    spec.num_bins = num_bins;
    spec.lo = lo;
    spec.hi = hi;
    spec.validate();
    return spec;
}

int discretize_value(double v, const BinSpec& spec) {
    const double scaled = (v - spec.lo) / (spec.hi - spec.lo) * spec.num_bins;
    const long long b = static_cast<long long>(std::floor(scaled));
    return static_cast<int>(std::clamp<long long>(b, 0, spec.num_bins - 1));
}

double dequantize_bin(int bin, const BinSpec& spec) {
    if (bin < 0 || bin >= spec.num_bins) throw Error(ErrorCode::InvalidBin, "bin out of range");
    return spec.lo + (bin + 0.5) * (spec.hi - spec.lo) / spec.num_bins;
}

std::vector<DmelFrame> discretize(const MelFrameMatrix& frames, const BinSpec& spec) {
    spec.validate();
    std::vector<DmelFrame> out;
    out.reserve(frames.frames.size());
    for (const auto& f : frames.frames) {
        DmelFrame d;
        d.bins.reserve(f.size());
        for (double v : f) d.bins.push_back(static_cast<uint8_t>(discretize_value(v, spec)));
        out.push_back(std::move(d));
    }
    return out;
}

MelFrameMatrix dequantize(const std::vector<DmelFrame>& frames, const BinSpec& spec,
                          const MelConfig& cfg) {
    spec.validate();
    MelFrameMatrix out;
    out.config = cfg;
    out.frames.reserve(frames.size());
    for (const auto& d : frames) {
        std::vector<double> f;
        f.reserve(d.bins.size());
        for (uint8_t b : d.bins) f.push_back(dequantize_bin(b, spec));
        out.frames.push_back(std::move(f));
    }
    return out;
}

void save_frames(const std::string& path, const std::vector<DmelFrame>& frames,
                 int num_channels, int num_bins, double hop_seconds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os.write("DMEL", 4);
    write_pod<uint32_t>(os, 1);  // version
    write_pod<uint32_t>(os, static_cast<uint32_t>(num_channels));
    write_pod<uint32_t>(os, static_cast<uint32_t>(num_bins));
    write_pod<uint32_t>(os, static_cast<uint32_t>(std::lround(hop_seconds * 1e6)));
    write_pod<uint64_t>(os, frames.size());
    for (const auto& f : frames) {
        if (static_cast<int>(f.bins.size()) != num_channels)
            throw Error(ErrorCode::InvalidInput, "frame channel count mismatch");
        os.write(reinterpret_cast<const char*>(f.bins.data()),
                 static_cast<std::streamsize>(f.bins.size()));
    }
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<DmelFrame> load_frames(const std::string& path, int* num_channels, int* num_bins,
                                   double* hop_seconds) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DMEL", 4) != 0)
        throw Error(ErrorCode::IoError, "bad magic in " + path);
    const auto version = read_pod<uint32_t>(is);
    if (version != 1) throw Error(ErrorCode::IoError, "unsupported frame dump version");
    const auto channels = read_pod<uint32_t>(is);
    const auto bins = read_pod<uint32_t>(is);
    const auto hop_us = read_pod<uint32_t>(is);
    const auto count = read_pod<uint64_t>(is);
    if (num_channels) *num_channels = static_cast<int>(channels);
    if (num_bins) *num_bins = static_cast<int>(bins);
    if (hop_seconds) *hop_seconds = hop_us * 1e-6;
    std::vector<DmelFrame> frames(count);
    for (auto& f : frames) {
        f.bins.resize(channels);
        is.read(reinterpret_cast<char*>(f.bins.data()), channels);
        if (!is) throw Error(ErrorCode::IoError, "truncated frame dump " + path);
        for (uint8_t b : f.bins)
            if (b >= bins) throw Error(ErrorCode::InvalidBin, "bin out of range in " + path);
    }
    return frames;
}

void save_bin_spec(const std::string& path, const BinSpec& spec) {
    nlohmann::json j{{"num_bins", spec.num_bins}, {"lo", spec.lo}, {"hi", spec.hi}};
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os << j.dump(2) << "\n";
}

BinSpec load_bin_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    is >> j;
    BinSpec spec;
    spec.num_bins = j.at("num_bins").get<int>();
    spec.lo = j.at("lo").get<double>();
    spec.hi = j.at("hi").get<double>();
    spec.validate();
    return spec;
}

}  // namespace speakstream::dmel
