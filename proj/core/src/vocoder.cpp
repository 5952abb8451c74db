#include "speakstream/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

namespace speakstream::vocoder {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kAmpFloor = 1e-9;  // oscillators below this are skipped
}  // namespace

void VocoderConfig::validate() const {
    if (mode == Mode::Buffered && buffer_frames < 1)
        throw Error(ErrorCode::InvalidConfig, "buffer_frames must be >= 1");
    if (upsample_factor < 1)
        throw Error(ErrorCode::InvalidConfig, "upsample_factor must be >= 1");
    if (channel_expand < 2)
        throw Error(ErrorCode::InvalidConfig, "channel_expand must be >= 2");
}

StreamVocoder::StreamVocoder(const dmel::MelConfig& mel, const VocoderConfig& cfg)
    : mel_(mel), cfg_(cfg) {
    mel_.validate();
    cfg_.validate();
    nfft_ = dmel::fft_size(mel_);
    spec_bins_ = nfft_ / 2 + 1;
    hop_samples_ = mel_.hop_samples();

    // Pseudo-inverse of a filterbank with the expanded channel count, clamped
    // to non-negative gains.
    dmel::MelConfig expanded = mel_;
    expanded.num_channels = cfg_.channel_expand;
    const auto fb = dmel::mel_filterbank(expanded, nfft_);
    Eigen::MatrixXd m(cfg_.channel_expand, spec_bins_);
    for (int c = 0; c < cfg_.channel_expand; ++c)
        for (int b = 0; b < spec_bins_; ++b) m(c, b) = fb[static_cast<size_t>(c)][static_cast<size_t>(b)];
    Eigen::MatrixXd pinv = m.completeOrthogonalDecomposition().pseudoInverse();
    pinv_.resize(static_cast<size_t>(spec_bins_) * cfg_.channel_expand);
    for (int b = 0; b < spec_bins_; ++b)
        for (int c = 0; c < cfg_.channel_expand; ++c)
            pinv_[static_cast<size_t>(b) * cfg_.channel_expand + c] = std::max(0.0, pinv(b, c));

    omega_.resize(static_cast<size_t>(spec_bins_));
    for (int b = 0; b < spec_bins_; ++b) omega_[static_cast<size_t>(b)] = 2.0 * kPi * b / nfft_;
    phases_.assign(static_cast<size_t>(spec_bins_), 0.0);
}

std::vector<std::vector<double>> StreamVocoder::upsample(const std::vector<double>& frame) {
    if (static_cast<int>(frame.size()) != mel_.num_channels)
        throw Error(ErrorCode::InvalidInput, "frame channel count mismatch");
    for (double v : frame)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite mel value");

    // Channel expansion: linear interpolation over the channel index.
    std::vector<double> expanded(static_cast<size_t>(cfg_.channel_expand));
    const int cin = mel_.num_channels;
    for (int j = 0; j < cfg_.channel_expand; ++j) {
        const double pos = cin == 1 ? 0.0
                                    : static_cast<double>(j) * (cin - 1) / (cfg_.channel_expand - 1);
        const int lo = static_cast<int>(pos);
        const int hi = std::min(lo + 1, cin - 1);
        const double w = pos - lo;
        expanded[static_cast<size_t>(j)] =
            frame[static_cast<size_t>(lo)] * (1.0 - w) + frame[static_cast<size_t>(hi)] * w;
    }

    if (!has_prev_) {
        prev_expanded_ = expanded;  // first frame interpolates against itself
        has_prev_ = true;
    }
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(cfg_.upsample_factor));
    for (int k = 0; k < cfg_.upsample_factor; ++k) {
        const double w = static_cast<double>(k + 1) / cfg_.upsample_factor;
        std::vector<double> f(static_cast<size_t>(cfg_.channel_expand));
        for (int j = 0; j < cfg_.channel_expand; ++j)
            f[static_cast<size_t>(j)] = prev_expanded_[static_cast<size_t>(j)] * (1.0 - w) +
                                        expanded[static_cast<size_t>(j)] * w;
        out.push_back(std::move(f));
    }
    prev_expanded_ = std::move(expanded);
    return out;
}

std::vector<float> StreamVocoder::synth_frame(const std::vector<double>& logmel) {
    const auto expanded = upsample(logmel);
    std::vector<float> chunk(static_cast<size_t>(hop_samples_));

    std::vector<double> amps(static_cast<size_t>(spec_bins_));
    size_t sample = 0;
    for (int k = 0; k < cfg_.upsample_factor; ++k) {
        const auto& frame = expanded[static_cast<size_t>(k)];
        // Linear-frequency power via the clamped pseudo-inverse.
        for (int b = 0; b < spec_bins_; ++b) {
            double power = 0.0;
            const double* row = pinv_.data() + static_cast<size_t>(b) * cfg_.channel_expand;
            for (int c = 0; c < cfg_.channel_expand; ++c)
                power += row[c] * std::exp(frame[static_cast<size_t>(c)]);
            amps[static_cast<size_t>(b)] = std::sqrt(std::max(0.0, power));
        }
        const size_t sub_end =
            static_cast<size_t>(static_cast<long>(hop_samples_) * (k + 1) / cfg_.upsample_factor);
        for (; sample < sub_end; ++sample) {
            double s = 0.0;
            for (int b = 0; b < spec_bins_; ++b) {
                const double a = amps[static_cast<size_t>(b)];
                phases_[static_cast<size_t>(b)] += omega_[static_cast<size_t>(b)];
                if (phases_[static_cast<size_t>(b)] > 2.0 * kPi)
                    phases_[static_cast<size_t>(b)] -= 2.0 * kPi;
                if (a < kAmpFloor) continue;
                s += a * std::sin(phases_[static_cast<size_t>(b)]);
            }
            chunk[sample] = static_cast<float>(s);
        }
    }
    ++chunks_emitted_;
    return chunk;
}

std::vector<float> StreamVocoder::push_frame(const std::vector<double>& logmel) {
    if (cfg_.mode == VocoderConfig::Mode::Streaming) {
        ++frames_received_;
        return synth_frame(logmel);
    }
    ++frames_received_;
    pending_.push_back(logmel);
    if (frames_received_ < cfg_.buffer_frames) return {};
    auto front = std::move(pending_.front());
    pending_.pop_front();
    return synth_frame(front);
}

std::vector<float> StreamVocoder::finalize() {
    std::vector<float> out;
    while (!pending_.empty()) {
        auto chunk = synth_frame(pending_.front());
        pending_.pop_front();
        out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
}

std::vector<float> StreamVocoder::synthesize_all(const dmel::MelConfig& mel,
                                                 const VocoderConfig& cfg,
                                                 const dmel::MelFrameMatrix& frames) {
    VocoderConfig streaming = cfg;
    streaming.mode = VocoderConfig::Mode::Streaming;
    StreamVocoder voc(mel, streaming);
    std::vector<float> out;
    for (const auto& f : frames.frames) {
        const auto chunk = voc.push_frame(f);
        out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
}

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    auto u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
    const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    u32(36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    u32(16);
    u16(1);  // PCM
    u16(1);  // mono
    u32(static_cast<uint32_t>(sample_rate));
    u32(static_cast<uint32_t>(sample_rate * 2));
    u16(2);
    u16(16);
    os.write("data", 4);
    u32(data_bytes);
    for (float s : samples) {
        const auto v = static_cast<int16_t>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
        os.write(reinterpret_cast<const char*>(&v), 2);
    }
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace speakstream::vocoder
