#include "speakstream/corpus.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

namespace speakstream::corpus {

namespace fs = std::filesystem;

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

int hamming(const DmelFrame& a, const DmelFrame& b) {
    int d = 0;
    for (size_t i = 0; i < a.bins.size(); ++i) d += a.bins[i] != b.bins[i];
    return d;
}

}  // namespace

void CorpusSpec::validate() const {
    if (alphabet.size() < 2) throw Error(ErrorCode::InvalidConfig, "alphabet size must be >= 2");
    for (size_t i = 0; i < alphabet.size(); ++i)
        for (size_t j = i + 1; j < alphabet.size(); ++j)
            if (alphabet[i] == alphabet[j])
                throw Error(ErrorCode::InvalidConfig, "alphabet has duplicate characters");
    if (frames_per_char_base - rate_jitter < 1)
        throw Error(ErrorCode::InvalidConfig, "frames_per_char_base - rate_jitter must be >= 1");
    if (rate_jitter < 0) throw Error(ErrorCode::InvalidConfig, "rate_jitter must be >= 0");
    if (context_depth != 1) throw Error(ErrorCode::InvalidConfig, "context_depth must be 1");
    if (num_utterances < 1) throw Error(ErrorCode::InvalidConfig, "num_utterances must be >= 1");
    if (words_min < 1 || words_min > words_max)
        throw Error(ErrorCode::InvalidConfig, "invalid words_per_utterance range");
    if (chars_min < 1 || chars_min > chars_max)
        throw Error(ErrorCode::InvalidConfig, "invalid chars_per_word range");
    if (num_bins < 2) throw Error(ErrorCode::InvalidConfig, "num_bins must be >= 2");
    if (num_channels < 2 || !std::has_single_bit(static_cast<unsigned>(num_channels)))
        throw Error(ErrorCode::InvalidConfig, "num_channels must be a power of two");
    const long a = static_cast<long>(alphabet.size());
    if (2L * num_channels - 1 < a * (a + 1))
        throw Error(ErrorCode::InvalidConfig,
                    "num_channels too small for the template table (need 2C-1 >= A*(A+1))");
}

int CorpusSpec::char_index(char c) const {
    const auto pos = alphabet.find(c);
    return pos == std::string::npos ? -1 : static_cast<int>(pos);
}

void Alignment::validate(long total_frames) const {
    if (spans.empty()) throw Error(ErrorCode::AlignmentMismatch, "alignment has no spans");
    long expect = 0;
    for (const auto& [s, e] : spans) {
        if (s != expect || e <= s)
            throw Error(ErrorCode::AlignmentMismatch, "spans not contiguous/non-empty");
        expect = e;
    }
    if (expect != total_frames)
        throw Error(ErrorCode::AlignmentMismatch, "spans do not cover the frame count");
}

Alignment normalize_alignment(const std::vector<std::pair<long, long>>& spans,
                              long total_frames) {
    if (spans.empty()) throw Error(ErrorCode::AlignmentMismatch, "no spans");
    Alignment out;
    long cursor = 0;
    for (size_t i = 0; i < spans.size(); ++i) {
        auto [s, e] = spans[i];
        if (s < cursor || e <= s)
            throw Error(ErrorCode::AlignmentMismatch, "overlapping or empty span");
        // Gap before this word attaches to it; trailing frames go to the last.
        long start = cursor;
        long end = (i + 1 == spans.size()) ? total_frames : e;
        if (end <= start) throw Error(ErrorCode::AlignmentMismatch, "span collapsed");
        out.spans.emplace_back(start, end);
        cursor = end;
    }
    out.validate(total_frames);
    return out;
}

std::string Utterance::text() const {
    std::string t;
    for (const auto& w : words) t += w;
    return t;
}

TemplateTable::TemplateTable(const CorpusSpec& spec) {
    spec.validate();
    alphabet_size_ = static_cast<int>(spec.alphabet.size());
    const int c = spec.num_channels;
    const uint8_t hi_bin = static_cast<uint8_t>(spec.num_bins - 1);

    // Codeword k < C is Hadamard row k (+1 -> hi bin); k >= C is the
    // complement of row k-C. Row distances are all >= C/2; the all-zero word
    // (complement of row 0, index C) is reserved for silence.
    auto codeword = [&](int k) {
        DmelFrame f;
        f.bins.resize(c);
        const int row = k % c;
        const bool flip = k >= c;
        for (int j = 0; j < c; ++j) {
            const bool plus = (std::popcount(static_cast<unsigned>(row & j)) % 2) == 0;
            f.bins[j] = (plus != flip) ? hi_bin : 0;
        }
        return f;
    };

    silence_ = codeword(c);
    const int needed = alphabet_size_ * (alphabet_size_ + 1);
    table_.reserve(needed);
    for (int k = 0; table_.size() < static_cast<size_t>(needed); ++k) {
        if (k == c) continue;  // silence
        table_.push_back(codeword(k));
    }
}

const DmelFrame& TemplateTable::get(int char_idx, int successor_idx) const {
    return table_[static_cast<size_t>(char_idx) * (alphabet_size_ + 1) + successor_idx];
}

std::vector<Utterance> generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    const TemplateTable templates(spec);
    const int a = static_cast<int>(spec.alphabet.size());

    std::vector<Utterance> utts(spec.num_utterances);
    for (int u = 0; u < spec.num_utterances; ++u) {
        std::mt19937_64 rng(mix_seed(spec.seed, static_cast<uint64_t>(u)));
        std::uniform_int_distribution<int> word_count(spec.words_min, spec.words_max);
        std::uniform_int_distribution<int> char_count(spec.chars_min, spec.chars_max);
        std::uniform_int_distribution<int> pick_char(0, a - 1);
        // Rate variation is deterministic per character (a speaking-rate
        // analog): every occurrence of a character has the same run length,
        // offset from the base by the character's index folded into
        // [-rate_jitter, +rate_jitter].
        auto rate_offset = [&](int char_idx) {
            if (spec.rate_jitter == 0) return 0;
            return char_idx % (2 * spec.rate_jitter + 1) - spec.rate_jitter;
        };

        Utterance& utt = utts[u];
        const int nwords = word_count(rng);
        std::vector<int> stream;  // concatenated character indices
        std::vector<size_t> word_char_counts;
        for (int w = 0; w < nwords; ++w) {
            const int nchars = char_count(rng);
            word_char_counts.push_back(nchars);
            std::string word;
            for (int k = 0; k < nchars; ++k) {
                const int ci = pick_char(rng);
                stream.push_back(ci);
                word += spec.alphabet[static_cast<size_t>(ci)];
            }
            utt.words.push_back(std::move(word));
        }

        std::vector<long> run_lengths(stream.size());
        for (size_t i = 0; i < stream.size(); ++i) {
            const int successor =
                i + 1 < stream.size() ? stream[i + 1] : templates.end_successor();
            const long len = spec.frames_per_char_base + rate_offset(stream[i]);
            run_lengths[i] = len;
            const DmelFrame& tpl = templates.get(stream[i], successor);
            for (long r = 0; r < len; ++r) utt.frames.push_back(tpl);
        }

        long cursor = 0;
        size_t ci = 0;
        for (size_t w = 0; w < word_char_counts.size(); ++w) {
            long len = 0;
            for (size_t k = 0; k < word_char_counts[w]; ++k) len += run_lengths[ci++];
            utt.alignment.spans.emplace_back(cursor, cursor + len);
            cursor += len;
        }
        utt.alignment.validate(static_cast<long>(utt.frames.size()));
    }
    return utts;
}

std::string oracle_decode(const std::vector<DmelFrame>& frames, const CorpusSpec& spec,
                          int length_slack) {
    spec.validate();
    if (frames.empty()) throw Error(ErrorCode::EmptyInput, "no frames to decode");
    const TemplateTable templates(spec);
    const int a = templates.alphabet_size();
    const int end = templates.end_successor();
    const long f = static_cast<long>(frames.size());
    const long len_lo = std::max(1, spec.frames_per_char_base - spec.rate_jitter - length_slack);
    const long len_hi = spec.frames_per_char_base + spec.rate_jitter + length_slack;

    // cost[t][pair] = Hamming distance of frame t against template (c, d).
    const int npairs = a * (end + 1);
    std::vector<std::vector<int>> cost(f, std::vector<int>(npairs));
    for (long t = 0; t < f; ++t)
        for (int c = 0; c < a; ++c)
            for (int d = 0; d <= end; ++d)
                cost[t][c * (end + 1) + d] = hamming(frames[t], templates.get(c, d));

    // dp[t][c]: best cost of decoding frames[0..t) where the next run belongs
    // to character c (its successor is chosen by the transition).
    const long inf = std::numeric_limits<long>::max() / 4;
    std::vector<std::vector<long>> dp(f + 1, std::vector<long>(a, inf));
    struct Back {
        long prev_t = -1;
        int prev_c = -1;
    };
    std::vector<std::vector<Back>> back(f + 1, std::vector<Back>(a));
    for (int c = 0; c < a; ++c) dp[0][c] = 0;

    long best_final = inf;
    int best_final_c = -1;
    long best_final_t = -1;
    for (long t = 0; t < f; ++t) {
        for (int c = 0; c < a; ++c) {
            if (dp[t][c] >= inf) continue;
            for (int d = 0; d <= end; ++d) {
                const int pair = c * (end + 1) + d;
                long run = 0;
                for (long l = 1; l <= len_hi && t + l <= f; ++l) {
                    run += cost[t + l - 1][pair];
                    if (l < len_lo) continue;
                    const long total = dp[t][c] + run;
                    if (d == end) {
                        if (t + l == f && total < best_final) {
                            best_final = total;
                            best_final_c = c;
                            best_final_t = t;
                        }
                    } else if (total < dp[t + l][d]) {
                        dp[t + l][d] = total;
                        back[t + l][d] = {t, c};
                    }
                }
            }
        }
    }
    if (best_final_c < 0) throw Error(ErrorCode::InvalidInput, "frames admit no segmentation");

    std::string text;
    long t = best_final_t;
    int c = best_final_c;
    while (true) {
        text += spec.alphabet[static_cast<size_t>(c)];
        if (t == 0 && back[t][c].prev_c < 0) break;
        const Back b = back[t][c];
        t = b.prev_t;
        c = b.prev_c;
    }
    std::reverse(text.begin(), text.end());
    return text;
}

double cer(const std::string& reference, const std::string& hypothesis) {
    if (reference.empty()) throw Error(ErrorCode::EmptyReference, "empty reference");
    const size_t n = reference.size(), m = hypothesis.size();
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub = prev[j - 1] + (reference[i - 1] != hypothesis[j - 1]);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(n);
}

void save_corpus(const std::string& dir, const std::vector<Utterance>& utts,
                 const CorpusSpec& spec) {
    fs::create_directories(dir);
    {
        nlohmann::json j{{"alphabet", spec.alphabet},
                         {"frames_per_char_base", spec.frames_per_char_base},
                         {"rate_jitter", spec.rate_jitter},
                         {"context_depth", spec.context_depth},
                         {"num_utterances", spec.num_utterances},
                         {"words_min", spec.words_min},
                         {"words_max", spec.words_max},
                         {"chars_min", spec.chars_min},
                         {"chars_max", spec.chars_max},
                         {"num_channels", spec.num_channels},
                         {"num_bins", spec.num_bins},
                         {"seed", spec.seed}};
        std::ofstream os(dir + "/corpus_spec.json");
        os << j.dump(2) << "\n";
    }
    std::ofstream manifest(dir + "/manifest.jsonl");
    if (!manifest) throw Error(ErrorCode::IoError, "cannot open manifest in " + dir);
    for (size_t i = 0; i < utts.size(); ++i) {
        const std::string frame_path = "utt_" + std::to_string(i) + ".dmel";
        dmel::save_frames(dir + "/" + frame_path, utts[i].frames, spec.num_channels,
                          spec.num_bins, 0.025);
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& [s, e] : utts[i].alignment.spans) spans.push_back({s, e});
        nlohmann::json rec{
            {"id", i}, {"words", utts[i].words}, {"frames", frame_path}, {"spans", spans}};
        manifest << rec.dump() << "\n";
    }
}

std::vector<Utterance> load_corpus(const std::string& dir, CorpusSpec* spec) {
    if (spec) {
        std::ifstream is(dir + "/corpus_spec.json");
        if (!is) throw Error(ErrorCode::IoError, "cannot open corpus_spec.json in " + dir);
        nlohmann::json j;
        is >> j;
        spec->alphabet = j.at("alphabet").get<std::string>();
        spec->frames_per_char_base = j.at("frames_per_char_base").get<int>();
        spec->rate_jitter = j.at("rate_jitter").get<int>();
        spec->context_depth = j.at("context_depth").get<int>();
        spec->num_utterances = j.at("num_utterances").get<int>();
        spec->words_min = j.at("words_min").get<int>();
        spec->words_max = j.at("words_max").get<int>();
        spec->chars_min = j.at("chars_min").get<int>();
        spec->chars_max = j.at("chars_max").get<int>();
        spec->num_channels = j.at("num_channels").get<int>();
        spec->num_bins = j.at("num_bins").get<int>();
        spec->seed = j.at("seed").get<uint64_t>();
    }
    std::ifstream manifest(dir + "/manifest.jsonl");
    if (!manifest) throw Error(ErrorCode::IoError, "cannot open manifest in " + dir);
    std::vector<Utterance> utts;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const nlohmann::json rec = nlohmann::json::parse(line);
        Utterance utt;
        utt.words = rec.at("words").get<std::vector<std::string>>();
        utt.frames = dmel::load_frames(dir + "/" + rec.at("frames").get<std::string>());
        for (const auto& span : rec.at("spans"))
            utt.alignment.spans.emplace_back(span[0].get<long>(), span[1].get<long>());
        utt.alignment.validate(static_cast<long>(utt.frames.size()));
        utts.push_back(std::move(utt));
    }
    return utts;
}

void save_alignment(const std::string& path, const std::vector<std::string>& words,
                    const Alignment& alignment) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& [s, e] : alignment.spans) spans.push_back({s, e});
    nlohmann::json j{{"words", words}, {"spans", spans}};
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os << j.dump(2) << "\n";
}

std::pair<std::vector<std::string>, Alignment> load_alignment(const std::string& path,
                                                              long total_frames) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    is >> j;
    auto words = j.at("words").get<std::vector<std::string>>();
    std::vector<std::pair<long, long>> spans;
    for (const auto& span : j.at("spans"))
        spans.emplace_back(span[0].get<long>(), span[1].get<long>());
    if (words.size() != spans.size())
        throw Error(ErrorCode::AlignmentMismatch, "word count != span count");
    return {std::move(words), normalize_alignment(spans, total_frames)};
}

}  // namespace speakstream::corpus
