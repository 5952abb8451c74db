#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "speakstream/dmel.hpp"

namespace speakstream::corpus {

using dmel::DmelFrame;

struct CorpusSpec {
    std::string alphabet = "abcdefgh";  // ordered character set
    int frames_per_char_base = 3;
    int rate_jitter = 0;   // max +/- frames per character
    int context_depth = 1; // pattern of a char depends on the NEXT char
    int num_utterances = 100;
    int words_min = 3, words_max = 6;
    int chars_min = 1, chars_max = 3;
    int num_channels = 64;  // power of two; 2*C-1 template codewords available
    int num_bins = 16;
    uint64_t seed = 0;

    void validate() const;
    int char_index(char c) const;  // -1 when not in alphabet
};

struct Alignment {
    // Per-word [start_frame, end_frame) spans, contiguous from 0.
    std::vector<std::pair<long, long>> spans;

    void validate(long total_frames) const;
};

// Attaches unassigned frames to the FOLLOWING word (trailing frames to the
// last word) so that span concatenation is lossless. Used for imported
// alignments; synthetic generation produces exact spans directly.
Alignment normalize_alignment(const std::vector<std::pair<long, long>>& spans,
                              long total_frames);

struct Utterance {
    std::vector<std::string> words;
    std::vector<DmelFrame> frames;
    Alignment alignment;

    std::string text() const;  // words concatenated, no separator
};

// Per-(char, successor) channel-energy templates. Codewords are corner points
// of the bin lattice drawn from a Hadamard code, pairwise Hamming distance
// >= num_channels / 2, silence included in the code set.
class TemplateTable {
public:
    explicit TemplateTable(const CorpusSpec& spec);

    // successor index: [0, alphabet_size) for a following character,
    // alphabet_size for end-of-utterance.
    const DmelFrame& get(int char_idx, int successor_idx) const;
    const DmelFrame& silence() const { return silence_; }
    int end_successor() const { return alphabet_size_; }
    int alphabet_size() const { return alphabet_size_; }

private:
    int alphabet_size_;
    std::vector<DmelFrame> table_;  // [char * (A+1) + successor]
    DmelFrame silence_;
};

std::vector<Utterance> generate_corpus(const CorpusSpec& spec);

// Nearest-template DP segmentation of frames into (char, successor) runs;
// returns the minimum-cost character string. Independent of any model.
// length_slack widens the admissible run-length range beyond the spec's
// base +/- jitter; 0 keeps the generator's exact range.
std::string oracle_decode(const std::vector<DmelFrame>& frames, const CorpusSpec& spec,
                          int length_slack = 0);

// Character error rate: Levenshtein distance / reference length.
double cer(const std::string& reference, const std::string& hypothesis);

// Corpus manifest: one JSON record per line (id, words, frame dump path,
// alignment spans), plus the spec saved alongside.
void save_corpus(const std::string& dir, const std::vector<Utterance>& utts,
                 const CorpusSpec& spec);
std::vector<Utterance> load_corpus(const std::string& dir, CorpusSpec* spec = nullptr);

// Alignment interchange: words plus integer span pairs; accepts externally
// produced forced alignments (spans are normalized on load).
void save_alignment(const std::string& path, const std::vector<std::string>& words,
                    const Alignment& alignment);
std::pair<std::vector<std::string>, Alignment> load_alignment(const std::string& path,
                                                              long total_frames);

}  // namespace speakstream::corpus
