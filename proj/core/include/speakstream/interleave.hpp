#pragma once

#include <string>
#include <vector>

#include "speakstream/corpus.hpp"
#include "speakstream/dmel.hpp"

namespace speakstream::interleave {

using corpus::Alignment;
using dmel::DmelFrame;

enum class Scheme { S1, S2, NonStreaming };

struct InterleaveConfig {
    Scheme scheme = Scheme::S1;
    int m = 3;  // text window length, words
    int n = 1;  // speech hop length, words

    void validate() const;
};

enum class TokenKind {
    TextChar,
    WordSep,
    TextBos,
    TextEos,
    SpeechBos,
    SpeechEos,
    SpeechFrame,
};

const char* token_kind_name(TokenKind k);

struct Token {
    TokenKind kind;
    char ch = 0;       // TextChar payload
    DmelFrame frame;   // SpeechFrame payload
    int segment_index = 1;
};

struct TokenSequence {
    std::vector<Token> tokens;
    // True where the PREDICTION TARGET (the next token) is a SpeechFrame or
    // SpeechEos; the final position is never masked.
    std::vector<uint8_t> loss_mask;
    // Source word index per token position, -1 for non-text tokens.
    std::vector<int> word_offsets;
};

struct SegmentCounts {
    int text_segments;    // x
    int speech_segments;  // y
};

SegmentCounts segment_counts(Scheme scheme, int m, int n, int t);

// Word indices (0-based, half-open) of text segment i (1-based) given the
// total word count t. Used by both the builders and the streaming engine.
std::pair<int, int> text_window(Scheme scheme, int m, int n, int i, int t);
// Word indices covered by speech segment i; identical for both schemes.
std::pair<int, int> speech_window(int n, int i, int t);

TokenSequence build_scheme1(const std::vector<std::string>& words,
                            const std::vector<DmelFrame>& frames, const Alignment& alignment,
                            int m, int n);
TokenSequence build_scheme2(const std::vector<std::string>& words,
                            const std::vector<DmelFrame>& frames, const Alignment& alignment,
                            int m, int n);
TokenSequence build_nonstreaming(const std::vector<std::string>& words,
                                 const std::vector<DmelFrame>& frames);

TokenSequence build(const corpus::Utterance& utt, const InterleaveConfig& cfg);

// Concatenation of all SpeechFrame payloads in order; validates BOS/EOS
// bracketing of every speech segment.
std::vector<DmelFrame> strip_speech(const TokenSequence& seq);

// Human-readable dump, one token per line: kind, segment index, mask bit.
std::string dump(const TokenSequence& seq);

}  // namespace speakstream::interleave
