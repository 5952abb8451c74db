#include "speakstream/interleave.hpp"

#include <sstream>

namespace speakstream::interleave {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void check_inputs(const std::vector<std::string>& words, const std::vector<DmelFrame>& frames,
                  const Alignment& alignment) {
    if (words.empty()) throw Error(ErrorCode::InvalidInput, "no words");
    if (alignment.spans.size() != words.size())
        throw Error(ErrorCode::AlignmentMismatch, "word count != span count");
    alignment.validate(static_cast<long>(frames.size()));
}

void push_text_window(TokenSequence& seq, const std::vector<std::string>& words, int w0, int w1,
                      int segment) {
    for (int w = w0; w < w1; ++w) {
        if (w > w0) {
            Token sep{TokenKind::WordSep};
            sep.segment_index = segment;
            seq.tokens.push_back(sep);
            seq.word_offsets.push_back(-1);
        }
        for (char c : words[static_cast<size_t>(w)]) {
            Token tok{TokenKind::TextChar};
            tok.ch = c;
            tok.segment_index = segment;
            seq.tokens.push_back(tok);
            seq.word_offsets.push_back(w);
        }
    }
}

void push_speech_segment(TokenSequence& seq, const std::vector<DmelFrame>& frames,
                         const Alignment& alignment, int w0, int w1, int segment) {
    Token bos{TokenKind::SpeechBos};
    bos.segment_index = segment;
    seq.tokens.push_back(bos);
    seq.word_offsets.push_back(-1);
    for (int w = w0; w < w1; ++w) {
        const auto [s, e] = alignment.spans[static_cast<size_t>(w)];
        for (long f = s; f < e; ++f) {
            Token tok{TokenKind::SpeechFrame};
            tok.frame = frames[static_cast<size_t>(f)];
            tok.segment_index = segment;
            seq.tokens.push_back(tok);
            seq.word_offsets.push_back(w);
        }
    }
    Token eos{TokenKind::SpeechEos};
    eos.segment_index = segment;
    seq.tokens.push_back(eos);
    seq.word_offsets.push_back(-1);
}

void finish_mask(TokenSequence& seq) {
    const size_t len = seq.tokens.size();
    seq.loss_mask.assign(len, 0);
    for (size_t p = 0; p + 1 < len; ++p) {
        const TokenKind next = seq.tokens[p + 1].kind;
        seq.loss_mask[p] = next == TokenKind::SpeechFrame || next == TokenKind::SpeechEos;
    }
}

TokenSequence build_interleaved(Scheme scheme, const std::vector<std::string>& words,
                                const std::vector<DmelFrame>& frames,
                                const Alignment& alignment, int m, int n) {
    InterleaveConfig cfg{scheme, m, n};
    cfg.validate();
    check_inputs(words, frames, alignment);
    const int t = static_cast<int>(words.size());
    const auto [x, y] = segment_counts(scheme, m, n, t);

    TokenSequence seq;
    for (int i = 1; i <= y; ++i) {
        if (i <= x) {
            const auto [w0, w1] = text_window(scheme, m, n, i, t);
            push_text_window(seq, words, w0, w1, i);
        }
        const auto [s0, s1] = speech_window(n, i, t);
        push_speech_segment(seq, frames, alignment, s0, s1, i);
    }
    finish_mask(seq);
    return seq;
}

}  // namespace

void InterleaveConfig::validate() const {
    if (scheme == Scheme::NonStreaming) return;
    if (m < 1 || n < 1 || n > m)
        throw Error(ErrorCode::InvalidConfig, "need 1 <= n <= m and m >= 1");
}

const char* token_kind_name(TokenKind k) {
    switch (k) {
        case TokenKind::TextChar: return "char";
        case TokenKind::WordSep: return "sep";
        case TokenKind::TextBos: return "text_bos";
        case TokenKind::TextEos: return "text_eos";
        case TokenKind::SpeechBos: return "speech_bos";
        case TokenKind::SpeechEos: return "speech_eos";
        case TokenKind::SpeechFrame: return "frame";
    }
    return "?";
}

SegmentCounts segment_counts(Scheme scheme, int m, int n, int t) {
    InterleaveConfig cfg{scheme, m, n};
    cfg.validate();
    if (t < 1) throw Error(ErrorCode::InvalidInput, "t must be >= 1");
    const int y = ceil_div(t, n);
    if (scheme == Scheme::S1) return {y, y};
    if (scheme == Scheme::S2) {
        const int x = t > m ? ceil_div(t - m, n) + 1 : 1;
        return {x, y};
    }
    return {1, 1};  // NonStreaming: one text block, one speech block
}

std::pair<int, int> text_window(Scheme scheme, int m, int n, int i, int t) {
    if (scheme == Scheme::S1) {
        const int w0 = n * (i - 1);
        return {w0, std::min(t, w0 + m)};
    }
    if (i == 1) return {0, std::min(t, m)};
    return {n * (i - 2) + m, std::min(t, n * (i - 1) + m)};
}

std::pair<int, int> speech_window(int n, int i, int t) {
    return {n * (i - 1), std::min(t, n * i)};
}

TokenSequence build_scheme1(const std::vector<std::string>& words,
                            const std::vector<DmelFrame>& frames, const Alignment& alignment,
                            int m, int n) {
    return build_interleaved(Scheme::S1, words, frames, alignment, m, n);
}

TokenSequence build_scheme2(const std::vector<std::string>& words,
                            const std::vector<DmelFrame>& frames, const Alignment& alignment,
                            int m, int n) {
    return build_interleaved(Scheme::S2, words, frames, alignment, m, n);
}

TokenSequence build_nonstreaming(const std::vector<std::string>& words,
                                 const std::vector<DmelFrame>& frames) {
    if (words.empty()) throw Error(ErrorCode::InvalidInput, "no words");
    if (frames.empty()) throw Error(ErrorCode::AlignmentMismatch, "no frames for words");
    TokenSequence seq;
    seq.tokens.push_back({TokenKind::TextBos});
    seq.word_offsets.push_back(-1);
    push_text_window(seq, words, 0, static_cast<int>(words.size()), 1);
    seq.tokens.push_back({TokenKind::TextEos});
    seq.word_offsets.push_back(-1);
    seq.tokens.push_back({TokenKind::SpeechBos});
    seq.word_offsets.push_back(-1);
    for (const auto& f : frames) {
        Token tok{TokenKind::SpeechFrame};
        tok.frame = f;
        seq.tokens.push_back(tok);
        seq.word_offsets.push_back(-1);
    }
    seq.tokens.push_back({TokenKind::SpeechEos});
    seq.word_offsets.push_back(-1);
    finish_mask(seq);
    return seq;
}

TokenSequence build(const corpus::Utterance& utt, const InterleaveConfig& cfg) {
    switch (cfg.scheme) {
        case Scheme::S1:
            return build_scheme1(utt.words, utt.frames, utt.alignment, cfg.m, cfg.n);
        case Scheme::S2:
            return build_scheme2(utt.words, utt.frames, utt.alignment, cfg.m, cfg.n);
        case Scheme::NonStreaming:
            return build_nonstreaming(utt.words, utt.frames);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown scheme");
}

std::vector<DmelFrame> strip_speech(const TokenSequence& seq) {
    std::vector<DmelFrame> frames;
    bool in_speech = false;
    for (const auto& tok : seq.tokens) {
        switch (tok.kind) {
            case TokenKind::SpeechBos:
                if (in_speech) throw Error(ErrorCode::MalformedSequence, "nested speech BOS");
                in_speech = true;
                break;
            case TokenKind::SpeechEos:
                if (!in_speech) throw Error(ErrorCode::MalformedSequence, "EOS without BOS");
                in_speech = false;
                break;
            case TokenKind::SpeechFrame:
                if (!in_speech)
                    throw Error(ErrorCode::MalformedSequence, "frame outside BOS/EOS");
                frames.push_back(tok.frame);
                break;
            default:
                if (in_speech)
                    throw Error(ErrorCode::MalformedSequence, "text inside a speech segment");
                break;
        }
    }
    if (in_speech) throw Error(ErrorCode::MalformedSequence, "unterminated speech segment");
    return frames;
}

std::string dump(const TokenSequence& seq) {
    std::ostringstream os;
    for (size_t p = 0; p < seq.tokens.size(); ++p) {
        const Token& tok = seq.tokens[p];
        os << token_kind_name(tok.kind);
        if (tok.kind == TokenKind::TextChar) os << ' ' << tok.ch;
        os << " seg=" << tok.segment_index << " mask=" << int(seq.loss_mask[p]) << "\n";
    }
    return os.str();
}

}  // namespace speakstream::interleave
