#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dsl.hpp"

namespace selfsynth {

// Word-level vocabulary shared between NL specifications and DSL lexemes.
// Reserved ids come first; everything else is sorted for determinism.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kSep = 2;
    static constexpr int kEos = 3;
    static constexpr int kNewline = 4;
    static constexpr int kUnk = 5;
    static constexpr int kNumSpecials = 6;

    Vocabulary();
    explicit Vocabulary(std::vector<std::string> tokens);  // full token list incl. specials

    // Builds from raw material: NL word tokens (lowercased by the caller)
    // and DSL lexemes. Duplicates are fine.
    static Vocabulary build(const std::vector<std::string>& tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int id_of(const std::string& token) const;  // kUnk when absent
    bool contains(const std::string& token) const;

    std::vector<int> encode_words(const std::vector<std::string>& words) const;

    // Program tokens: statement lexemes with a NEWLINE after every statement,
    // so prefixes end on a statement boundary.
    std::vector<int> encode_program(const Program& p) const;

    // Inverse of encode_program for model output; specials other than NEWLINE
    // render as their display name, which never parses.
    std::string decode_program(const std::vector<int>& ids) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

std::vector<std::string> split_words(const std::string& text);  // whitespace split, lowercased

}  // namespace selfsynth
