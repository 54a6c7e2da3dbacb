#include "vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace selfsynth {

namespace {

const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> s = {"<pad>", "<bos>", "<sep>", "<eos>", "\n", "<unk>"};
    return s;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(special_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < kNumSpecials) throw InvalidArguments("vocabulary missing specials");
    for (size_t i = 0; i < tokens_.size(); ++i) {
        index_.emplace(tokens_[i], static_cast<int>(i));
    }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens) {
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const std::string& s : special_tokens()) uniq.erase(s);
    std::vector<std::string> all = special_tokens();
    all.insert(all.end(), uniq.begin(), uniq.end());
    return Vocabulary(std::move(all));
}

int Vocabulary::id_of(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

std::vector<int> Vocabulary::encode_words(const std::vector<std::string>& words) const {
    std::vector<int> out;
    out.reserve(words.size());
    for (const std::string& w : words) out.push_back(id_of(w));
    return out;
}

std::vector<int> Vocabulary::encode_program(const Program& p) const {
    std::vector<int> out;
    for (const Statement& s : p.statements) {
        for (const std::string& lex : statement_lexemes(s)) out.push_back(id_of(lex));
        out.push_back(kNewline);
    }
    return out;
}

std::string Vocabulary::decode_program(const std::vector<int>& ids) const {
    std::string out;
    bool line_start = true;
    for (int id : ids) {
        if (id == kNewline) {
            out += '\n';
            line_start = true;
            continue;
        }
        if (!line_start) out += ' ';
        out += token(id);
        line_start = false;
    }
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace selfsynth
