#include "hner/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace hner {

namespace {
const char* kSpecials[4] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
}

Vocabulary Vocabulary::from_entries(const std::vector<std::string>& entries,
                                    std::string continuation_prefix) {
    Vocabulary v;
    v.prefix_ = std::move(continuation_prefix);
    if (entries.size() < 4)
        throw std::invalid_argument("vocabulary: missing special tokens");
    for (int i = 0; i < 4; ++i)
        if (entries[i] != kSpecials[i])
            throw std::invalid_argument("vocabulary: line " + std::to_string(i) +
                                        " must be " + kSpecials[i]);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string& e = entries[i];
        if (e.empty()) throw std::invalid_argument("vocabulary: empty entry at line " +
                                                   std::to_string(i));
        auto [it, inserted] = v.ids_.emplace(e, static_cast<int>(i));
        if (!inserted)
            throw std::invalid_argument("vocabulary: duplicate entry \"" + e + "\"");
        v.entries_.push_back(e);
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        entries.push_back(line);
    }
    // trailing blank line from a final newline
    if (!entries.empty() && entries.back().empty()) entries.pop_back();
    return from_entries(entries);
}

int Vocabulary::id_of(const std::string& piece) const {
    auto it = ids_.find(piece);
    return it == ids_.end() ? -1 : it->second;
}

std::vector<std::string> tokenize_word(const std::string& word, const Vocabulary& vocab) {
    if (word.empty()) throw std::invalid_argument("tokenize_word: empty word");
    for (char c : word)
        if (std::isspace(static_cast<unsigned char>(c)))
            throw std::invalid_argument("tokenize_word: word contains whitespace");

    std::vector<std::string> pieces;
    std::size_t pos = 0;
    const std::string& pre = vocab.continuation_prefix();
    while (pos < word.size()) {
        std::size_t len = word.size() - pos;
        bool matched = false;
        while (len > 0) {
            std::string cand = word.substr(pos, len);
            if (pos > 0) cand = pre + cand;
            if (vocab.contains(cand)) {
                pieces.push_back(cand);
                pos += len;
                matched = true;
                break;
            }
            --len;
        }
        if (!matched) return {kSpecials[Vocabulary::kUnk]};
    }
    return pieces;
}

TokenizedSentence tokenize_sentence(const std::vector<std::string>& words,
                                    const Vocabulary& vocab, bool add_boundaries) {
    if (words.empty()) throw std::invalid_argument("tokenize_sentence: empty word list");
    TokenizedSentence out;
    out.words = words;
    if (add_boundaries) out.subword_ids.push_back(Vocabulary::kCls);
    for (const auto& w : words) {
        out.word_first_index.push_back(static_cast<int>(out.subword_ids.size()));
        for (const auto& p : tokenize_word(w, vocab)) out.subword_ids.push_back(vocab.id_of(p));
    }
    if (add_boundaries) out.subword_ids.push_back(Vocabulary::kSep);
    return out;
}

}  // namespace hner
