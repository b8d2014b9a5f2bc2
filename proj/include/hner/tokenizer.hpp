#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace hner {

// Subword inventory with dense ids. Lines 0..3 of the vocabulary file are the
// special tokens [PAD], [UNK], [CLS], [SEP] in that order.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;

    static Vocabulary from_entries(const std::vector<std::string>& entries,
                                   std::string continuation_prefix = "##");
    static Vocabulary load(const std::string& path);

    int size() const { return static_cast<int>(entries_.size()); }
    const std::string& piece(int id) const { return entries_.at(id); }
    const std::vector<std::string>& entries() const { return entries_; }
    const std::string& continuation_prefix() const { return prefix_; }
    // -1 if absent
    int id_of(const std::string& piece) const;
    bool contains(const std::string& piece) const { return id_of(piece) >= 0; }

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, int> ids_;
    std::string prefix_ = "##";
};

struct TokenizedSentence {
    std::vector<std::string> words;
    std::vector<int> subword_ids;
    std::vector<int> word_first_index;  // strictly increasing, one per word
};

// Greedy longest-match segmentation; whole-word [UNK] fallback when any
// remainder is uncoverable. Throws on empty word or internal whitespace.
std::vector<std::string> tokenize_word(const std::string& word, const Vocabulary& vocab);

// word_first_index accounts for the leading [CLS] when add_boundaries is set;
// [CLS]/[SEP] never appear in word_first_index.
TokenizedSentence tokenize_sentence(const std::vector<std::string>& words,
                                    const Vocabulary& vocab, bool add_boundaries = true);

}  // namespace hner
