#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hner/crf.hpp"

namespace hner {

// Malformed input data (distinct from usage errors for CLI exit codes).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Sentence {
    std::vector<std::string> words;
    std::vector<std::string> tags;
};

struct Corpus {
    std::vector<Sentence> sentences;
    std::vector<std::string> entity_types;  // sorted, distinct

    LabelScheme scheme() const { return LabelScheme(entity_types); }
};

// Token-per-line CoNLL: token and tag split on a whitespace run, blank line
// ends a sentence, -DOCSTART- lines are skipped. I-t after O or after a
// different type is an error unless repair rewrites it to B-t.
Corpus parse_conll(const std::string& path, bool repair = false);
Corpus parse_conll_stream(std::istream& in, bool repair = false,
                          const std::string& source = "<stream>");

void write_conll(std::ostream& out, const std::vector<Sentence>& sentences);

struct CorpusStats {
    long long sentences = 0;
    long long tokens = 0;
    std::map<std::string, long long> entities;  // per type

    std::string to_json() const;
};

CorpusStats corpus_stats(const Corpus& corpus);

// Deterministic whole-word + single-character vocabulary derived from a
// corpus, used when no vocabulary file is supplied.
std::vector<std::string> build_vocabulary_entries(const Corpus& corpus);

}  // namespace hner
