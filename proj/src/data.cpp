#include "hner/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hner {

namespace {

struct ParsedTag {
    char prefix;  // 'O', 'B', 'I'
    std::string type;
};

ParsedTag parse_bio(const std::string& tag, const std::string& src, int line_no) {
    if (tag == "O") return {'O', ""};
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-')
        return {tag[0], tag.substr(2)};
    throw DataError(src + ":" + std::to_string(line_no) + ": malformed tag \"" + tag + "\"");
}

}  // namespace

Corpus parse_conll_stream(std::istream& in, bool repair, const std::string& source) {
    Corpus corpus;
    std::set<std::string> types;
    Sentence cur;
    std::vector<int> cur_lines;
    std::string line;
    int line_no = 0;

    auto flush = [&]() {
        if (cur.words.empty()) return;
        // BIO validity: I-t must continue a same-type span
        ParsedTag prev{'O', ""};
        for (std::size_t i = 0; i < cur.tags.size(); ++i) {
            ParsedTag t = parse_bio(cur.tags[i], source, cur_lines[i]);
            if (t.prefix == 'I' && !(prev.prefix != 'O' && prev.type == t.type)) {
                if (repair) {
                    cur.tags[i] = "B-" + t.type;
                    t.prefix = 'B';
                } else {
                    throw DataError(source + ":" + std::to_string(cur_lines[i]) +
                                    ": I-" + t.type + " does not continue a span (use --repair)");
                }
            }
            if (t.prefix != 'O') types.insert(t.type);
            prev = t;
        }
        corpus.sentences.push_back(std::move(cur));
        cur = {};
        cur_lines.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) {
            flush();
            continue;
        }
        if (trimmed.rfind("-DOCSTART-", 0) == 0) continue;
        std::istringstream ls(trimmed);
        std::string token, tag, extra;
        if (!(ls >> token >> tag))
            throw DataError(source + ":" + std::to_string(line_no) +
                            ": expected \"token tag\", got \"" + line + "\"");
        if (ls >> extra)
            throw DataError(source + ":" + std::to_string(line_no) +
                            ": trailing field \"" + extra + "\"");
        cur.words.push_back(token);
        cur.tags.push_back(tag);
        cur_lines.push_back(line_no);
    }
    flush();

    if (corpus.sentences.empty())
        throw DataError(source + ": no sentences found");
    corpus.entity_types.assign(types.begin(), types.end());
    return corpus;
}

Corpus parse_conll(const std::string& path, bool repair) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_conll_stream(in, repair, path);
}

void write_conll(std::ostream& out, const std::vector<Sentence>& sentences) {
    for (const auto& s : sentences) {
        for (std::size_t i = 0; i < s.words.size(); ++i)
            out << s.words[i] << '\t' << s.tags[i] << '\n';
        out << '\n';
    }
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats st;
    st.sentences = static_cast<long long>(corpus.sentences.size());
    for (const auto& t : corpus.entity_types) st.entities[t] = 0;
    for (const auto& s : corpus.sentences) {
        st.tokens += static_cast<long long>(s.words.size());
        for (const auto& tag : s.tags)
            if (tag.size() > 2 && tag[0] == 'B') st.entities[tag.substr(2)]++;
    }
    return st;
}

std::string CorpusStats::to_json() const {
    nlohmann::ordered_json j;
    j["sentences"] = sentences;
    j["tokens"] = tokens;
    j["entities"] = nlohmann::ordered_json::object();
    long long total = 0;
    for (const auto& [t, n] : entities) {
        j["entities"][t] = n;
        total += n;
    }
    j["entities_total"] = total;
    return j.dump(2);
}

std::vector<std::string> build_vocabulary_entries(const Corpus& corpus) {
    std::set<std::string> words;
    std::set<char> chars;
    for (const auto& s : corpus.sentences)
        for (const auto& w : s.words) {
            words.insert(w);
            for (char c : w) chars.insert(c);
        }
    std::vector<std::string> entries = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (char c : chars) {
        std::string s(1, c);
        if (!words.count(s)) entries.push_back(s);
        entries.push_back("##" + s);
    }
    for (const auto& w : words) entries.push_back(w);
    return entries;
}

}  // namespace hner
