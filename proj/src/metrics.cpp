#include "hner/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hner {

namespace {

struct TagKind {
    char prefix;  // 'O', 'B' or 'I'
    std::string type;
};

TagKind parse_tag(const std::string& tag) {
    if (tag == "O") return {'O', ""};
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-')
        return {tag[0], tag.substr(2)};
    throw std::invalid_argument("unknown tag: " + tag);
}

double ratio(long long num, long long den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags, bool strict) {
    std::vector<EntitySpan> spans;
    bool open = false;
    std::string open_type;
    int open_start = 0;
    auto close = [&](int end) {
        if (open) spans.push_back({open_type, open_start, end});
        open = false;
    };
    for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
        TagKind t = parse_tag(tags[i]);
        if (t.prefix == 'B') {
            close(i);
            open = true;
            open_type = t.type;
            open_start = i;
        } else if (t.prefix == 'I') {
            if (open && open_type == t.type) continue;
            close(i);
            if (!strict) {  // lenient: stray I-t starts a new span
                open = true;
                open_type = t.type;
                open_start = i;
            }
        } else {
            close(i);
        }
    }
    close(static_cast<int>(tags.size()));
    return spans;
}

EvalReport compute_prf(const std::vector<std::vector<EntitySpan>>& gold,
                       const std::vector<std::vector<EntitySpan>>& pred) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("compute_prf: sentence count mismatch");

    struct Counts {
        long long tp = 0, gold = 0, pred = 0;
    };
    std::map<std::string, Counts> by_type;
    EvalReport rep;

    for (std::size_t s = 0; s < gold.size(); ++s) {
        for (const auto& g : gold[s]) by_type[g.entity_type].gold++;
        for (const auto& p : pred[s]) {
            by_type[p.entity_type].pred++;
            if (std::find(gold[s].begin(), gold[s].end(), p) != gold[s].end())
                by_type[p.entity_type].tp++;
        }
    }

    long long macro_n = 0;
    for (const auto& [type, c] : by_type) {
        rep.tp_total += c.tp;
        rep.gold_total += c.gold;
        rep.pred_total += c.pred;
        TypeMetrics m;
        m.entity_type = type;
        m.support = c.gold;
        m.precision = ratio(c.tp, c.pred);
        m.recall = ratio(c.tp, c.gold);
        m.f1 = f1_of(m.precision, m.recall);
        rep.per_type.push_back(m);
        if (c.gold > 0) {  // macro only over types present in gold
            rep.macro_precision += m.precision;
            rep.macro_recall += m.recall;
            rep.macro_f1 += m.f1;
            ++macro_n;
        }
    }
    if (macro_n > 0) {
        rep.macro_precision /= macro_n;
        rep.macro_recall /= macro_n;
        rep.macro_f1 /= macro_n;
    }
    rep.micro_precision = ratio(rep.tp_total, rep.pred_total);
    rep.micro_recall = ratio(rep.tp_total, rep.gold_total);
    rep.micro_f1 = f1_of(rep.micro_precision, rep.micro_recall);
    return rep;
}

EvalReport evaluate_tags(const std::vector<std::vector<std::string>>& gold_tags,
                         const std::vector<std::vector<std::string>>& pred_tags,
                         bool strict) {
    if (gold_tags.size() != pred_tags.size())
        throw std::invalid_argument("evaluate_tags: sentence count mismatch");
    std::vector<std::vector<EntitySpan>> gold, pred;
    gold.reserve(gold_tags.size());
    pred.reserve(pred_tags.size());
    for (const auto& t : gold_tags) gold.push_back(extract_spans(t, strict));
    for (const auto& t : pred_tags) pred.push_back(extract_spans(t, strict));
    return compute_prf(gold, pred);
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["per_type"] = nlohmann::ordered_json::array();
    for (const auto& m : per_type) {
        j["per_type"].push_back({{"type", m.entity_type},
                                 {"precision", m.precision},
                                 {"recall", m.recall},
                                 {"f1", m.f1},
                                 {"support", m.support}});
    }
    j["micro"] = {{"precision", micro_precision}, {"recall", micro_recall}, {"f1", micro_f1}};
    j["macro"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["counts"] = {{"gold", gold_total}, {"pred", pred_total}, {"tp", tp_total}};
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %9s %9s %9s %9s\n", "type", "precision",
                  "recall", "f1", "support");
    os << line;
    for (const auto& m : per_type) {
        std::snprintf(line, sizeof(line), "%-16s %9.4f %9.4f %9.4f %9lld\n",
                      m.entity_type.c_str(), m.precision, m.recall, m.f1, m.support);
        os << line;
    }
    std::snprintf(line, sizeof(line), "%-16s %9.4f %9.4f %9.4f %9lld\n", "micro",
                  micro_precision, micro_recall, micro_f1, gold_total);
    os << line;
    std::snprintf(line, sizeof(line), "%-16s %9.4f %9.4f %9.4f %9lld\n", "macro",
                  macro_precision, macro_recall, macro_f1, gold_total);
    os << line;
    return os.str();
}

}  // namespace hner
