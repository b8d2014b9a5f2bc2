#pragma once

#include <string>
#include <vector>

namespace hner {

struct EntitySpan {
    std::string entity_type;
    int start = 0;  // inclusive word index
    int end = 0;    // exclusive

    bool operator==(const EntitySpan& o) const {
        return entity_type == o.entity_type && start == o.start && end == o.end;
    }
    bool operator<(const EntitySpan& o) const {
        if (start != o.start) return start < o.start;
        if (end != o.end) return end < o.end;
        return entity_type < o.entity_type;
    }
};

struct TypeMetrics {
    std::string entity_type;
    double precision = 0, recall = 0, f1 = 0;
    long long support = 0;  // gold span count
};

struct EvalReport {
    std::vector<TypeMetrics> per_type;
    double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    long long gold_total = 0, pred_total = 0, tp_total = 0;

    std::string to_json() const;   // fixed key order
    std::string to_table() const;  // fixed-width terminal table
};

// Chunk extraction over BIO tag strings. Lenient mode (default, matching the
// usual evaluation convention): an I-t that does not continue a same-type
// span starts a new one. Strict mode treats such an I-t as outside.
std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags,
                                      bool strict = false);

// Exact (type, start, end) matching; macro over types with gold support > 0.
EvalReport compute_prf(const std::vector<std::vector<EntitySpan>>& gold,
                       const std::vector<std::vector<EntitySpan>>& pred);

EvalReport evaluate_tags(const std::vector<std::vector<std::string>>& gold_tags,
                         const std::vector<std::vector<std::string>>& pred_tags,
                         bool strict = false);

}  // namespace hner
