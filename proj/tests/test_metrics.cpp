#include <doctest.h>

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "hner/metrics.hpp"

using namespace hner;

namespace {

std::vector<EntitySpan> spans(std::initializer_list<EntitySpan> s) { return {s}; }

// independent chunker: mark each position with (type, chunk-id), compare sets
std::set<std::tuple<std::string, int, int>> span_set(const std::vector<EntitySpan>& v) {
    std::set<std::tuple<std::string, int, int>> out;
    for (const auto& s : v) out.insert({s.entity_type, s.start, s.end});
    return out;
}

std::vector<std::string> random_tags(std::mt19937_64& rng, int len) {
    static const std::vector<std::string> pool = {"O", "B-X", "I-X", "B-Y", "I-Y"};
    std::uniform_int_distribution<std::size_t> u(0, pool.size() - 1);
    std::vector<std::string> out(len);
    for (auto& t : out) t = pool[u(rng)];
    return out;
}

}  // namespace

TEST_CASE("extract_spans definitional cases") {
    CHECK(span_set(extract_spans({"B-X", "I-X", "O", "B-Y"})) ==
          span_set(spans({{"X", 0, 2}, {"Y", 3, 4}})));
    CHECK(extract_spans({"O", "O", "O"}).empty());
    // lenient: stray I-X opens a span; B-X after I-X starts a new one
    CHECK(span_set(extract_spans({"O", "I-X", "I-X", "B-X"})) ==
          span_set(spans({{"X", 1, 3}, {"X", 3, 4}})));
    // strict: the stray I-X is dropped
    CHECK(span_set(extract_spans({"O", "I-X", "I-X", "B-X"}, true)) ==
          span_set(spans({{"X", 3, 4}})));
    // type change inside a span closes it
    CHECK(span_set(extract_spans({"B-X", "I-Y"})) ==
          span_set(spans({{"X", 0, 1}, {"Y", 1, 2}})));
    // trailing open span closes at the end
    CHECK(span_set(extract_spans({"O", "B-X", "I-X"})) ==
          span_set(spans({{"X", 1, 3}})));
    CHECK_THROWS_AS(extract_spans({"Q-X"}), std::invalid_argument);
    CHECK_THROWS_AS(extract_spans({"B"}), std::invalid_argument);
}

TEST_CASE("extract_spans output is sorted and non-overlapping") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 300; ++rep) {
        auto tags = random_tags(rng, 1 + rep % 12);
        auto sp = extract_spans(tags);
        for (std::size_t i = 0; i < sp.size(); ++i) {
            CHECK(sp[i].start < sp[i].end);
            if (i > 0) CHECK(sp[i].start >= sp[i - 1].end);
        }
    }
}

TEST_CASE("compute_prf exact cases") {
    SUBCASE("perfect prediction") {
        std::vector<std::vector<EntitySpan>> g = {spans({{"X", 0, 2}, {"Y", 3, 4}})};
        auto rep = compute_prf(g, g);
        CHECK(rep.micro_f1 == 1.0);
        CHECK(rep.macro_f1 == 1.0);
        for (const auto& m : rep.per_type) {
            CHECK(m.precision == 1.0);
            CHECK(m.recall == 1.0);
            CHECK(m.f1 == 1.0);
        }
    }
    SUBCASE("half right") {
        std::vector<std::vector<EntitySpan>> g = {spans({{"X", 0, 2}, {"Y", 3, 4}})};
        std::vector<std::vector<EntitySpan>> p = {spans({{"X", 0, 2}, {"X", 3, 4}})};
        auto rep = compute_prf(g, p);
        CHECK(rep.micro_precision == 0.5);
        CHECK(rep.micro_recall == 0.5);
        CHECK(rep.micro_f1 == 0.5);
    }
    SUBCASE("empty prediction gives zeros, not NaN") {
        std::vector<std::vector<EntitySpan>> g = {spans({{"X", 0, 1}})};
        std::vector<std::vector<EntitySpan>> p = {{}};
        auto rep = compute_prf(g, p);
        CHECK(rep.micro_precision == 0.0);
        CHECK(rep.micro_recall == 0.0);
        CHECK(rep.micro_f1 == 0.0);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(compute_prf({{}}, {}), std::invalid_argument);
    }
    SUBCASE("type predicted but absent from gold joins micro only") {
        std::vector<std::vector<EntitySpan>> g = {spans({{"X", 0, 1}})};
        std::vector<std::vector<EntitySpan>> p = {spans({{"X", 0, 1}, {"Z", 2, 3}})};
        auto rep = compute_prf(g, p);
        CHECK(rep.micro_precision == 0.5);
        CHECK(rep.macro_precision == 1.0);  // only X counts for macro
        CHECK(rep.macro_recall == 1.0);
    }
}

TEST_CASE("metrics oracle on random tag pairs") {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<std::vector<std::string>> gold, pred;
        const int nsent = 1 + rep % 4;
        for (int s = 0; s < nsent; ++s) {
            const int len = 1 + static_cast<int>(rng() % 10);
            gold.push_back(random_tags(rng, len));
            pred.push_back(random_tags(rng, len));
        }
        auto rep_eval = evaluate_tags(gold, pred);

        // brute-force set-intersection oracle
        long long tp = 0, ng = 0, np = 0;
        std::map<std::string, std::array<long long, 3>> per;  // tp, gold, pred
        for (std::size_t s = 0; s < gold.size(); ++s) {
            auto gs = span_set(extract_spans(gold[s]));
            auto ps = span_set(extract_spans(pred[s]));
            ng += static_cast<long long>(gs.size());
            np += static_cast<long long>(ps.size());
            for (const auto& sp : gs) per[std::get<0>(sp)][1]++;
            for (const auto& sp : ps) {
                per[std::get<0>(sp)][2]++;
                if (gs.count(sp)) {
                    ++tp;
                    per[std::get<0>(sp)][0]++;
                }
            }
        }
        const double mp = np ? double(tp) / np : 0.0;
        const double mr = ng ? double(tp) / ng : 0.0;
        CHECK(rep_eval.micro_precision == mp);
        CHECK(rep_eval.micro_recall == mr);
        CHECK(rep_eval.micro_f1 == (mp + mr > 0 ? 2 * mp * mr / (mp + mr) : 0.0));
        CHECK(rep_eval.tp_total == tp);

        double macro_f1 = 0;
        int types_in_gold = 0;
        for (const auto& [t, c] : per) {
            if (c[1] == 0) continue;
            const double p = c[2] ? double(c[0]) / c[2] : 0.0;
            const double r = double(c[0]) / c[1];
            macro_f1 += (p + r > 0 ? 2 * p * r / (p + r) : 0.0);
            ++types_in_gold;
        }
        if (types_in_gold) macro_f1 /= types_in_gold;
        CHECK(rep_eval.macro_f1 == doctest::Approx(macro_f1).epsilon(1e-12));

        // swap symmetry: precision and recall exchange, F1 invariant
        auto swapped = evaluate_tags(pred, gold);
        CHECK(swapped.micro_precision == rep_eval.micro_recall);
        CHECK(swapped.micro_recall == rep_eval.micro_precision);
        CHECK(swapped.micro_f1 == doctest::Approx(rep_eval.micro_f1).epsilon(1e-12));

        // micro TP equals the sum of per-type TPs
        long long tp_sum = 0;
        for (const auto& [t, c] : per) tp_sum += c[0];
        CHECK(tp_sum == rep_eval.tp_total);
    }
}

TEST_CASE("report serialization") {
    std::vector<std::vector<EntitySpan>> g = {spans({{"X", 0, 2}})};
    auto rep = compute_prf(g, g);
    auto js = rep.to_json();
    // fixed key order
    CHECK(js.find("\"per_type\"") < js.find("\"micro\""));
    CHECK(js.find("\"micro\"") < js.find("\"macro\""));
    CHECK(js.find("\"macro\"") < js.find("\"counts\""));
    auto table = rep.to_table();
    CHECK(table.find("micro") != std::string::npos);
    CHECK(table.find("X") != std::string::npos);
}
