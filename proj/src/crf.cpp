#include "hner/crf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hner {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Large finite penalty for masked training; keeps gradients finite.
constexpr double kMaskPenalty = -1e30;
}

LabelScheme::LabelScheme(std::vector<std::string> entity_types)
    : types_(std::move(entity_types)) {
    labels_.push_back("O");
    for (const auto& t : types_) {
        if (t.empty()) throw std::invalid_argument("label scheme: empty entity type");
        labels_.push_back("B-" + t);
        labels_.push_back("I-" + t);
    }
}

int LabelScheme::id_of(const std::string& label) const {
    for (int i = 0; i < num_labels(); ++i)
        if (labels_[i] == label) return i;
    throw std::invalid_argument("unknown label: " + label);
}

ConstraintMask build_constraint_mask(const LabelScheme& scheme) {
    const int l = scheme.num_labels();
    ConstraintMask m;
    m.allowed_transition.assign(l, std::vector<bool>(l, true));
    m.allowed_start.assign(l, true);
    m.allowed_end.assign(l, true);
    for (int j = 0; j < l; ++j) {
        if (!scheme.is_inside(j)) continue;
        m.allowed_start[j] = false;
        for (int i = 0; i < l; ++i)
            if (scheme.type_of(i) != scheme.type_of(j)) m.allowed_transition[i][j] = false;
    }
    return m;
}

namespace {

void check_labels(const Tensor& emissions, const CrfParameters& crf,
                  const std::vector<int>& labels) {
    const int w = emissions.rows(), l = emissions.cols();
    if (l != crf.num_labels())
        throw std::invalid_argument("crf: emission width does not match label count");
    if (static_cast<int>(labels.size()) != w)
        throw std::invalid_argument("crf: label sequence length mismatch");
    for (int y : labels)
        if (y < 0 || y >= l) throw std::out_of_range("crf: label id out of range");
}

}  // namespace

double score_sequence(const Tensor& emissions, const CrfParameters& crf,
                      const std::vector<int>& labels) {
    check_labels(emissions, crf, labels);
    const int w = emissions.rows();
    double s = crf.start_scores->data[labels[0]];
    for (int t = 0; t < w; ++t) s += emissions.at(t, labels[t]);
    for (int t = 0; t + 1 < w; ++t) s += crf.transitions->at(labels[t], labels[t + 1]);
    s += crf.end_scores->data[labels[w - 1]];
    return s;
}

TensorPtr gold_score(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                     const std::vector<int>& labels) {
    check_labels(*emissions, crf, labels);
    const int w = emissions->rows();
    auto out = make_tensor({1, 1});
    out->data[0] = score_sequence(*emissions, crf, labels);
    if (tape) {
        auto trans = crf.transitions;
        auto start = crf.start_scores;
        auto end = crf.end_scores;
        auto ys = labels;
        tape->record(out, [emissions, trans, start, end, out, ys, w]() {
            emissions->ensure_grad();
            trans->ensure_grad();
            start->ensure_grad();
            end->ensure_grad();
            const double g = out->grad[0];
            start->grad[ys[0]] += g;
            for (int t = 0; t < w; ++t) emissions->gat(t, ys[t]) += g;
            for (int t = 0; t + 1 < w; ++t) trans->gat(ys[t], ys[t + 1]) += g;
            end->grad[ys[w - 1]] += g;
        });
    }
    return out;
}

TensorPtr log_partition(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                        const ConstraintMask* mask) {
    const int w = emissions->rows(), l = emissions->cols();
    if (w < 1) throw std::invalid_argument("log_partition: empty sequence");
    if (l != crf.num_labels())
        throw std::invalid_argument("log_partition: emission width mismatch");

    // Mask penalties live in constant (non-learned) tensors.
    TensorPtr start_pen, trans_pen;
    if (mask) {
        start_pen = make_tensor({1, l});
        trans_pen = make_tensor({l, l});
        for (int j = 0; j < l; ++j)
            start_pen->data[j] = mask->allowed_start[j] ? 0.0 : kMaskPenalty;
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j)
                trans_pen->at(i, j) = mask->allowed_transition[i][j] ? 0.0 : kMaskPenalty;
    }

    auto alpha = add(tape, crf.start_scores, gather_rows(tape, emissions, {0}));
    if (mask) alpha = add(tape, alpha, start_pen);
    for (int t = 1; t < w; ++t) {
        auto scores = bcast_add_col(tape, crf.transitions, alpha);
        if (mask) scores = add(tape, scores, trans_pen);
        alpha = add(tape, logsumexp_cols(tape, scores), gather_rows(tape, emissions, {t}));
    }
    alpha = add(tape, alpha, crf.end_scores);
    return logsumexp_all(tape, alpha);
}

double log_partition_value(const Tensor& emissions, const CrfParameters& crf) {
    auto e = std::make_shared<Tensor>(emissions);
    return log_partition(nullptr, e, crf)->data[0];
}

TensorPtr nll_loss(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                   const std::vector<int>& gold_labels, const ConstraintMask* mask) {
    auto z = log_partition(tape, emissions, crf, mask);
    auto g = gold_score(tape, emissions, crf, gold_labels);
    return sub(tape, z, g);
}

std::pair<std::vector<int>, double> viterbi_decode(const Tensor& emissions,
                                                   const CrfParameters& crf,
                                                   const ConstraintMask& mask) {
    const int w = emissions.rows(), l = emissions.cols();
    if (w < 1) throw std::invalid_argument("viterbi_decode: empty sequence");
    if (l != crf.num_labels())
        throw std::invalid_argument("viterbi_decode: emission width mismatch");

    std::vector<double> score(l), next(l);
    std::vector<std::vector<int>> back(w, std::vector<int>(l, 0));
    for (int j = 0; j < l; ++j)
        score[j] = mask.allowed_start[j]
                       ? crf.start_scores->data[j] + emissions.at(0, j)
                       : kNegInf;

    for (int t = 1; t < w; ++t) {
        for (int j = 0; j < l; ++j) {
            double best = kNegInf;
            int best_i = 0;
            for (int i = 0; i < l; ++i) {
                if (!mask.allowed_transition[i][j] || score[i] == kNegInf) continue;
                const double s = score[i] + crf.transitions->at(i, j);
                if (s > best) {  // strict: lowest predecessor id wins ties
                    best = s;
                    best_i = i;
                }
            }
            next[j] = best == kNegInf ? kNegInf : best + emissions.at(t, j);
            back[t][j] = best_i;
        }
        score = next;
    }

    double best = kNegInf;
    int best_j = 0;
    for (int j = 0; j < l; ++j) {
        if (!mask.allowed_end[j] || score[j] == kNegInf) continue;
        const double s = score[j] + crf.end_scores->data[j];
        if (s > best) {
            best = s;
            best_j = j;
        }
    }

    std::vector<int> path(w);
    path[w - 1] = best_j;
    for (int t = w - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
    return {path, best};
}

}  // namespace hner
