#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hner/tensor.hpp"

namespace hner {

// BIO tag inventory: O (id 0), then B-t / I-t per entity type.
class LabelScheme {
public:
    explicit LabelScheme(std::vector<std::string> entity_types);

    int num_labels() const { return static_cast<int>(labels_.size()); }
    int num_types() const { return static_cast<int>(types_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<std::string>& entity_types() const { return types_; }
    const std::string& label(int id) const { return labels_.at(id); }
    int id_of(const std::string& label) const;  // throws on unknown

    bool is_begin(int id) const { return id > 0 && id % 2 == 1; }
    bool is_inside(int id) const { return id > 0 && id % 2 == 0; }
    // entity type index of a B/I label, -1 for O
    int type_of(int id) const { return id == 0 ? -1 : (id - 1) / 2; }

private:
    std::vector<std::string> types_;
    std::vector<std::string> labels_;
};

struct CrfParameters {
    TensorPtr transitions;  // [L x L], score of j following i
    TensorPtr start_scores; // [1 x L]
    TensorPtr end_scores;   // [1 x L]

    int num_labels() const { return start_scores->cols(); }
};

struct ConstraintMask {
    std::vector<std::vector<bool>> allowed_transition;
    std::vector<bool> allowed_start;
    std::vector<bool> allowed_end;
};

// Transition i->j is disallowed iff j is I-t and i is neither B-t nor I-t;
// start->I-t is disallowed; all ends are allowed.
ConstraintMask build_constraint_mask(const LabelScheme& scheme);

// start + emissions along the path + transitions + end, as plain doubles.
double score_sequence(const Tensor& emissions, const CrfParameters& crf,
                      const std::vector<int>& labels);

// Differentiable gold-path score.
TensorPtr gold_score(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                     const std::vector<int>& labels);

// Forward recursion over all label paths (all paths when mask is null,
// mask-valid paths otherwise).
TensorPtr log_partition(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                        const ConstraintMask* mask = nullptr);
double log_partition_value(const Tensor& emissions, const CrfParameters& crf);

TensorPtr nll_loss(Tape* tape, const TensorPtr& emissions, const CrfParameters& crf,
                   const std::vector<int>& gold_labels, const ConstraintMask* mask = nullptr);

// Best mask-valid path; ties broken by lowest label id.
std::pair<std::vector<int>, double> viterbi_decode(const Tensor& emissions,
                                                   const CrfParameters& crf,
                                                   const ConstraintMask& mask);

}  // namespace hner
