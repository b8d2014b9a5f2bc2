#include "hner/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hner {

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
    if (ema_enabled && (ema_lambda < 0 || ema_lambda >= 1))
        throw std::invalid_argument("train config: ema_lambda must be in [0,1) when enabled");
    if (dropout < 0 || dropout >= 1)
        throw std::invalid_argument("train config: dropout must be in [0,1)");
}

OptimizerState OptimizerState::for_params(const ParameterStore& params) {
    OptimizerState st;
    for (const auto& [name, t] : params.items()) {
        st.m.emplace_back(t->size(), 0.0);
        st.v.emplace_back(t->size(), 0.0);
    }
    return st;
}

void adam_step(ParameterStore& params, OptimizerState& state, double lr,
               std::optional<double> grad_clip_norm) {
    const auto& items = params.items();
    if (state.m.size() != items.size())
        throw std::invalid_argument("adam_step: state does not match parameter store");

    double clip_scale = 1.0;
    if (grad_clip_norm) {
        double sq = 0.0;
        for (const auto& [name, t] : items) {
            t->ensure_grad();
            for (double g : t->grad) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > *grad_clip_norm && norm > 0) clip_scale = *grad_clip_norm / norm;
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& [name, t] = items[k];
        t->ensure_grad();
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double g = t->grad[i] * clip_scale;
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in " + name);
            state.m[k][i] = state.beta1 * state.m[k][i] + (1 - state.beta1) * g;
            state.v[k][i] = state.beta2 * state.v[k][i] + (1 - state.beta2) * g * g;
            const double mhat = state.m[k][i] / bc1;
            const double vhat = state.v[k][i] / bc2;
            t->data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

EmaState EmaState::init(const ParameterStore& params, double lambda) {
    EmaState e;
    e.lambda = lambda;
    for (const auto& [name, t] : params.items()) e.shadow.push_back(t->data);
    return e;
}

void ema_update(EmaState& ema, const ParameterStore& params) {
    const auto& items = params.items();
    if (ema.shadow.size() != items.size())
        throw std::invalid_argument("ema_update: shadow does not match parameter store");
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& t = items[k].second;
        if (ema.shadow[k].size() != t->size())
            throw std::invalid_argument("ema_update: shape mismatch for " + items[k].first);
        for (std::size_t i = 0; i < t->size(); ++i)
            ema.shadow[k][i] = ema.lambda * ema.shadow[k][i] + (1 - ema.lambda) * t->data[i];
    }
    ema.step += 1;
}

Snapshot snapshot_params(const ParameterStore& params) {
    Snapshot s;
    for (const auto& [name, t] : params.items()) s[name] = t->data;
    return s;
}

Snapshot snapshot_ema(const ParameterStore& params, const EmaState& ema) {
    Snapshot s;
    const auto& items = params.items();
    for (std::size_t k = 0; k < items.size(); ++k) s[items[k].first] = ema.shadow[k];
    return s;
}

void restore_params(ParameterStore& params, const Snapshot& snap) {
    for (const auto& [name, t] : params.items()) {
        auto it = snap.find(name);
        if (it == snap.end()) throw std::invalid_argument("restore_params: missing " + name);
        if (it->second.size() != t->size())
            throw std::invalid_argument("restore_params: size mismatch for " + name);
        t->data = it->second;
    }
}

std::vector<EncodedExample> encode_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                          const LabelScheme& scheme) {
    std::vector<EncodedExample> out;
    out.reserve(corpus.sentences.size());
    for (const auto& s : corpus.sentences) {
        EncodedExample ex;
        ex.sent = tokenize_sentence(s.words, vocab);
        for (const auto& tag : s.tags) ex.label_ids.push_back(scheme.id_of(tag));
        out.push_back(std::move(ex));
    }
    return out;
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), opt_(OptimizerState::for_params(model.params())),
      ema_(EmaState::init(model.params(), cfg.ema_lambda)),
      shuffle_rng_(cfg.seed), dropout_rng_(cfg.seed ^ 0x9e3779b97f4a7c15ull) {
    cfg_.validate();
    model_.dropout_rate = cfg_.dropout;
}

CrfParameters Trainer::crf() const {
    const auto& p = model_.params();
    return {p.get("crf.trans"), p.get("crf.start"), p.get("crf.end")};
}

EpochSummary Trainer::train_epoch(const std::vector<EncodedExample>& data) {
    if (data.empty()) throw std::invalid_argument("train_epoch: empty training data");
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // seeded Fisher-Yates
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> u(0, i - 1);
        std::swap(order[i - 1], order[u(shuffle_rng_)]);
    }

    const ConstraintMask* mask_ptr = nullptr;
    ConstraintMask mask;  // only built for masked training
    LabelScheme scheme_for_mask({});
    if (cfg_.masked_training) {
        const int l = model_.num_labels();
        std::vector<std::string> types;
        for (int t = 0; t < (l - 1) / 2; ++t) types.push_back("T" + std::to_string(t));
        scheme_for_mask = LabelScheme(types);
        mask = build_constraint_mask(scheme_for_mask);
        mask_ptr = &mask;
    }

    EpochSummary sum;
    sum.epoch = ++epoch_;
    double total_loss = 0;
    long long total_sents = 0;
    auto crf_params = crf();

    for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        const std::size_t end = std::min(begin + cfg_.batch_size, order.size());
        Tape tape;
        std::vector<TensorPtr> losses;
        for (std::size_t b = begin; b < end; ++b) {
            const auto& ex = data[order[b]];
            auto em = model_.emissions(&tape, ex.sent, cfg_.dropout > 0, &dropout_rng_);
            losses.push_back(nll_loss(&tape, em, crf_params, ex.label_ids, mask_ptr));
        }
        TensorPtr batch_loss = losses[0];
        for (std::size_t i = 1; i < losses.size(); ++i)
            batch_loss = add(&tape, batch_loss, losses[i]);
        batch_loss = scale(&tape, batch_loss, 1.0 / static_cast<double>(losses.size()));
        if (!std::isfinite(batch_loss->data[0]))
            throw std::runtime_error("train_epoch: non-finite loss in epoch " +
                                     std::to_string(sum.epoch));

        for (const auto& [name, t] : model_.params().items()) t->zero_grad();
        backward(batch_loss, tape);
        adam_step(model_.params(), opt_, cfg_.learning_rate, cfg_.grad_clip_norm);
        if (cfg_.ema_enabled) ema_update(ema_, model_.params());

        total_loss += batch_loss->data[0] * static_cast<double>(losses.size());
        total_sents += static_cast<long long>(losses.size());
        sum.batches += 1;
    }
    sum.train_loss = total_loss / static_cast<double>(total_sents);
    return sum;
}

std::vector<int> Trainer::predict(const TokenizedSentence& sent,
                                  const ConstraintMask& mask) const {
    auto em = model_.emissions(nullptr, sent, false, nullptr);
    return viterbi_decode(*em, crf(), mask).first;
}

EvalReport Trainer::evaluate(const std::vector<EncodedExample>& data,
                             const LabelScheme& scheme, const ConstraintMask& mask) const {
    std::vector<std::vector<std::string>> gold, pred;
    for (const auto& ex : data) {
        std::vector<std::string> g, p;
        for (int y : ex.label_ids) g.push_back(scheme.label(y));
        for (int y : predict(ex.sent, mask)) p.push_back(scheme.label(y));
        gold.push_back(std::move(g));
        pred.push_back(std::move(p));
    }
    return evaluate_tags(gold, pred);
}

EvalReport Trainer::evaluate_ema(const std::vector<EncodedExample>& data,
                                 const LabelScheme& scheme, const ConstraintMask& mask) {
    auto live = snapshot_params(model_.params());
    restore_params(model_.params(), snapshot_ema(model_.params(), ema_));
    auto rep = evaluate(data, scheme, mask);
    restore_params(model_.params(), live);
    return rep;
}

const CheckpointEntry& select_checkpoint(const std::vector<CheckpointEntry>& history) {
    if (history.empty()) throw std::invalid_argument("select_checkpoint: empty history");
    const CheckpointEntry* best = &history[0];
    for (const auto& e : history)
        if (e.dev_f1 > best->dev_f1) best = &e;  // ties keep the earliest
    return *best;
}

}  // namespace hner
