#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hner/crf.hpp"
#include "hner/data.hpp"
#include "hner/metrics.hpp"
#include "hner/model.hpp"

namespace hner {

struct TrainConfig {
    double learning_rate = 3e-5;
    int batch_size = 4;
    int max_epochs = 25;
    double ema_lambda = 0.99;
    bool ema_enabled = true;
    unsigned long long seed = 42;
    std::optional<double> grad_clip_norm;
    double dropout = 0.1;
    bool masked_training = false;

    void validate() const;
};

struct OptimizerState {
    std::vector<std::vector<double>> m, v;  // per parameter tensor
    long long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static OptimizerState for_params(const ParameterStore& params);
};

// Bias-corrected Adam. Throws on a non-finite gradient, naming the parameter.
void adam_step(ParameterStore& params, OptimizerState& state, double lr,
               std::optional<double> grad_clip_norm = std::nullopt);

struct EmaState {
    std::vector<std::vector<double>> shadow;
    double lambda = 0.99;
    long long step = 0;

    static EmaState init(const ParameterStore& params, double lambda);
};

// shadow <- lambda*shadow + (1-lambda)*params
void ema_update(EmaState& ema, const ParameterStore& params);

// Named snapshot of all parameter values.
using Snapshot = std::map<std::string, std::vector<double>>;
Snapshot snapshot_params(const ParameterStore& params);
Snapshot snapshot_ema(const ParameterStore& params, const EmaState& ema);
void restore_params(ParameterStore& params, const Snapshot& snap);

struct EpochSummary {
    int epoch = 0;
    double train_loss = 0;
    int batches = 0;
};

// Sentences pre-encoded against a vocabulary and label scheme.
struct EncodedExample {
    TokenizedSentence sent;
    std::vector<int> label_ids;
};

std::vector<EncodedExample> encode_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                          const LabelScheme& scheme);

class Trainer {
public:
    Trainer(Model& model, const TrainConfig& cfg);

    // Seeded-shuffle batches; per batch: mean NLL -> backward -> adam -> ema.
    EpochSummary train_epoch(const std::vector<EncodedExample>& data);

    // Decode with the current live parameters.
    std::vector<int> predict(const TokenizedSentence& sent, const ConstraintMask& mask) const;
    EvalReport evaluate(const std::vector<EncodedExample>& data, const LabelScheme& scheme,
                        const ConstraintMask& mask) const;
    // Evaluate with EMA shadow parameters swapped in.
    EvalReport evaluate_ema(const std::vector<EncodedExample>& data, const LabelScheme& scheme,
                            const ConstraintMask& mask);

    Model& model() { return model_; }
    OptimizerState& optimizer() { return opt_; }
    EmaState& ema() { return ema_; }
    const TrainConfig& config() const { return cfg_; }
    CrfParameters crf() const;

private:
    Model& model_;
    TrainConfig cfg_;
    OptimizerState opt_;
    EmaState ema_;
    std::mt19937_64 shuffle_rng_;
    std::mt19937_64 dropout_rng_;
    int epoch_ = 0;
};

struct CheckpointEntry {
    int epoch = 0;
    double dev_f1 = 0;
    Snapshot snapshot;
};

// Max dev F1; ties resolved to the earliest epoch. Throws on empty history.
const CheckpointEntry& select_checkpoint(const std::vector<CheckpointEntry>& history);

}  // namespace hner
