#pragma once

#include <random>
#include <string>
#include <vector>

#include "hner/tensor.hpp"
#include "hner/tokenizer.hpp"

namespace hner {

struct EncoderConfig {
    int num_layers = 2;
    int hidden_dim = 64;
    int num_heads = 4;
    int ffn_dim = 128;
    int max_positions = 128;
    int vocab_size = 0;

    void validate() const;
};

enum class WordLayerKind { transformer, bilstm, none };

struct WordLayerConfig {
    WordLayerKind kind = WordLayerKind::transformer;
    int hidden_dim = 64;
    int num_heads = 4;
};

WordLayerKind word_layer_kind_from_string(const std::string& s);
std::string to_string(WordLayerKind k);

// Named trainable tensors in creation order. The order is the contract for
// the optimizer, EMA shadow and checkpoint layout.
class ParameterStore {
public:
    TensorPtr add(const std::string& name, std::vector<int> shape);
    TensorPtr get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::pair<std::string, TensorPtr>>& items() const { return items_; }
    std::size_t tensor_count() const { return items_.size(); }
    long long scalar_count() const;
    std::vector<TensorPtr> tensors() const;

private:
    std::vector<std::pair<std::string, TensorPtr>> items_;
};

// Subword encoder -> first-subtoken gather -> word interaction -> label scores.
// CRF transition/boundary scores live in the same store under crf.*.
class Model {
public:
    Model(EncoderConfig enc, WordLayerConfig word, int num_labels, std::mt19937_64& rng);

    const EncoderConfig& encoder_config() const { return enc_; }
    const WordLayerConfig& word_config() const { return word_; }
    int num_labels() const { return num_labels_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    double dropout_rate = 0.1;

    // [S x d]; PAD ids must be trailing and are masked out of attention.
    TensorPtr encode_subwords(Tape* tape, const std::vector<int>& ids, bool train = false,
                              std::mt19937_64* rng = nullptr) const;
    TensorPtr word_interaction(Tape* tape, const TensorPtr& hw, bool train = false,
                               std::mt19937_64* rng = nullptr) const;
    TensorPtr project_to_labels(Tape* tape, const TensorPtr& hw) const;
    // full pipeline to [W x L] emissions
    TensorPtr emissions(Tape* tape, const TokenizedSentence& sent, bool train = false,
                        std::mt19937_64* rng = nullptr) const;

private:
    TensorPtr encoder_layer(Tape* tape, const TensorPtr& x, const std::string& prefix,
                            int num_heads, int valid_len, bool train,
                            std::mt19937_64* rng) const;
    TensorPtr lstm_pass(Tape* tape, const TensorPtr& x, const std::string& prefix,
                        bool reverse) const;

    EncoderConfig enc_;
    WordLayerConfig word_;
    int num_labels_;
    ParameterStore params_;
};

TensorPtr gather_first_subtokens(Tape* tape, const TensorPtr& h,
                                 const std::vector<int>& word_first_index);

long long count_parameters(const ParameterStore& params);

}  // namespace hner
