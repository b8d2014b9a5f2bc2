#include "hner/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hner {

void EncoderConfig::validate() const {
    if (num_layers < 0 || hidden_dim <= 0 || num_heads <= 0 || ffn_dim <= 0 ||
        max_positions <= 0 || vocab_size <= 0)
        throw std::invalid_argument("encoder config: fields must be positive");
    if (hidden_dim % num_heads != 0)
        throw std::invalid_argument("encoder config: hidden_dim not divisible by num_heads");
}

WordLayerKind word_layer_kind_from_string(const std::string& s) {
    if (s == "transformer") return WordLayerKind::transformer;
    if (s == "bilstm" || s == "lstm") return WordLayerKind::bilstm;
    if (s == "none") return WordLayerKind::none;
    throw std::invalid_argument("unknown word layer kind: " + s);
}

std::string to_string(WordLayerKind k) {
    switch (k) {
        case WordLayerKind::transformer: return "transformer";
        case WordLayerKind::bilstm: return "bilstm";
        case WordLayerKind::none: return "none";
    }
    return "?";
}

TensorPtr ParameterStore::add(const std::string& name, std::vector<int> shape) {
    if (has(name)) throw std::invalid_argument("duplicate parameter: " + name);
    auto t = make_tensor(std::move(shape));
    t->requires_grad = true;
    items_.emplace_back(name, t);
    return t;
}

TensorPtr ParameterStore::get(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw std::out_of_range("no such parameter: " + name);
}

bool ParameterStore::has(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

long long ParameterStore::scalar_count() const {
    long long n = 0;
    for (const auto& [name, t] : items_) n += static_cast<long long>(t->size());
    return n;
}

std::vector<TensorPtr> ParameterStore::tensors() const {
    std::vector<TensorPtr> out;
    out.reserve(items_.size());
    for (const auto& [n, t] : items_) out.push_back(t);
    return out;
}

long long count_parameters(const ParameterStore& params) { return params.scalar_count(); }

namespace {

void init_normal(const TensorPtr& t, std::mt19937_64& rng, double stddev = 0.02) {
    std::normal_distribution<double> d(0.0, stddev);
    for (double& v : t->data) v = d(rng);
}

void add_encoder_layer_params(ParameterStore& ps, const std::string& prefix, int d, int f,
                              std::mt19937_64& rng) {
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
        init_normal(ps.add(prefix + w, {d, d}), rng);
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
        ps.add(prefix + b, {1, d});
    for (const char* ln : {"ln1", "ln2"}) {
        auto g = ps.add(prefix + ln + std::string(".gamma"), {1, d});
        std::fill(g->data.begin(), g->data.end(), 1.0);
        ps.add(prefix + ln + std::string(".beta"), {1, d});
    }
    init_normal(ps.add(prefix + "ffn.w1", {d, f}), rng);
    ps.add(prefix + "ffn.b1", {1, f});
    init_normal(ps.add(prefix + "ffn.w2", {f, d}), rng);
    ps.add(prefix + "ffn.b2", {1, d});
}

}  // namespace

Model::Model(EncoderConfig enc, WordLayerConfig word, int num_labels, std::mt19937_64& rng)
    : enc_(enc), word_(word), num_labels_(num_labels) {
    enc_.validate();
    if (num_labels_ <= 0) throw std::invalid_argument("model: num_labels must be positive");
    const int d = enc_.hidden_dim;
    if (word_.hidden_dim != d)
        throw std::invalid_argument("model: word layer dim must match encoder dim");

    init_normal(params_.add("embed.token", {enc_.vocab_size, d}), rng);
    init_normal(params_.add("embed.pos", {enc_.max_positions, d}), rng);
    for (int i = 0; i < enc_.num_layers; ++i)
        add_encoder_layer_params(params_, "enc." + std::to_string(i) + ".", d, enc_.ffn_dim, rng);

    switch (word_.kind) {
        case WordLayerKind::transformer:
            if (d % word_.num_heads != 0)
                throw std::invalid_argument("word layer: dim not divisible by heads");
            add_encoder_layer_params(params_, "word.", d, enc_.ffn_dim, rng);
            break;
        case WordLayerKind::bilstm: {
            if (d % 2 != 0)
                throw std::invalid_argument("word layer: bilstm needs an even dim");
            const int h = d / 2;
            for (const char* dir : {"word.fwd.", "word.bwd."}) {
                init_normal(params_.add(std::string(dir) + "w", {d, 4 * h}), rng);
                init_normal(params_.add(std::string(dir) + "u", {h, 4 * h}), rng);
                params_.add(std::string(dir) + "b", {1, 4 * h});
            }
            break;
        }
        case WordLayerKind::none:
            break;
    }

    init_normal(params_.add("proj.w", {d, num_labels_}), rng);
    params_.add("proj.b", {1, num_labels_});

    init_normal(params_.add("crf.trans", {num_labels_, num_labels_}), rng);
    init_normal(params_.add("crf.start", {1, num_labels_}), rng);
    init_normal(params_.add("crf.end", {1, num_labels_}), rng);
}

TensorPtr Model::encoder_layer(Tape* tape, const TensorPtr& x, const std::string& prefix,
                               int num_heads, int valid_len, bool train,
                               std::mt19937_64* rng) const {
    const int d = x->cols();
    const int dh = d / num_heads;
    auto p = [&](const char* n) { return params_.get(prefix + n); };

    auto q = linear(tape, x, p("attn.wq"), p("attn.bq"));
    auto k = linear(tape, x, p("attn.wk"), p("attn.bk"));
    auto v = linear(tape, x, p("attn.wv"), p("attn.bv"));

    std::vector<TensorPtr> heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < num_heads; ++h) {
        auto qh = slice_cols(tape, q, h * dh, dh);
        auto kh = slice_cols(tape, k, h * dh, dh);
        auto vh = slice_cols(tape, v, h * dh, dh);
        auto scores = scale(tape, matmul_nt(tape, qh, kh), inv_scale);
        auto probs = row_softmax(tape, scores, valid_len);
        if (train && dropout_rate > 0) probs = dropout(tape, probs, dropout_rate, *rng);
        heads.push_back(matmul(tape, probs, vh));
    }
    auto ctx = linear(tape, concat_cols(tape, heads), p("attn.wo"), p("attn.bo"));
    if (train && dropout_rate > 0) ctx = dropout(tape, ctx, dropout_rate, *rng);
    auto h1 = row_layer_norm(tape, add(tape, x, ctx), p("ln1.gamma"), p("ln1.beta"));

    auto ff = gelu_op(tape, linear(tape, h1, p("ffn.w1"), p("ffn.b1")));
    ff = linear(tape, ff, p("ffn.w2"), p("ffn.b2"));
    if (train && dropout_rate > 0) ff = dropout(tape, ff, dropout_rate, *rng);
    return row_layer_norm(tape, add(tape, h1, ff), p("ln2.gamma"), p("ln2.beta"));
}

TensorPtr Model::encode_subwords(Tape* tape, const std::vector<int>& ids, bool train,
                                 std::mt19937_64* rng) const {
    const int s = static_cast<int>(ids.size());
    if (s == 0) throw std::invalid_argument("encode_subwords: empty input");
    if (s > enc_.max_positions)
        throw std::invalid_argument("encode_subwords: sequence exceeds max_positions");
    int valid_len = s;
    for (int i = 0; i < s; ++i) {
        if (ids[i] < 0 || ids[i] >= enc_.vocab_size)
            throw std::out_of_range("encode_subwords: subword id out of range");
        if (ids[i] == Vocabulary::kPad) {
            valid_len = i;
            for (int j = i; j < s; ++j)
                if (ids[j] != Vocabulary::kPad)
                    throw std::invalid_argument("encode_subwords: PAD must be trailing");
            break;
        }
    }
    std::vector<int> pos(s);
    for (int i = 0; i < s; ++i) pos[i] = i;
    auto x = add(tape, gather_rows(tape, params_.get("embed.token"), ids),
                 gather_rows(tape, params_.get("embed.pos"), pos));
    for (int l = 0; l < enc_.num_layers; ++l)
        x = encoder_layer(tape, x, "enc." + std::to_string(l) + ".", enc_.num_heads,
                          valid_len, train, rng);
    return x;
}

TensorPtr Model::lstm_pass(Tape* tape, const TensorPtr& x, const std::string& prefix,
                           bool reverse) const {
    const int w = x->rows();
    const int h = x->cols() / 2;
    auto wi = params_.get(prefix + "w");
    auto wu = params_.get(prefix + "u");
    auto wb = params_.get(prefix + "b");

    auto hs = std::vector<TensorPtr>(w);
    TensorPtr hprev = make_tensor({1, h});
    TensorPtr cprev = make_tensor({1, h});
    for (int step = 0; step < w; ++step) {
        const int tpos = reverse ? w - 1 - step : step;
        auto xt = gather_rows(tape, x, {tpos});
        auto gates = add(tape, linear(tape, xt, wi, wb), matmul(tape, hprev, wu));
        auto ig = sigmoid_op(tape, slice_cols(tape, gates, 0, h));
        auto fg = sigmoid_op(tape, slice_cols(tape, gates, h, h));
        auto gg = tanh_op(tape, slice_cols(tape, gates, 2 * h, h));
        auto og = sigmoid_op(tape, slice_cols(tape, gates, 3 * h, h));
        auto c = add(tape, mul(tape, fg, cprev), mul(tape, ig, gg));
        auto ht = mul(tape, og, tanh_op(tape, c));
        hs[tpos] = ht;
        hprev = ht;
        cprev = c;
    }
    return stack_rows(tape, hs);
}

TensorPtr Model::word_interaction(Tape* tape, const TensorPtr& hw, bool train,
                                  std::mt19937_64* rng) const {
    if (hw->cols() != word_.hidden_dim)
        throw std::invalid_argument("word_interaction: dim mismatch");
    switch (word_.kind) {
        case WordLayerKind::transformer:
            // no extra position signal; inputs are already position-contextualized
            return encoder_layer(tape, hw, "word.", word_.num_heads, hw->rows(), train, rng);
        case WordLayerKind::bilstm:
            return concat_cols(tape, {lstm_pass(tape, hw, "word.fwd.", false),
                                      lstm_pass(tape, hw, "word.bwd.", true)});
        case WordLayerKind::none:
            return hw;
    }
    throw std::logic_error("unreachable");
}

TensorPtr Model::project_to_labels(Tape* tape, const TensorPtr& hw) const {
    if (hw->cols() != enc_.hidden_dim)
        throw std::invalid_argument("project_to_labels: dim mismatch");
    return linear(tape, hw, params_.get("proj.w"), params_.get("proj.b"));
}

TensorPtr Model::emissions(Tape* tape, const TokenizedSentence& sent, bool train,
                           std::mt19937_64* rng) const {
    auto h = encode_subwords(tape, sent.subword_ids, train, rng);
    auto hw = gather_first_subtokens(tape, h, sent.word_first_index);
    return project_to_labels(tape, word_interaction(tape, hw, train, rng));
}

TensorPtr gather_first_subtokens(Tape* tape, const TensorPtr& h,
                                 const std::vector<int>& word_first_index) {
    return gather_rows(tape, h, word_first_index);
}

}  // namespace hner
