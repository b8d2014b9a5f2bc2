#include "hner/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hner/crf.hpp"

namespace hner {

GradCheckResult gradcheck_model(unsigned long long seed, double eps, WordLayerKind kind) {
    std::mt19937_64 rng(seed);
    EncoderConfig enc;
    enc.num_layers = 1;
    enc.hidden_dim = 8;
    enc.num_heads = 2;
    enc.ffn_dim = 16;
    enc.max_positions = 8;
    enc.vocab_size = 10;
    WordLayerConfig word{kind, 8, 2};
    const int num_labels = 2;
    Model model(enc, word, num_labels, rng);
    model.dropout_rate = 0.0;

    // 3 words over 5 subwords (ids 4..9 so PAD is never hit)
    TokenizedSentence sent;
    sent.words = {"a", "b", "c"};
    std::uniform_int_distribution<int> uid(4, enc.vocab_size - 1);
    for (int i = 0; i < 5; ++i) sent.subword_ids.push_back(uid(rng));
    sent.word_first_index = {0, 2, 3};
    std::uniform_int_distribution<int> ulab(0, num_labels - 1);
    std::vector<int> gold = {ulab(rng), ulab(rng), ulab(rng)};

    CrfParameters crf{model.params().get("crf.trans"), model.params().get("crf.start"),
                      model.params().get("crf.end")};
    auto loss_value = [&]() {
        auto em = model.emissions(nullptr, sent, false, nullptr);
        return nll_loss(nullptr, em, crf, gold)->data[0];
    };

    Tape tape;
    for (const auto& [name, t] : model.params().items()) t->zero_grad();
    auto em = model.emissions(&tape, sent, false, nullptr);
    auto loss = nll_loss(&tape, em, crf, gold);
    backward(loss, tape);

    GradCheckResult res;
    auto fd = finite_difference_gradient(loss_value, model.params().tensors(), eps);
    const auto& items = model.params().items();
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& [name, t] = items[k];
        t->ensure_grad();
        double worst = 0;
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double a = t->grad[i], b = fd[k][i];
            const double rel = std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
            worst = std::max(worst, rel);
        }
        res.groups.push_back({name, worst});
        res.max_rel_err = std::max(res.max_rel_err, worst);
    }
    return res;
}

}  // namespace hner
