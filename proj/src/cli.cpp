#include "hner/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hner/checkpoint.hpp"
#include "hner/config.hpp"
#include "hner/crf.hpp"
#include "hner/data.hpp"
#include "hner/gradcheck.hpp"
#include "hner/metrics.hpp"
#include "hner/model.hpp"
#include "hner/trainer.hpp"

namespace hner {

namespace {

using nlohmann::ordered_json;

Vocabulary make_vocab(const RunConfig& cfg, const Corpus& train_corpus) {
    if (!cfg.vocab_path.empty()) return Vocabulary::load(cfg.vocab_path);
    return Vocabulary::from_entries(build_vocabulary_entries(train_corpus));
}

LabelScheme merged_scheme(const Corpus& train_corpus, const Corpus* dev_corpus) {
    std::set<std::string> types(train_corpus.entity_types.begin(),
                                train_corpus.entity_types.end());
    if (dev_corpus)
        types.insert(dev_corpus->entity_types.begin(), dev_corpus->entity_types.end());
    return LabelScheme(std::vector<std::string>(types.begin(), types.end()));
}

struct TrainOutcome {
    Model model;
    OptimizerState opt;
    EmaState ema;
    LabelScheme scheme;
    Vocabulary vocab;
    int best_epoch = 0;
    double best_score = 0;
    long long parameters = 0;
    double final_dev_f1_live = 0;
    double final_dev_f1_ema = 0;
    bool has_dev = false;
};

TrainOutcome run_training(const RunConfig& cfg_in, const Corpus& train_corpus,
                          const Corpus* dev_corpus, std::ostream& log,
                          std::ostream* log_file) {
    RunConfig cfg = cfg_in;
    auto vocab = make_vocab(cfg, train_corpus);
    auto scheme = merged_scheme(train_corpus, dev_corpus);
    cfg.encoder.vocab_size = vocab.size();

    std::mt19937_64 init_rng(cfg.train.seed);
    Model model(cfg.encoder, cfg.word_layer, scheme.num_labels(), init_rng);
    Trainer trainer(model, cfg.train);
    auto mask = build_constraint_mask(scheme);

    auto train_data = encode_corpus(train_corpus, vocab, scheme);
    std::vector<EncodedExample> dev_data;
    if (dev_corpus) dev_data = encode_corpus(*dev_corpus, vocab, scheme);

    std::vector<CheckpointEntry> history;
    double last_live = 0, last_ema = 0;
    for (int epoch = 1; epoch <= cfg.train.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto sum = trainer.train_epoch(train_data);

        ordered_json line;
        line["epoch"] = sum.epoch;
        line["train_loss"] = sum.train_loss;
        CheckpointEntry entry;
        entry.epoch = sum.epoch;
        if (dev_corpus) {
            auto live = trainer.evaluate(dev_data, scheme, mask);
            line["dev_f1_live"] = last_live = live.micro_f1;
            if (cfg.train.ema_enabled) {
                auto emar = trainer.evaluate_ema(dev_data, scheme, mask);
                line["dev_f1_ema"] = last_ema = emar.micro_f1;
                entry.dev_f1 = emar.micro_f1;
            } else {
                line["dev_f1_ema"] = nullptr;
                entry.dev_f1 = live.micro_f1;
            }
        } else {
            // no dev split: select by training loss
            line["dev_f1_live"] = nullptr;
            line["dev_f1_ema"] = nullptr;
            entry.dev_f1 = -sum.train_loss;
        }
        entry.snapshot = cfg.train.ema_enabled
                             ? snapshot_ema(model.params(), trainer.ema())
                             : snapshot_params(model.params());
        history.push_back(std::move(entry));

        const auto t1 = std::chrono::steady_clock::now();
        line["seconds"] = std::chrono::duration<double>(t1 - t0).count();
        log << line.dump() << "\n";
        if (log_file) *log_file << line.dump() << "\n";
    }

    const auto& best = select_checkpoint(history);
    restore_params(model.params(), best.snapshot);

    TrainOutcome out{std::move(model), std::move(trainer.optimizer()),
                     std::move(trainer.ema()), scheme, vocab,
                     best.epoch, best.dev_f1, 0, last_live, last_ema,
                     dev_corpus != nullptr};
    out.parameters = count_parameters(out.model.params());
    return out;
}

void save_outcome(const std::string& path, const TrainOutcome& out, const RunConfig& cfg) {
    ordered_json meta;
    meta["best_epoch"] = out.best_epoch;
    meta["best_score"] = out.best_score;
    meta["seed"] = cfg.train.seed;
    meta["params_source"] = cfg.train.ema_enabled ? "ema" : "live";
    auto ckpt = make_checkpoint(out.model, &out.opt, &out.ema, out.scheme, out.vocab,
                                std::move(meta));
    save_checkpoint(path, ckpt);
}

struct LoadedModel {
    Model model;
    LabelScheme scheme;
    Vocabulary vocab;
};

LoadedModel load_model(const std::string& path, bool use_ema) {
    auto ckpt = load_checkpoint(path);
    auto r = read_model_configs(ckpt);
    std::mt19937_64 rng(0);
    Model model(r.enc, r.word, static_cast<int>(r.entity_types.size()) * 2 + 1, rng);
    if (use_ema) {
        EmaState ema = EmaState::init(model.params(), 0.99);
        load_into_model(ckpt, model, nullptr, &ema);
        restore_params(model.params(), snapshot_ema(model.params(), ema));
    } else {
        load_into_model(ckpt, model, nullptr, nullptr);
    }
    return {std::move(model), LabelScheme(r.entity_types),
            Vocabulary::from_entries(r.vocab_entries)};
}

std::vector<int> predict_sentence(const Model& model, const LabelScheme& scheme,
                                  const ConstraintMask& mask,
                                  const TokenizedSentence& sent) {
    auto em = model.emissions(nullptr, sent, false, nullptr);
    CrfParameters crf{model.params().get("crf.trans"), model.params().get("crf.start"),
                     model.params().get("crf.end")};
    return viterbi_decode(*em, crf, mask).first;
}

// token-per-line input for predict; the tag column is optional and ignored
std::vector<std::vector<std::string>> read_token_sentences(std::istream& in) {
    std::vector<std::vector<std::string>> sents;
    std::vector<std::string> cur;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) {
            if (!cur.empty()) sents.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        if (tok.rfind("-DOCSTART-", 0) == 0) continue;
        cur.push_back(tok);
    }
    if (!cur.empty()) sents.push_back(std::move(cur));
    return sents;
}

ordered_json report_json(const EvalReport& rep, const std::string& average) {
    ordered_json full = ordered_json::parse(rep.to_json());
    if (average == "both") return full;
    ordered_json j;
    j["per_type"] = full["per_type"];
    j[average] = full[average];
    j["counts"] = full["counts"];
    return j;
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_path,
              std::optional<unsigned long long> seed, bool repair,
              const std::string& log_path) {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults()
                                        : parse_config_file(config_path);
    if (seed) cfg.train.seed = *seed;
    auto train_corpus = parse_conll(train_path, repair);
    std::optional<Corpus> dev_corpus;
    if (!dev_path.empty()) dev_corpus = parse_conll(dev_path, repair);

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw DataError("cannot write log file: " + log_path);
    }
    auto out = run_training(cfg, train_corpus, dev_corpus ? &*dev_corpus : nullptr,
                            std::cout, log_file.is_open() ? &log_file : nullptr);
    std::cerr << "best epoch " << out.best_epoch << " (score " << out.best_score << ")\n";
    if (!out_path.empty()) save_outcome(out_path, out, cfg);
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& average, const std::string& params_kind, bool strict,
             bool repair) {
    auto lm = load_model(model_path, params_kind == "ema");
    auto corpus = parse_conll(data_path, repair);
    auto mask = build_constraint_mask(lm.scheme);

    std::vector<std::vector<std::string>> gold, pred;
    for (const auto& s : corpus.sentences) {
        auto sent = tokenize_sentence(s.words, lm.vocab);
        std::vector<std::string> p;
        for (int y : predict_sentence(lm.model, lm.scheme, mask, sent))
            p.push_back(lm.scheme.label(y));
        gold.push_back(s.tags);
        pred.push_back(std::move(p));
    }
    auto rep = evaluate_tags(gold, pred, strict);
    std::cout << report_json(rep, average).dump(2) << "\n" << rep.to_table();
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input_path,
                const std::string& output_path) {
    auto lm = load_model(model_path, false);
    std::ifstream in(input_path);
    if (!in) throw DataError("cannot open input: " + input_path);
    auto sents = read_token_sentences(in);
    if (sents.empty()) throw DataError(input_path + ": no sentences found");

    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!output_path.empty() && output_path != "-") {
        file_out.open(output_path);
        if (!file_out) throw DataError("cannot write output: " + output_path);
        out = &file_out;
    }
    auto mask = build_constraint_mask(lm.scheme);
    for (const auto& words : sents) {
        auto sent = tokenize_sentence(words, lm.vocab);
        auto ys = predict_sentence(lm.model, lm.scheme, mask, sent);
        for (std::size_t i = 0; i < words.size(); ++i)
            *out << words[i] << '\t' << lm.scheme.label(ys[i]) << '\n';
        *out << '\n';
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& train_path,
               const std::string& dev_path, const std::string& mode,
               const std::string& out_path, std::optional<unsigned long long> seed,
               bool repair) {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults()
                                        : parse_config_file(config_path);
    if (seed) cfg.train.seed = *seed;
    if (mode == "word") {
        cfg.word_layer.kind = WordLayerKind::transformer;
    } else if (mode == "subword") {
        // interaction at subword level: one extra encoder layer, matched count
        cfg.word_layer.kind = WordLayerKind::none;
        cfg.encoder.num_layers += 1;
    } else if (mode == "lstm") {
        cfg.word_layer.kind = WordLayerKind::bilstm;
    } else {
        throw DataError("unknown ablation mode: " + mode);
    }

    auto train_corpus = parse_conll(train_path, repair);
    std::optional<Corpus> dev_corpus;
    if (!dev_path.empty()) dev_corpus = parse_conll(dev_path, repair);

    std::ostringstream log_sink;
    auto out = run_training(cfg, train_corpus, dev_corpus ? &*dev_corpus : nullptr,
                            log_sink, nullptr);

    // F1 on the dev split when present, otherwise on the training split
    const Corpus& eval_corpus = dev_corpus ? *dev_corpus : train_corpus;
    auto mask = build_constraint_mask(out.scheme);
    auto data = encode_corpus(eval_corpus, out.vocab, out.scheme);
    Trainer scorer(out.model, cfg.train);
    auto rep = scorer.evaluate(data, out.scheme, mask);

    ordered_json j;
    j["mode"] = mode;
    j["parameters"] = out.parameters;
    j["best_epoch"] = out.best_epoch;
    j["eval_split"] = dev_corpus ? "dev" : "train";
    j["f1_micro"] = rep.micro_f1;
    j["f1_macro"] = rep.macro_f1;
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) save_outcome(out_path, out, cfg);
    return 0;
}

int cmd_gradcheck(unsigned long long seed, double eps) {
    double worst = 0;
    for (auto kind : {WordLayerKind::transformer, WordLayerKind::bilstm}) {
        auto res = gradcheck_model(seed, eps, kind);
        std::cout << "word layer " << to_string(kind) << ":\n";
        for (const auto& g : res.groups)
            std::cout << "  " << g.name << "  rel_err " << g.rel_err << "\n";
        std::cout << "  max rel_err " << res.max_rel_err << "\n";
        worst = std::max(worst, res.max_rel_err);
    }
    std::cout << "max relative error: " << worst << "\n";
    return worst < 1e-4 ? 0 : 2;
}

int cmd_stats(const std::string& data_path, bool repair) {
    auto corpus = parse_conll(data_path, repair);
    std::cout << corpus_stats(corpus).to_json() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"hierarchical NER: subword encoder, word-level layer, CRF head"};
    app.require_subcommand(1);

    std::string config_path, train_path, dev_path, out_path, log_path;
    std::string model_path, data_path, input_path, output_path;
    std::string average = "both", params_kind = "live", mode;
    unsigned long long seed_val = 0;
    bool seed_given = false, repair = false, strict = false;
    double eps = 1e-5;
    unsigned long long gc_seed = 7;

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--train", train_path, "training CoNLL file")->required();
    train->add_option("--dev", dev_path, "validation CoNLL file");
    train->add_option("--out", out_path, "checkpoint output path");
    train->add_option("--log", log_path, "JSON-lines training log path");
    train->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });
    train->add_flag("--repair", repair, "rewrite dangling I-t tags to B-t");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--model", model_path, "checkpoint path")->required();
    eval->add_option("--data", data_path, "CoNLL file")->required();
    eval->add_option("--average", average, "micro|macro|both")
        ->check(CLI::IsMember({"micro", "macro", "both"}));
    eval->add_option("--params", params_kind, "live|ema")
        ->check(CLI::IsMember({"live", "ema"}));
    eval->add_flag("--strict", strict, "strict span extraction");
    eval->add_flag("--repair", repair, "rewrite dangling I-t tags to B-t");

    auto* predict = app.add_subcommand("predict", "tag token-per-line input");
    predict->add_option("--model", model_path, "checkpoint path")->required();
    predict->add_option("--input", input_path, "token-per-line input")->required();
    predict->add_option("--output", output_path, "output path, - for stdout");

    auto* ablate = app.add_subcommand("ablate", "train one ablation configuration");
    ablate->add_option("--config", config_path, "key=value config file");
    ablate->add_option("--train", train_path, "training CoNLL file")->required();
    ablate->add_option("--dev", dev_path, "validation CoNLL file");
    ablate->add_option("--mode", mode, "word|subword|lstm")
        ->required()
        ->check(CLI::IsMember({"word", "subword", "lstm"}));
    ablate->add_option("--out", out_path, "checkpoint output path");
    ablate->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });
    ablate->add_flag("--repair", repair, "rewrite dangling I-t tags to B-t");

    auto* gradcheck = app.add_subcommand("gradcheck", "autodiff vs finite differences");
    gradcheck->add_option("--seed", gc_seed, "random seed");
    gradcheck->add_option("--eps", eps, "finite-difference step");

    auto* stats = app.add_subcommand("stats", "dataset statistics");
    stats->add_option("--data", data_path, "CoNLL file")->required();
    stats->add_flag("--repair", repair, "rewrite dangling I-t tags to B-t");

    std::vector<std::string> argv(args);
    std::reverse(argv.begin(), argv.end());  // CLI11 consumes from the back
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    std::optional<unsigned long long> seed;
    if (seed_given) seed = seed_val;

    try {
        if (train->parsed())
            return cmd_train(config_path, train_path, dev_path, out_path, seed, repair,
                             log_path);
        if (eval->parsed())
            return cmd_eval(model_path, data_path, average, params_kind, strict, repair);
        if (predict->parsed()) return cmd_predict(model_path, input_path, output_path);
        if (ablate->parsed())
            return cmd_ablate(config_path, train_path, dev_path, mode, out_path, seed,
                              repair);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, eps);
        if (stats->parsed()) return cmd_stats(data_path, repair);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace hner
