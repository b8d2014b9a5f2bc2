#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hner/checkpoint.hpp"
#include "hner/cli.hpp"
#include "hner/config.hpp"
#include "hner/data.hpp"

using namespace hner;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hner_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

const char* kTinyTrain =
    "the\tO\n"
    "University\tB-ORG\n"
    "of\tI-ORG\n"
    "Pau\tI-ORG\n"
    "\n"
    "Pau\tB-LOC\n"
    "is\tO\n"
    "nice\tO\n"
    "\n";

}  // namespace

TEST_CASE("parse_conll") {
    SUBCASE("two-line file") {
        std::istringstream in("Paris\tB-LOC\n\n");
        auto c = parse_conll_stream(in);
        CHECK(c.sentences.size() == 1);
        CHECK(c.sentences[0].words == std::vector<std::string>{"Paris"});
        CHECK(c.sentences[0].tags == std::vector<std::string>{"B-LOC"});
        CHECK(c.entity_types == std::vector<std::string>{"LOC"});
    }
    SUBCASE("space separated and docstart") {
        std::istringstream in("-DOCSTART- O\nParis B-LOC\nis O\n");
        auto c = parse_conll_stream(in);
        CHECK(c.sentences.size() == 1);
        CHECK(c.sentences[0].words.size() == 2);
    }
    SUBCASE("dangling I-X is an error with the line number") {
        std::istringstream in("a\tI-X\n\n");
        try {
            parse_conll_stream(in, false, "f");
            FAIL("expected throw");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("f:1") != std::string::npos);
        }
    }
    SUBCASE("repair rewrites dangling I-X to B-X") {
        std::istringstream in("a\tO\nb\tI-X\nc\tI-X\n\n");
        auto c = parse_conll_stream(in, true);
        CHECK(c.sentences[0].tags ==
              std::vector<std::string>{"O", "B-X", "I-X"});
    }
    SUBCASE("malformed line") {
        std::istringstream in("justonetoken\n");
        CHECK_THROWS_AS(parse_conll_stream(in), DataError);
        std::istringstream in2("a b c\n");
        CHECK_THROWS_AS(parse_conll_stream(in2), DataError);
    }
    SUBCASE("empty file") {
        std::istringstream in("");
        CHECK_THROWS_AS(parse_conll_stream(in), DataError);
    }
    SUBCASE("parse -> serialize -> parse is idempotent") {
        std::istringstream in(kTinyTrain);
        auto c = parse_conll_stream(in);
        std::ostringstream out;
        write_conll(out, c.sentences);
        std::istringstream in2(out.str());
        auto c2 = parse_conll_stream(in2);
        REQUIRE(c2.sentences.size() == c.sentences.size());
        for (std::size_t i = 0; i < c.sentences.size(); ++i) {
            CHECK(c2.sentences[i].words == c.sentences[i].words);
            CHECK(c2.sentences[i].tags == c.sentences[i].tags);
        }
    }
}

TEST_CASE("corpus_stats") {
    SUBCASE("no entities") {
        std::istringstream in("a\tO\nb\tO\n\n");
        auto st = corpus_stats(parse_conll_stream(in));
        CHECK(st.sentences == 1);
        CHECK(st.tokens == 2);
        CHECK(st.entities.empty());
    }
    SUBCASE("one entity") {
        std::istringstream in("a\tB-X\nb\tI-X\nc\tO\n\n");
        auto st = corpus_stats(parse_conll_stream(in));
        CHECK(st.entities.at("X") == 1);
    }
    SUBCASE("json shape") {
        std::istringstream in(kTinyTrain);
        auto st = corpus_stats(parse_conll_stream(in));
        auto js = st.to_json();
        CHECK(js.find("\"sentences\": 2") != std::string::npos);
        CHECK(js.find("\"ORG\": 1") != std::string::npos);
        CHECK(js.find("\"LOC\": 1") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip") {
    TempDir tmp;
    SUBCASE("single tensor, bit-exact f32 payload") {
        Checkpoint ck;
        ck.tensors.push_back({"w", {2, 2}, {0.25, -1.5, 3.0, 0.125}});
        ck.configs["note"] = 1;
        const auto path = tmp.file("a.ckpt");
        save_checkpoint(path, ck);
        auto back = load_checkpoint(path);
        REQUIRE(back.tensors.size() == 1);
        CHECK(back.tensors[0].name == "w");
        CHECK(back.tensors[0].shape == std::vector<int>{2, 2});
        CHECK(back.tensors[0].values == ck.tensors[0].values);  // exact in f32
        CHECK(back.configs["note"] == 1);
    }
    SUBCASE("f32 rounding is the only loss") {
        Checkpoint ck;
        const double v = 0.1;  // not representable in f32
        ck.tensors.push_back({"w", {1, 1}, {v}});
        const auto path = tmp.file("b.ckpt");
        save_checkpoint(path, ck);
        auto back = load_checkpoint(path);
        CHECK(back.tensors[0].values[0] ==
              static_cast<double>(static_cast<float>(v)));
    }
    SUBCASE("truncated file errors cleanly") {
        Checkpoint ck;
        ck.tensors.push_back({"w", {4, 4}, std::vector<double>(16, 1.0)});
        const auto path = tmp.file("c.ckpt");
        save_checkpoint(path, ck);
        auto size = fs::file_size(path);
        fs::resize_file(path, size - 8);
        CHECK_THROWS(load_checkpoint(path));
    }
    SUBCASE("bad magic") {
        const auto path = tmp.file("d.ckpt");
        write_file(path, "NOTACKPTxxxxxxxxxxxxxxxx");
        CHECK_THROWS(load_checkpoint(path));
    }
    SUBCASE("model state round trip lists missing names") {
        std::mt19937_64 rng(1);
        EncoderConfig enc;
        enc.num_layers = 1;
        enc.hidden_dim = 8;
        enc.num_heads = 2;
        enc.ffn_dim = 16;
        enc.max_positions = 16;
        enc.vocab_size = 8;
        Model model(enc, {WordLayerKind::none, 8, 2}, 3, rng);
        LabelScheme scheme({"X"});
        auto vocab = Vocabulary::from_entries(
            {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b", "c", "d"});
        auto ck = make_checkpoint(model, nullptr, nullptr, scheme, vocab, {});
        const auto path = tmp.file("e.ckpt");
        save_checkpoint(path, ck);

        auto back = load_checkpoint(path);
        std::mt19937_64 rng2(99);
        Model other(enc, {WordLayerKind::none, 8, 2}, 3, rng2);
        load_into_model(back, other, nullptr, nullptr);
        for (std::size_t k = 0; k < model.params().items().size(); ++k) {
            const auto& a = model.params().items()[k].second->data;
            const auto& b = other.params().items()[k].second->data;
            for (std::size_t i = 0; i < a.size(); ++i)
                CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
        }

        // a model with a different word layer reports missing names
        std::mt19937_64 rng3(5);
        Model mismatched(enc, {WordLayerKind::bilstm, 8, 2}, 3, rng3);
        try {
            load_into_model(back, mismatched, nullptr, nullptr);
            FAIL("expected throw");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("missing") != std::string::npos);
            CHECK(std::string(e.what()).find("word.fwd.w") != std::string::npos);
        }
    }
}

TEST_CASE("config parsing") {
    auto cfg = parse_config_lines({"encoder.layers=3", "lr = 0.001", "# comment",
                                   "word_layer.kind=bilstm", "ema.enabled=false"});
    CHECK(cfg.encoder.num_layers == 3);
    CHECK(cfg.train.learning_rate == 0.001);
    CHECK(cfg.word_layer.kind == WordLayerKind::bilstm);
    CHECK_FALSE(cfg.train.ema_enabled);

    CHECK_THROWS_AS(parse_config_lines({"nonsense.key=1"}), DataError);
    CHECK_THROWS_AS(parse_config_lines({"encoder.layers"}), DataError);
    CHECK_THROWS_AS(parse_config_lines({"encoder.layers=abc"}), DataError);

    // defaults survive a round trip through the text form
    auto d = RunConfig::defaults();
    std::istringstream text(config_to_text(d));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(text, line)) lines.push_back(line);
    auto d2 = parse_config_lines(lines);
    CHECK(d2.encoder.num_layers == d.encoder.num_layers);
    CHECK(d2.train.ema_lambda == d.train.ema_lambda);
}

TEST_CASE("cli end to end") {
    TempDir tmp;
    const auto train = tmp.file("train.conll");
    write_file(train, kTinyTrain);
    const auto cfgf = tmp.file("run.cfg");
    write_file(cfgf,
               "encoder.layers=1\nencoder.dim=16\nencoder.heads=2\nencoder.ffn_dim=32\n"
               "lr=0.005\nmax_epochs=3\ndropout=0\nseed=5\n");
    const auto ckpt = tmp.file("model.ckpt");

    SUBCASE("train, stats, eval, predict") {
        CHECK(run_cli({"train", "--config", cfgf, "--train", train, "--dev", train,
                       "--out", ckpt}) == 0);
        CHECK(fs::exists(ckpt));

        CHECK(run_cli({"stats", "--data", train}) == 0);
        CHECK(run_cli({"eval", "--model", ckpt, "--data", train, "--average", "both"}) == 0);
        CHECK(run_cli({"eval", "--model", ckpt, "--data", train, "--params", "ema"}) == 0);

        const auto inp = tmp.file("in.txt");
        write_file(inp, "Pau\nis\nnice\n\n");
        const auto outp = tmp.file("out.conll");
        CHECK(run_cli({"predict", "--model", ckpt, "--input", inp, "--output", outp}) == 0);
        std::ifstream back(outp);
        std::string l1;
        std::getline(back, l1);
        CHECK(l1.rfind("Pau\t", 0) == 0);
    }
    SUBCASE("usage errors exit 1") {
        CHECK(run_cli({"train"}) == 1);                 // missing --train
        CHECK(run_cli({"frobnicate"}) == 1);            // unknown subcommand
        CHECK(run_cli({"eval", "--model", "x", "--data", "y", "--average", "huge"}) == 1);
    }
    SUBCASE("data errors exit 2") {
        const auto bad = tmp.file("bad.conll");
        write_file(bad, "a\tI-X\n\n");
        CHECK(run_cli({"stats", "--data", bad}) == 2);
        CHECK(run_cli({"stats", "--data", tmp.file("missing.conll")}) == 2);

        const auto empty = tmp.file("empty.txt");
        write_file(empty, "\n\n");
        CHECK(run_cli({"train", "--config", cfgf, "--train", train, "--out", ckpt}) == 0);
        CHECK(run_cli({"predict", "--model", ckpt, "--input", empty,
                       "--output", tmp.file("o.txt")}) == 2);
    }
    SUBCASE("gradcheck runs") {
        CHECK(run_cli({"gradcheck", "--seed", "7"}) == 0);
    }
}
