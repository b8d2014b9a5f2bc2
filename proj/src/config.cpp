#include "hner/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hner/data.hpp"

namespace hner {

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.encoder.num_layers = 2;
    c.encoder.hidden_dim = 64;
    c.encoder.num_heads = 4;
    c.encoder.ffn_dim = 128;
    c.encoder.max_positions = 512;
    c.word_layer.kind = WordLayerKind::transformer;
    c.word_layer.hidden_dim = c.encoder.hidden_dim;
    c.word_layer.num_heads = 4;
    return c;
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw DataError("config: bad boolean for " + key + ": " + v);
}

}  // namespace

RunConfig parse_config_lines(const std::vector<std::string>& lines,
                             const std::string& source) {
    RunConfig c = RunConfig::defaults();
    int line_no = 0;
    for (const auto& raw : lines) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(source + ":" + std::to_string(line_no) +
                            ": expected key=value, got \"" + line + "\"");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            auto a = s.find_first_not_of(" \t");
            auto z = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, z - a + 1);
        };
        strip(key);
        strip(val);

        try {
            if (key == "encoder.layers") c.encoder.num_layers = std::stoi(val);
            else if (key == "encoder.dim") c.encoder.hidden_dim = c.word_layer.hidden_dim = std::stoi(val);
            else if (key == "encoder.heads") c.encoder.num_heads = std::stoi(val);
            else if (key == "encoder.ffn_dim") c.encoder.ffn_dim = std::stoi(val);
            else if (key == "encoder.max_positions") c.encoder.max_positions = std::stoi(val);
            else if (key == "word_layer.kind") c.word_layer.kind = word_layer_kind_from_string(val);
            else if (key == "word_layer.heads") c.word_layer.num_heads = std::stoi(val);
            else if (key == "lr") c.train.learning_rate = std::stod(val);
            else if (key == "batch_size") c.train.batch_size = std::stoi(val);
            else if (key == "max_epochs") c.train.max_epochs = std::stoi(val);
            else if (key == "ema.enabled") c.train.ema_enabled = parse_bool(val, key);
            else if (key == "ema.lambda") c.train.ema_lambda = std::stod(val);
            else if (key == "seed") c.train.seed = std::stoull(val);
            else if (key == "grad_clip") {
                const double g = std::stod(val);
                c.train.grad_clip_norm = g > 0 ? std::optional<double>(g) : std::nullopt;
            }
            else if (key == "dropout") c.train.dropout = std::stod(val);
            else if (key == "crf.masked_training") c.train.masked_training = parse_bool(val, key);
            else if (key == "vocab") c.vocab_path = val;
            else
                throw DataError(source + ":" + std::to_string(line_no) +
                                ": unknown key \"" + key + "\"");
        } catch (const std::invalid_argument&) {
            throw DataError(source + ":" + std::to_string(line_no) +
                            ": bad value for " + key + ": \"" + val + "\"");
        }
    }
    return c;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return parse_config_lines(lines, path);
}

std::string config_to_text(const RunConfig& c) {
    std::ostringstream os;
    os << "encoder.layers=" << c.encoder.num_layers << "\n"
       << "encoder.dim=" << c.encoder.hidden_dim << "\n"
       << "encoder.heads=" << c.encoder.num_heads << "\n"
       << "encoder.ffn_dim=" << c.encoder.ffn_dim << "\n"
       << "encoder.max_positions=" << c.encoder.max_positions << "\n"
       << "word_layer.kind=" << to_string(c.word_layer.kind) << "\n"
       << "word_layer.heads=" << c.word_layer.num_heads << "\n"
       << "lr=" << c.train.learning_rate << "\n"
       << "batch_size=" << c.train.batch_size << "\n"
       << "max_epochs=" << c.train.max_epochs << "\n"
       << "ema.enabled=" << (c.train.ema_enabled ? "true" : "false") << "\n"
       << "ema.lambda=" << c.train.ema_lambda << "\n"
       << "seed=" << c.train.seed << "\n"
       << "grad_clip=" << (c.train.grad_clip_norm ? *c.train.grad_clip_norm : 0.0) << "\n"
       << "dropout=" << c.train.dropout << "\n"
       << "crf.masked_training=" << (c.train.masked_training ? "true" : "false") << "\n"
       << "vocab=" << c.vocab_path << "\n";
    return os.str();
}

}  // namespace hner
