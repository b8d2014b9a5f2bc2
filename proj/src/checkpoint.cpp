#include "hner/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace hner {

namespace {

constexpr char kMagic[8] = {'H', 'N', 'E', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::size_t entry_size(const Checkpoint::Entry& e) {
    std::size_t n = 1;
    for (int d : e.shape) n *= static_cast<std::size_t>(d);
    return n;
}

template <class T>
void write_le(std::ostream& out, T v) {
    // assumes little-endian host
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : tensors)
        if (e.name == name) return &e;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::ordered_json header;
    header["tensors"] = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;  // densely packed in listing order
    for (const auto& e : ckpt.tensors) {
        if (entry_size(e) != e.values.size())
            throw std::invalid_argument("checkpoint: shape/value mismatch for " + e.name);
        header["tensors"].push_back(
            {{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
        offset += entry_size(e) * sizeof(float);
    }
    header["configs"] = ckpt.configs;
    header["metadata"] = ckpt.metadata;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& e : ckpt.tensors)
        for (double v : e.values)
            write_le<float>(out, static_cast<float>(v));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_le<std::uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto header_len = read_le<std::uint64_t>(in);
    std::string hs(header_len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: invalid header JSON: " + std::string(e.what()));
    }

    Checkpoint ckpt;
    ckpt.version = version;
    ckpt.configs = header.value("configs", nlohmann::ordered_json::object());
    ckpt.metadata = header.value("metadata", nlohmann::ordered_json::object());
    std::uint64_t expected_offset = 0;
    for (const auto& t : header.at("tensors")) {
        Checkpoint::Entry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<std::vector<int>>();
        const auto offset = t.at("offset").get<std::uint64_t>();
        if (offset != expected_offset)
            throw std::runtime_error("checkpoint: non-contiguous offset for " + e.name);
        const std::size_t n = entry_size(e);
        e.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) e.values[i] = read_le<float>(in);
        expected_offset += n * sizeof(float);
        ckpt.tensors.push_back(std::move(e));
    }
    return ckpt;
}

Checkpoint make_checkpoint(const Model& model, const OptimizerState* opt,
                           const EmaState* ema, const LabelScheme& scheme,
                           const Vocabulary& vocab, nlohmann::ordered_json metadata) {
    Checkpoint ckpt;
    const auto& items = model.params().items();
    for (const auto& [name, t] : items)
        ckpt.tensors.push_back({name, t->shape, t->data});
    if (opt) {
        for (std::size_t k = 0; k < items.size(); ++k) {
            ckpt.tensors.push_back({"opt.m." + items[k].first, items[k].second->shape, opt->m[k]});
            ckpt.tensors.push_back({"opt.v." + items[k].first, items[k].second->shape, opt->v[k]});
        }
    }
    if (ema) {
        for (std::size_t k = 0; k < items.size(); ++k)
            ckpt.tensors.push_back({"ema." + items[k].first, items[k].second->shape,
                                    ema->shadow[k]});
    }

    const auto& ec = model.encoder_config();
    ckpt.configs["encoder"] = {{"layers", ec.num_layers},   {"dim", ec.hidden_dim},
                               {"heads", ec.num_heads},     {"ffn_dim", ec.ffn_dim},
                               {"max_positions", ec.max_positions},
                               {"vocab_size", ec.vocab_size}};
    ckpt.configs["word_layer"] = {{"kind", to_string(model.word_config().kind)},
                                  {"heads", model.word_config().num_heads}};
    ckpt.configs["entity_types"] = scheme.entity_types();
    ckpt.configs["vocab"] = vocab.entries();
    if (opt) ckpt.configs["opt_step"] = opt->step;
    if (ema) {
        ckpt.configs["ema_lambda"] = ema->lambda;
        ckpt.configs["ema_step"] = ema->step;
    }
    ckpt.metadata = std::move(metadata);
    return ckpt;
}

RestoredModel read_model_configs(const Checkpoint& ckpt) {
    RestoredModel r;
    const auto& ec = ckpt.configs.at("encoder");
    r.enc.num_layers = ec.at("layers").get<int>();
    r.enc.hidden_dim = ec.at("dim").get<int>();
    r.enc.num_heads = ec.at("heads").get<int>();
    r.enc.ffn_dim = ec.at("ffn_dim").get<int>();
    r.enc.max_positions = ec.at("max_positions").get<int>();
    r.enc.vocab_size = ec.at("vocab_size").get<int>();
    r.word.kind = word_layer_kind_from_string(
        ckpt.configs.at("word_layer").at("kind").get<std::string>());
    r.word.num_heads = ckpt.configs.at("word_layer").at("heads").get<int>();
    r.word.hidden_dim = r.enc.hidden_dim;
    r.entity_types = ckpt.configs.at("entity_types").get<std::vector<std::string>>();
    r.vocab_entries = ckpt.configs.at("vocab").get<std::vector<std::string>>();
    return r;
}

void load_into_model(const Checkpoint& ckpt, Model& model, OptimizerState* opt,
                     EmaState* ema) {
    const auto& items = model.params().items();
    std::set<std::string> used;
    auto fetch = [&](const std::string& name, const TensorPtr& like) {
        const auto* e = ckpt.find(name);
        if (!e) return e;
        if (e->values.size() != like->size())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        used.insert(name);
        return e;
    };

    std::vector<std::string> missing;
    for (const auto& [name, t] : items) {
        const auto* e = fetch(name, t);
        if (!e) {
            missing.push_back(name);
            continue;
        }
        t->data = e->values;
    }
    if (opt) {
        opt->step = ckpt.configs.value("opt_step", 0LL);
        for (std::size_t k = 0; k < items.size(); ++k) {
            const auto* m = fetch("opt.m." + items[k].first, items[k].second);
            const auto* v = fetch("opt.v." + items[k].first, items[k].second);
            if (!m || !v) {
                missing.push_back("opt.*." + items[k].first);
                continue;
            }
            opt->m[k] = m->values;
            opt->v[k] = v->values;
        }
    }
    if (ema) {
        ema->lambda = ckpt.configs.value("ema_lambda", ema->lambda);
        ema->step = ckpt.configs.value("ema_step", 0LL);
        for (std::size_t k = 0; k < items.size(); ++k) {
            const auto* e = fetch("ema." + items[k].first, items[k].second);
            if (!e) {
                missing.push_back("ema." + items[k].first);
                continue;
            }
            ema->shadow[k] = e->values;
        }
    }

    std::vector<std::string> extra;
    for (const auto& e : ckpt.tensors) {
        if (used.count(e.name)) continue;
        // opt/ema groups are optional as a whole
        if (!opt && e.name.rfind("opt.", 0) == 0) continue;
        if (!ema && e.name.rfind("ema.", 0) == 0) continue;
        extra.push_back(e.name);
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "checkpoint: tensor name mismatch;";
        if (!missing.empty()) {
            msg += " missing:";
            for (const auto& n : missing) msg += " " + n;
        }
        if (!extra.empty()) {
            msg += " extra:";
            for (const auto& n : extra) msg += " " + n;
        }
        throw std::runtime_error(msg);
    }
}

}  // namespace hner
