#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hner/model.hpp"
#include "hner/trainer.hpp"

namespace hner {

// On-disk layout: "HNERCKPT" | u32 version=1 | u64 header_length |
// JSON header {tensors:[{name,shape,offset}],configs,metadata} |
// packed little-endian f32 payloads at the stated offsets (relative to the
// start of the data section). f64 values round-trip through f32 on disk.
struct Checkpoint {
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<double> values;
    };

    std::uint32_t version = 1;
    std::vector<Entry> tensors;
    nlohmann::ordered_json configs;
    nlohmann::ordered_json metadata;

    const Entry* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Full training state: model + crf parameters, optimizer moments, EMA shadow.
Checkpoint make_checkpoint(const Model& model, const OptimizerState* opt,
                           const EmaState* ema, const LabelScheme& scheme,
                           const Vocabulary& vocab, nlohmann::ordered_json metadata);

struct RestoredModel {
    EncoderConfig enc;
    WordLayerConfig word;
    std::vector<std::string> entity_types;
    std::vector<std::string> vocab_entries;
};

// Reads configs and copies tensor payloads into the model's parameter store.
// Throws listing missing/extra tensor names.
RestoredModel read_model_configs(const Checkpoint& ckpt);
void load_into_model(const Checkpoint& ckpt, Model& model, OptimizerState* opt,
                     EmaState* ema);

}  // namespace hner
