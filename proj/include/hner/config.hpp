#pragma once

#include <string>
#include <vector>

#include "hner/model.hpp"
#include "hner/trainer.hpp"

namespace hner {

// Flat key=value run configuration. Every key has a default; unknown keys
// are hard errors. '#' starts a comment.
struct RunConfig {
    EncoderConfig encoder;          // vocab_size is filled from the vocabulary
    WordLayerConfig word_layer;
    TrainConfig train;
    std::string vocab_path;         // empty: derive a vocabulary from the data

    static RunConfig defaults();
};

RunConfig parse_config_lines(const std::vector<std::string>& lines,
                             const std::string& source = "<config>");
RunConfig parse_config_file(const std::string& path);

std::string config_to_text(const RunConfig& cfg);

}  // namespace hner
