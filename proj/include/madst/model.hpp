#pragma once

#include "madst/data.hpp"
#include "madst/decoder.hpp"

namespace madst {

struct ModelConfig {
    EmbedConfig embed;
    std::size_t hidden = 400;
    std::size_t att_dim = 400;
    std::size_t max_decode_len = 10;
    double dropout = 0.2;
    double gamma = 1.0;
    EncoderStages stages;
};

// One parameter set shared across every (domain, slot) pair.
struct Model {
    ModelConfig config;
    Vocab vocab;
    SlotCatalog catalog;
    EmbeddingTables tables;
    EncoderParams enc;
    DecoderParams dec;
    std::shared_ptr<ContextualProvider> provider;

    // every learnable tensor, addressable by hierarchical name
    std::vector<Var> named_parameters() const;
    std::vector<Var> trainable_parameters() const;  // drops frozen static vectors
};

Model make_model(const ModelConfig& config, const Vocab& vocab, const SlotCatalog& catalog,
                 std::uint64_t seed);

// per-example extension of the vocab with the history's OOV words
CopySpace make_copy_space(const std::vector<Token>& history, const Vocab& vocab);

GateClass gold_gate(const std::string& value);

// gold value tokens in extended id space, end symbol appended
std::vector<int> value_to_ext_ids(const std::string& value, const Vocab& vocab,
                                  const CopySpace& copy);

// teacher-forced combined loss for one (turn, slot) pair
Var example_loss(const Model& model, const Example& example, const std::string& slot,
                 const FeatureRun& run);

// gate shortcut or greedy-decoded value, eval mode
struct Prediction {
    GateClass gate = GateClass::kNone;
    std::string value = "none";
};
Prediction predict_slot(const Model& model, const Example& example, const std::string& slot);

}  // namespace madst
