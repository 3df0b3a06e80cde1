#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "madst/gru.hpp"

namespace madst {

// A word of the conversation history or slot name. Tag value -1 means the
// annotation is absent (slot-name tokens, untagged corpora).
struct Token {
    std::string surface;
    int pos_tag = -1;
    int ner_tag = -1;
    int turn_index = -1;
};

// Produces L layers of ctx-dim vectors per token. Implementations must be
// deterministic for a fixed seed; outputs are frozen (no gradient flows in).
class ContextualProvider {
public:
    virtual ~ContextualProvider() = default;
    virtual std::size_t num_layers() const = 0;
    virtual std::size_t dim() const = 0;
    // layers[l] has one row per surface
    virtual std::vector<Tensor> embed(const std::vector<std::string>& surfaces) const = 0;
};

// Default stand-in for a pretrained contextual embedder: each vector is a
// seeded hash of the token surface and its immediate neighbors, so outputs
// are context-sensitive and reproducible without any model file.
class HashProvider : public ContextualProvider {
public:
    HashProvider(std::size_t layers, std::size_t dim, std::uint64_t seed)
        : layers_(layers), dim_(dim), seed_(seed) {}
    std::size_t num_layers() const override { return layers_; }
    std::size_t dim() const override { return dim_; }
    std::vector<Tensor> embed(const std::vector<std::string>& surfaces) const override;

private:
    std::size_t layers_;
    std::size_t dim_;
    std::uint64_t seed_;
};

struct EmbedConfig {
    std::size_t static_dim = 300;
    std::size_t char_emb_dim = 16;   // per-character table width
    std::size_t char_out_dim = 100;  // composed word vector width
    std::size_t tag_dim = 5;
    std::size_t ctx_dim = 32;
    std::size_t ctx_layers = 3;
    std::size_t max_turns = 48;
    std::size_t pos_vocab = 32;
    std::size_t ner_vocab = 32;
    bool finetune_static = true;
    double dropout = 0.0;      // on the concatenated embedding
    double ctx_dropout = 0.0;  // on the mixed contextual vector
};

struct EmbeddingTables {
    EmbedConfig config;
    Var static_table;       // vocab x static_dim
    Var char_table;         // 256 x char_emb_dim, indexed by byte
    GruParams char_gru;     // unidirectional, hidden = char_out_dim
    Var pos_table;          // (pos_vocab+1) x tag_dim, row 0 = absent
    Var ner_table;          // (ner_vocab+1) x tag_dim
    Var turn_table;         // (max_turns+1) x tag_dim
    Var mix_logits;         // 1 x ctx_layers
    Var mix_scale;          // 1 x 1

    std::unordered_map<std::string, int> word_ids;
    int unk_id = 0;

    std::size_t embed_dim() const {
        return config.static_dim + config.char_out_dim + config.ctx_dim + 3 * config.tag_dim;
    }
    int lookup_word(const std::string& surface) const {
        auto it = word_ids.find(surface);
        return it == word_ids.end() ? unk_id : it->second;
    }
};

EmbeddingTables make_embedding_tables(const EmbedConfig& config,
                                      const std::vector<std::string>& vocab_words, int unk_id,
                                      std::mt19937_64& rng);

// Optional pretrained static vectors, "word v1 ... v300" text lines.
// Words absent from the file keep their random rows.
void load_static_vectors(EmbeddingTables& tables, const std::string& path);

struct FeatureRun {
    bool training = false;
    std::mt19937_64* rng = nullptr;
};

Var char_compose(const std::string& surface, const EmbeddingTables& tables);

// J x embed_dim; per token [static | char | mixed ctx | pos | ner | turn].
Var embed_conversation(const std::vector<Token>& tokens, const EmbeddingTables& tables,
                       const ContextualProvider& provider, const FeatureRun& run);

// Same layout; POS/NER/turn features take the absent row.
Var embed_slot(const std::vector<Token>& slot_name_tokens, const EmbeddingTables& tables,
               const ContextualProvider& provider, const FeatureRun& run);

// "hotel-book stay" -> {hotel, book, stay}
std::vector<Token> slot_tokens(const std::string& slot_name);

}  // namespace madst
