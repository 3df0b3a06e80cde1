#include "madst/features.hpp"

#include <fstream>
#include <sstream>

namespace madst {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a_str(std::uint64_t h, const std::string& s) {
    return fnv1a(h, s.data(), s.size());
}

double hash_to_unit(std::uint64_t h) {
    // [-1, 1)
    return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace

std::vector<Tensor> HashProvider::embed(const std::vector<std::string>& surfaces) const {
    std::vector<Tensor> layers;
    layers.reserve(layers_);
    for (std::size_t l = 0; l < layers_; ++l) layers.emplace_back(surfaces.size(), dim_);
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        std::uint64_t base = 14695981039346656037ULL ^ seed_;
        base = fnv1a_str(base, surfaces[i]);
        base = fnv1a_str(base, i > 0 ? surfaces[i - 1] : std::string("<s>"));
        base = fnv1a_str(base, i + 1 < surfaces.size() ? surfaces[i + 1] : std::string("</s>"));
        for (std::size_t l = 0; l < layers_; ++l)
            for (std::size_t j = 0; j < dim_; ++j) {
                std::uint64_t cell[2] = {static_cast<std::uint64_t>(l),
                                         static_cast<std::uint64_t>(j)};
                layers[l](i, j) = hash_to_unit(fnv1a(base, cell, sizeof(cell)));
            }
    }
    return layers;
}

EmbeddingTables make_embedding_tables(const EmbedConfig& config,
                                      const std::vector<std::string>& vocab_words, int unk_id,
                                      std::mt19937_64& rng) {
    if (vocab_words.empty()) throw std::invalid_argument("make_embedding_tables: empty vocab");
    EmbeddingTables t;
    t.config = config;
    t.static_table = parameter(init_matrix(vocab_words.size(), config.static_dim, rng),
                               "emb.static");
    t.char_table = parameter(init_matrix(256, config.char_emb_dim, rng), "emb.char_table");
    t.char_gru = make_gru_params(config.char_emb_dim, config.char_out_dim, false, rng,
                                 "emb.char_gru");
    t.pos_table = parameter(init_matrix(config.pos_vocab + 1, config.tag_dim, rng), "emb.pos");
    t.ner_table = parameter(init_matrix(config.ner_vocab + 1, config.tag_dim, rng), "emb.ner");
    t.turn_table = parameter(init_matrix(config.max_turns + 1, config.tag_dim, rng), "emb.turn");
    t.mix_logits = parameter(Tensor::zeros(1, config.ctx_layers), "emb.mix_logits");
    t.mix_scale = parameter(Tensor::scalar(1.0), "emb.mix_scale");
    for (std::size_t i = 0; i < vocab_words.size(); ++i)
        t.word_ids[vocab_words[i]] = static_cast<int>(i);
    t.unk_id = unk_id;
    return t;
}

void load_static_vectors(EmbeddingTables& tables, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_static_vectors: cannot open " + path);
    std::string line;
    std::size_t dim = tables.config.static_dim;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        auto it = tables.word_ids.find(word);
        std::vector<double> v(dim);
        for (std::size_t j = 0; j < dim; ++j)
            if (!(ss >> v[j]))
                throw std::runtime_error("load_static_vectors: short vector for '" + word + "'");
        if (it == tables.word_ids.end()) continue;
        for (std::size_t j = 0; j < dim; ++j)
            tables.static_table->value(static_cast<std::size_t>(it->second), j) = v[j];
    }
}

Var char_compose(const std::string& surface, const EmbeddingTables& tables) {
    if (surface.empty()) throw std::invalid_argument("char_compose: empty surface");
    std::vector<int> ids;
    ids.reserve(surface.size());
    for (unsigned char c : surface) ids.push_back(static_cast<int>(c));
    Var chars = embedding_lookup(tables.char_table, ids);
    return gru_last_hidden(chars, tables.char_gru);
}

namespace {

// rows copied without a graph edge; used when the table is frozen
Var lookup_rows_frozen(const Var& table, const std::vector<int>& ids) {
    std::size_t d = table->value.cols();
    Tensor out(ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            out(i, j) = table->value(static_cast<std::size_t>(ids[i]), j);
    return constant(std::move(out));
}

Var mixed_contextual(const std::vector<std::string>& surfaces, const EmbeddingTables& tables,
                     const ContextualProvider& provider, const FeatureRun& run) {
    if (provider.num_layers() != tables.config.ctx_layers ||
        provider.dim() != tables.config.ctx_dim)
        throw std::invalid_argument("contextual provider layout does not match tables config");
    std::vector<Tensor> layers = provider.embed(surfaces);
    Var weights = softmax(tables.mix_logits, 1);
    Var mix;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Var term = scalar_mul(pick(weights, l), constant(std::move(layers[l])));
        mix = mix ? add(mix, term) : term;
    }
    mix = scalar_mul(tables.mix_scale, mix);
    if (run.training && tables.config.ctx_dropout > 0.0)
        mix = dropout(mix, tables.config.ctx_dropout, true, *run.rng);
    return mix;
}

Var embed_impl(const std::vector<Token>& tokens, const EmbeddingTables& tables,
               const ContextualProvider& provider, const FeatureRun& run, bool slot_side) {
    if (tokens.empty()) throw std::invalid_argument("embed: empty token list");
    const EmbedConfig& cfg = tables.config;

    std::vector<std::string> surfaces;
    std::vector<int> word_ids, pos_ids, ner_ids, turn_ids;
    for (const Token& tok : tokens) {
        surfaces.push_back(tok.surface);
        word_ids.push_back(tables.lookup_word(tok.surface));
        if (slot_side) {
            pos_ids.push_back(0);
            ner_ids.push_back(0);
            turn_ids.push_back(0);
        } else {
            if (tok.pos_tag >= static_cast<int>(cfg.pos_vocab) ||
                tok.ner_tag >= static_cast<int>(cfg.ner_vocab))
                throw std::out_of_range("embed: tag id outside configured vocabulary for '" +
                                        tok.surface + "'");
            pos_ids.push_back(tok.pos_tag < 0 ? 0 : tok.pos_tag + 1);
            ner_ids.push_back(tok.ner_tag < 0 ? 0 : tok.ner_tag + 1);
            int turn = tok.turn_index;
            if (turn >= static_cast<int>(cfg.max_turns)) turn = cfg.max_turns - 1;
            turn_ids.push_back(turn < 0 ? 0 : turn + 1);
        }
    }

    Var statics = cfg.finetune_static ? embedding_lookup(tables.static_table, word_ids)
                                      : lookup_rows_frozen(tables.static_table, word_ids);
    std::vector<Var> char_rows;
    char_rows.reserve(tokens.size());
    for (const Token& tok : tokens) char_rows.push_back(char_compose(tok.surface, tables));
    Var chars = concat_rows(char_rows);
    Var ctx = mixed_contextual(surfaces, tables, provider, run);
    Var pos = embedding_lookup(tables.pos_table, pos_ids);
    Var ner = embedding_lookup(tables.ner_table, ner_ids);
    Var turn = embedding_lookup(tables.turn_table, turn_ids);

    Var e = concat_cols({statics, chars, ctx, pos, ner, turn});
    if (run.training && cfg.dropout > 0.0) e = dropout(e, cfg.dropout, true, *run.rng);
    return e;
}

}  // namespace

Var embed_conversation(const std::vector<Token>& tokens, const EmbeddingTables& tables,
                       const ContextualProvider& provider, const FeatureRun& run) {
    return embed_impl(tokens, tables, provider, run, false);
}

Var embed_slot(const std::vector<Token>& slot_name_tokens, const EmbeddingTables& tables,
               const ContextualProvider& provider, const FeatureRun& run) {
    if (slot_name_tokens.empty()) throw std::invalid_argument("embed_slot: empty slot name");
    return embed_impl(slot_name_tokens, tables, provider, run, true);
}

std::vector<Token> slot_tokens(const std::string& slot_name) {
    std::vector<Token> toks;
    std::string cur;
    for (char c : slot_name) {
        if (c == '-' || c == ' ') {
            if (!cur.empty()) toks.push_back(Token{cur});
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) toks.push_back(Token{cur});
    if (toks.empty()) throw std::invalid_argument("slot_tokens: empty slot name");
    return toks;
}

}  // namespace madst
