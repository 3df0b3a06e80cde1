#include "madst/model.hpp"

#include <sstream>

namespace madst {

namespace {

void push_gru(std::vector<Var>& out, const GruDirection& d) {
    out.insert(out.end(), {d.w_update, d.u_update, d.b_update, d.w_reset, d.u_reset, d.b_reset,
                           d.w_cand, d.u_cand, d.b_cand});
}

void push_gru(std::vector<Var>& out, const GruParams& p) {
    push_gru(out, p.fwd);
    if (p.bwd.w_update) push_gru(out, p.bwd);
}

void push_attn(std::vector<Var>& out, const SymAttnParams& p) {
    out.push_back(p.proj);
    out.push_back(p.diag);
}

}  // namespace

std::vector<Var> Model::named_parameters() const {
    std::vector<Var> out;
    out.push_back(tables.static_table);
    out.push_back(tables.char_table);
    push_gru(out, tables.char_gru);
    out.insert(out.end(), {tables.pos_table, tables.ner_table, tables.turn_table,
                           tables.mix_logits, tables.mix_scale});
    push_attn(out, enc.word_attn);
    push_gru(out, enc.conv_gru1);
    push_gru(out, enc.slot_gru1);
    push_attn(out, enc.slot_to_conv);
    push_attn(out, enc.conv_to_slot);
    push_gru(out, enc.conv_gru2);
    push_gru(out, enc.slot_gru2);
    push_attn(out, enc.self_attn);
    push_gru(out, enc.conv_gru3);
    out.push_back(enc.summarizer_w);
    out.insert(out.end(), {dec.init_w, dec.init_b});
    push_gru(out, dec.gru);
    out.insert(out.end(), {dec.vocab_w, dec.vocab_b});
    push_attn(out, dec.ptr_attn);
    out.insert(out.end(), {dec.pgen_w, dec.pgen_b, dec.gate_w, dec.gate_b, dec.start_emb});
    return out;
}

std::vector<Var> Model::trainable_parameters() const {
    std::vector<Var> out = named_parameters();
    if (!config.embed.finetune_static)
        std::erase_if(out, [this](const Var& v) { return v == tables.static_table; });
    return out;
}

Model make_model(const ModelConfig& config, const Vocab& vocab, const SlotCatalog& catalog,
                 std::uint64_t seed) {
    Model m;
    m.config = config;
    m.vocab = vocab;
    m.catalog = catalog;
    std::mt19937_64 rng(seed);
    m.tables = make_embedding_tables(config.embed, vocab.words, Vocab::kUnk, rng);
    m.enc = make_encoder_params(m.tables.embed_dim(), config.hidden, config.att_dim, rng);
    m.dec = make_decoder_params(config.hidden, config.att_dim, config.embed.static_dim,
                                vocab.size(), rng);
    m.provider = std::make_shared<HashProvider>(config.embed.ctx_layers, config.embed.ctx_dim,
                                                seed ^ 0x9e3779b97f4a7c15ULL);
    return m;
}

CopySpace make_copy_space(const std::vector<Token>& history, const Vocab& vocab) {
    CopySpace cs;
    cs.ext_vocab_size = vocab.size();
    for (const Token& tok : history) {
        if (vocab.contains(tok.surface)) {
            cs.history_ext_ids.push_back(vocab.id(tok.surface));
            continue;
        }
        auto it = cs.oov_ids.find(tok.surface);
        if (it == cs.oov_ids.end()) {
            int ext = static_cast<int>(cs.ext_vocab_size++);
            cs.oov_ids[tok.surface] = ext;
            cs.oov_words.push_back(tok.surface);
            cs.history_ext_ids.push_back(ext);
        } else {
            cs.history_ext_ids.push_back(it->second);
        }
    }
    return cs;
}

GateClass gold_gate(const std::string& value) {
    if (value == "none") return GateClass::kNone;
    if (value == "dontcare") return GateClass::kDontcare;
    return GateClass::kGen;
}

std::vector<int> value_to_ext_ids(const std::string& value, const Vocab& vocab,
                                  const CopySpace& copy) {
    std::vector<int> ids;
    for (const std::string& w : tokenize(value)) {
        if (vocab.contains(w)) {
            ids.push_back(vocab.id(w));
        } else {
            auto it = copy.oov_ids.find(w);
            ids.push_back(it == copy.oov_ids.end() ? Vocab::kUnk : it->second);
        }
    }
    ids.push_back(Vocab::kEnd);
    return ids;
}

namespace {

TokenEmbedder make_token_embedder(const Model& model) {
    int base = static_cast<int>(model.vocab.size());
    return [&model, base](int ext_id) {
        int vid = ext_id < base ? ext_id : Vocab::kUnk;
        return embedding_lookup(model.tables.static_table, {vid});
    };
}

EncoderOutput encode_for(const Model& model, const Example& example, const std::string& slot,
                         const FeatureRun& run) {
    return encode(example.history, slot_tokens(slot), model.tables, *model.provider, model.enc,
                  model.config.stages, model.config.dropout, run);
}

}  // namespace

Var example_loss(const Model& model, const Example& example, const std::string& slot,
                 const FeatureRun& run) {
    auto target_it = example.targets.find(slot);
    if (target_it == example.targets.end())
        throw std::invalid_argument("example_loss: no target for slot '" + slot + "'");
    const std::string& gold_value = target_it->second;

    EncoderOutput enc = encode_for(model, example, slot, run);
    Var gate_probs = gate_classify(enc, model.dec);
    GateClass gate = gold_gate(gold_value);
    if (gate != GateClass::kGen)
        return combined_loss(gate_probs, gate, {}, {}, model.config.gamma);

    CopySpace copy = make_copy_space(example.history, model.vocab);
    std::vector<int> gold_ids = value_to_ext_ids(gold_value, model.vocab, copy);
    DecodeResult dec = decode_teacher_forced(enc, copy, model.dec, make_token_embedder(model),
                                             gold_ids, Vocab::kEnd);
    return combined_loss(gate_probs, gate, dec.steps, gold_ids, model.config.gamma);
}

Prediction predict_slot(const Model& model, const Example& example, const std::string& slot) {
    FeatureRun run;  // eval mode
    EncoderOutput enc = encode_for(model, example, slot, run);
    Var gate_probs = gate_classify(enc, model.dec);
    std::size_t best = 0;
    for (std::size_t j = 1; j < 3; ++j)
        if (gate_probs->value.at(j) > gate_probs->value.at(best)) best = j;

    Prediction p;
    p.gate = static_cast<GateClass>(best);
    if (p.gate == GateClass::kNone) {
        p.value = "none";
        return p;
    }
    if (p.gate == GateClass::kDontcare) {
        p.value = "dontcare";
        return p;
    }
    CopySpace copy = make_copy_space(example.history, model.vocab);
    DecodeResult dec = decode_greedy(enc, copy, model.dec, make_token_embedder(model), Vocab::kEnd,
                                     model.config.max_decode_len);
    std::ostringstream value;
    int base = static_cast<int>(model.vocab.size());
    for (std::size_t i = 0; i < dec.token_ids.size(); ++i) {
        if (i) value << ' ';
        int id = dec.token_ids[i];
        value << (id < base ? model.vocab.words[static_cast<std::size_t>(id)]
                            : copy.oov_words[static_cast<std::size_t>(id - base)]);
    }
    p.value = value.str();
    return p;
}

}  // namespace madst
