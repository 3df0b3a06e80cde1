#pragma once

#include "madst/attention.hpp"
#include "madst/features.hpp"

namespace madst {

struct EncoderOutput {
    Var history_repr;   // J x h
    Var slot_summary;   // 1 x h
    Var history_final;  // 1 x h, last row of history_repr
};

struct EncoderParams {
    SymAttnParams word_attn;  // word-level cross-attention over the embeddings
    GruParams conv_gru1;      // input 2*d_e
    GruParams slot_gru1;      // input d_e
    SymAttnParams slot_to_conv;  // slot queries over history states
    SymAttnParams conv_to_slot;  // history queries over slot states
    GruParams conv_gru2;      // input 4h
    GruParams slot_gru2;      // input 4h
    SymAttnParams self_attn;
    GruParams conv_gru3;      // input 4h
    Var summarizer_w;         // 1 x h
};

// Stage switches; disabled attention stages degrade to pass-through fusion
// of the unattended representation, a disabled summarizer to mean pooling.
struct EncoderStages {
    bool word_xattn = true;
    bool high_xattn = true;
    bool self_attn = true;
    bool slot_summarizer = true;
};

EncoderParams make_encoder_params(std::size_t embed_dim, std::size_t hidden, std::size_t att_dim,
                                  std::mt19937_64& rng);

// alpha = softmax_k(w . h_k); output = sum_k alpha_k h_k
Var summarize_slot(const Var& h_slot, const Var& w);

EncoderOutput encode(const std::vector<Token>& conv_tokens, const std::vector<Token>& slot_toks,
                     const EmbeddingTables& tables, const ContextualProvider& provider,
                     const EncoderParams& params, const EncoderStages& stages, double dropout_rate,
                     const FeatureRun& run);

}  // namespace madst
