#include "madst/encoder.hpp"

namespace madst {

EncoderParams make_encoder_params(std::size_t embed_dim, std::size_t hidden, std::size_t att_dim,
                                  std::mt19937_64& rng) {
    EncoderParams p;
    p.word_attn = make_sym_attn(att_dim, embed_dim, rng, "enc.word_attn");
    p.conv_gru1 = make_gru_params(2 * embed_dim, hidden, true, rng, "enc.conv_gru1");
    p.slot_gru1 = make_gru_params(embed_dim, hidden, true, rng, "enc.slot_gru1");
    p.slot_to_conv = make_sym_attn(att_dim, hidden, rng, "enc.slot_to_conv");
    p.conv_to_slot = make_sym_attn(att_dim, hidden, rng, "enc.conv_to_slot");
    p.conv_gru2 = make_gru_params(4 * hidden, hidden, true, rng, "enc.conv_gru2");
    p.slot_gru2 = make_gru_params(4 * hidden, hidden, true, rng, "enc.slot_gru2");
    p.self_attn = make_sym_attn(att_dim, hidden, rng, "enc.self_attn");
    p.conv_gru3 = make_gru_params(4 * hidden, hidden, true, rng, "enc.conv_gru3");
    p.summarizer_w = parameter(init_matrix(1, hidden, rng), "enc.summarizer_w");
    return p;
}

Var summarize_slot(const Var& h_slot, const Var& w) {
    Var scores = matmul_nt(w, h_slot);       // 1 x K
    Var alpha = softmax(scores, 1);
    return matmul(alpha, h_slot);            // 1 x h
}

namespace {

Var mean_rows(const Var& x) {
    std::size_t r = x->value.rows();
    Tensor ones(1, r);
    ones.fill(1.0 / static_cast<double>(r));
    return matmul(constant(std::move(ones)), x);
}

// fusion with the state itself in place of an attended vector
Var passthrough_fuse(const Var& h) {
    return concat_cols({h, h, scale(h, 2.0), mul(h, h)});
}

Var maybe_dropout(const Var& x, double rate, const FeatureRun& run) {
    if (!run.training || rate <= 0.0) return x;
    return dropout(x, rate, true, *run.rng);
}

}  // namespace

EncoderOutput encode(const std::vector<Token>& conv_tokens, const std::vector<Token>& slot_toks,
                     const EmbeddingTables& tables, const ContextualProvider& provider,
                     const EncoderParams& params, const EncoderStages& stages, double dropout_rate,
                     const FeatureRun& run) {
    if (conv_tokens.empty() || slot_toks.empty())
        throw std::invalid_argument("encode: empty conversation or slot token list");

    Var e_conv = embed_conversation(conv_tokens, tables, provider, run);
    Var e_slot = embed_slot(slot_toks, tables, provider, run);

    Var r_conv = stages.word_xattn ? word_level_cross(e_conv, e_slot, params.word_attn)
                                   : concat_cols({e_conv, e_conv});
    // slot side passes through at the word level

    Var h1_conv = maybe_dropout(gru_bidirectional(r_conv, params.conv_gru1), dropout_rate, run);
    Var h1_slot = maybe_dropout(gru_bidirectional(e_slot, params.slot_gru1), dropout_rate, run);

    Var r1_slot, r1_conv;
    if (stages.high_xattn) {
        r1_slot = cross_fuse(h1_slot, h1_conv, params.slot_to_conv);
        r1_conv = cross_fuse(h1_conv, h1_slot, params.conv_to_slot);
    } else {
        r1_slot = passthrough_fuse(h1_slot);
        r1_conv = passthrough_fuse(h1_conv);
    }

    Var h2_conv = maybe_dropout(gru_bidirectional(r1_conv, params.conv_gru2), dropout_rate, run);
    Var h2_slot = maybe_dropout(gru_bidirectional(r1_slot, params.slot_gru2), dropout_rate, run);

    Var r2_conv = stages.self_attn ? self_attend_fuse(h2_conv, params.self_attn)
                                   : passthrough_fuse(h2_conv);

    Var h3_conv = gru_bidirectional(r2_conv, params.conv_gru3);

    EncoderOutput out;
    out.history_repr = h3_conv;
    out.history_final = slice_row(h3_conv, h3_conv->value.rows() - 1);
    out.slot_summary = stages.slot_summarizer ? summarize_slot(h2_slot, params.summarizer_w)
                                              : mean_rows(h2_slot);
    return out;
}

}  // namespace madst
