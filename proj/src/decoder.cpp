#include "madst/decoder.hpp"

namespace madst {

DecoderParams make_decoder_params(std::size_t hidden, std::size_t att_dim, std::size_t token_emb,
                                  std::size_t vocab_size, std::mt19937_64& rng) {
    DecoderParams p;
    p.init_w = parameter(init_matrix(hidden, 2 * hidden, rng), "dec.init_w");
    p.init_b = parameter(Tensor::zeros(1, hidden), "dec.init_b");
    p.gru = make_gru_params(token_emb, hidden, false, rng, "dec.gru");
    p.vocab_w = parameter(init_matrix(vocab_size, hidden, rng), "dec.vocab_w");
    p.vocab_b = parameter(Tensor::zeros(1, vocab_size), "dec.vocab_b");
    p.ptr_attn = make_sym_attn(att_dim, hidden, rng, "dec.ptr_attn");
    p.pgen_w = parameter(init_matrix(1, 2 * hidden + token_emb, rng), "dec.pgen_w");
    p.pgen_b = parameter(Tensor::zeros(1, 1), "dec.pgen_b");
    p.gate_w = parameter(init_matrix(3, 2 * hidden, rng), "dec.gate_w");
    p.gate_b = parameter(Tensor::zeros(1, 3), "dec.gate_b");
    p.start_emb = parameter(init_matrix(1, token_emb, rng), "dec.start_emb");
    return p;
}

DecoderState init_decoder(const EncoderOutput& enc, const DecoderParams& params) {
    DecoderState s;
    s.hidden = linear(concat_cols({enc.history_final, enc.slot_summary}), params.init_w,
                      params.init_b);
    return s;
}

Var gate_classify(const EncoderOutput& enc, const DecoderParams& params) {
    Var logits = linear(concat_cols({enc.history_final, enc.slot_summary}), params.gate_w,
                        params.gate_b);
    return softmax(logits, 1);
}

StepDistribution decode_step(DecoderState& state, const Var& prev_token_emb,
                             const EncoderOutput& enc, const CopySpace& copy,
                             const DecoderParams& params) {
    state.hidden = gru_cell(prev_token_emb, state.hidden, params.gru.fwd);
    state.step += 1;

    StepDistribution d;
    d.p_vocab = softmax(linear(state.hidden, params.vocab_w, params.vocab_b), 1);

    AttendResult ptr = sym_attend(state.hidden, enc.history_repr, enc.history_repr,
                                  params.ptr_attn);
    d.p_history = scatter_sum_cols(ptr.weights, copy.history_ext_ids, copy.ext_vocab_size);

    Var mix_in = concat_cols({state.hidden, ptr.attended, prev_token_emb});
    d.p_gen = sigmoid_op(linear(mix_in, params.pgen_w, params.pgen_b));

    Var one_minus = sub(constant(Tensor::scalar(1.0)), d.p_gen);
    d.p_final = add(scalar_mul(d.p_gen, pad_cols(d.p_vocab, copy.ext_vocab_size)),
                    scalar_mul(one_minus, d.p_history));
    return d;
}

namespace {

std::size_t argmax_row(const Tensor& t) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < t.cols(); ++j)
        if (t.at(j) > t.at(best)) best = j;
    return best;
}

}  // namespace

DecodeResult decode_greedy(const EncoderOutput& enc, const CopySpace& copy,
                           const DecoderParams& params, const TokenEmbedder& embed_token,
                           int end_id, std::size_t max_len) {
    DecodeResult out;
    DecoderState state = init_decoder(enc, params);
    Var prev = params.start_emb;
    for (std::size_t i = 0; i < max_len + 1; ++i) {
        StepDistribution d = decode_step(state, prev, enc, copy, params);
        int tok = static_cast<int>(argmax_row(d.p_final->value));
        out.steps.push_back(std::move(d));
        if (tok == end_id) break;
        // step budget exhausted: stop as if the end symbol had been emitted
        if (out.token_ids.size() >= max_len) break;
        out.token_ids.push_back(tok);
        state.emitted.push_back(tok);
        prev = embed_token(tok);
    }
    return out;
}

DecodeResult decode_teacher_forced(const EncoderOutput& enc, const CopySpace& copy,
                                   const DecoderParams& params, const TokenEmbedder& embed_token,
                                   const std::vector<int>& gold_ext_ids, int end_id) {
    if (gold_ext_ids.empty() || gold_ext_ids.back() != end_id)
        throw std::invalid_argument("decode_teacher_forced: gold must end with the end symbol");
    DecodeResult out;
    DecoderState state = init_decoder(enc, params);
    Var prev = params.start_emb;
    for (std::size_t i = 0; i < gold_ext_ids.size(); ++i) {
        out.steps.push_back(decode_step(state, prev, enc, copy, params));
        if (i + 1 < gold_ext_ids.size()) prev = embed_token(gold_ext_ids[i]);
    }
    return out;
}

Var combined_loss(const Var& gate_probs, GateClass gate_gold,
                  const std::vector<StepDistribution>& steps,
                  const std::vector<int>& gold_ext_ids, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("combined_loss: gamma must be >= 0");
    Var cls = cross_entropy(gate_probs, static_cast<std::size_t>(gate_gold));
    if (gate_gold != GateClass::kGen) return scale(cls, gamma);
    if (steps.size() != gold_ext_ids.size())
        throw std::invalid_argument("combined_loss: step/gold length mismatch");
    std::vector<Var> nll;
    nll.reserve(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i)
        nll.push_back(cross_entropy(steps[i].p_final, static_cast<std::size_t>(gold_ext_ids[i])));
    return add(mean_of(nll), scale(cls, gamma));
}

}  // namespace madst
