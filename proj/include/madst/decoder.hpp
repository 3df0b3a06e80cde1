#pragma once

#include "madst/encoder.hpp"

namespace madst {

// indices are frozen for checkpoint stability
enum class GateClass : int { kNone = 0, kDontcare = 1, kGen = 2 };

struct DecoderParams {
    Var init_w, init_b;    // h x 2h, 1 x h
    GruParams gru;         // unidirectional, input = token embedding width
    Var vocab_w, vocab_b;  // V x h, 1 x V
    SymAttnParams ptr_attn;
    Var pgen_w, pgen_b;    // 1 x (2h + emb), 1 x 1
    Var gate_w, gate_b;    // 3 x 2h, 1 x 3
    Var start_emb;         // 1 x emb, learned start symbol
};

DecoderParams make_decoder_params(std::size_t hidden, std::size_t att_dim, std::size_t token_emb,
                                  std::size_t vocab_size, std::mt19937_64& rng);

struct DecoderState {
    Var hidden;  // 1 x h
    int step = 0;
    std::vector<int> emitted;  // extended word ids
};

DecoderState init_decoder(const EncoderOutput& enc, const DecoderParams& params);

struct StepDistribution {
    Var p_vocab;    // 1 x V
    Var p_history;  // 1 x V_ext
    Var p_gen;      // 1 x 1
    Var p_final;    // 1 x V_ext
};

// History words mapped into an extended id space so OOV words stay emittable.
struct CopySpace {
    std::vector<int> history_ext_ids;  // one per history position
    std::size_t ext_vocab_size = 0;    // base vocab + per-example OOV words
    std::unordered_map<std::string, int> oov_ids;
    std::vector<std::string> oov_words;  // ext id (base + i) -> surface
};

Var gate_classify(const EncoderOutput& enc, const DecoderParams& params);

StepDistribution decode_step(DecoderState& state, const Var& prev_token_emb,
                             const EncoderOutput& enc, const CopySpace& copy,
                             const DecoderParams& params);

struct DecodeResult {
    std::vector<int> token_ids;  // extended ids, without the end symbol
    std::vector<StepDistribution> steps;
};

// prev-token embeddings come from the caller so vocab handling stays outside
using TokenEmbedder = std::function<Var(int ext_id)>;

// Greedy decoding: emit argmax of p_final until end_id or max_len steps.
DecodeResult decode_greedy(const EncoderOutput& enc, const CopySpace& copy,
                           const DecoderParams& params, const TokenEmbedder& embed_token,
                           int end_id, std::size_t max_len);

// Teacher forcing: feed gold tokens (which must end with end_id), return the
// per-step distributions for the loss.
DecodeResult decode_teacher_forced(const EncoderOutput& enc, const CopySpace& copy,
                                   const DecoderParams& params, const TokenEmbedder& embed_token,
                                   const std::vector<int>& gold_ext_ids, int end_id);

// Eq. style: generator NLL (only when gate_gold == kGen) + gamma * gate CE.
Var combined_loss(const Var& gate_probs, GateClass gate_gold,
                  const std::vector<StepDistribution>& steps,
                  const std::vector<int>& gold_ext_ids, double gamma);

}  // namespace madst
