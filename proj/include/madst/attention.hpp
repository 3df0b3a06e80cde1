#pragma once

#include "madst/gru.hpp"

namespace madst {

// Symmetric scaled multiplicative attention: the same projection is applied
// to both sides and the score is a diagonal bilinear form over the ReLU'd
// projections.
struct SymAttnParams {
    Var proj;  // att_dim x d_in
    Var diag;  // 1 x att_dim, interpreted as a diagonal matrix
};

SymAttnParams make_sym_attn(std::size_t att_dim, std::size_t in_dim, std::mt19937_64& rng,
                            const std::string& name_prefix);

struct AttendResult {
    Var attended;  // A x v
    Var weights;   // A x B, rows sum to 1
};

// score(a,b) = relu(proj q_a) . diag . relu(proj k_b); masked key positions
// get exactly zero weight. Throws when the mask leaves nothing attendable.
AttendResult sym_attend(const Var& queries, const Var& keys, const Var& values,
                        const SymAttnParams& params, const std::vector<char>* mask = nullptr);

// Each history word attends over the slot words; result is [e_j | a_hat_j].
Var word_level_cross(const Var& conv_emb, const Var& slot_emb, const SymAttnParams& params);

// Attend h_from over h_to, then fuse: [h | h_hat | h_hat + h | h_hat . h].
Var cross_fuse(const Var& h_from, const Var& h_to, const SymAttnParams& params);

// cross_fuse of a sequence against itself (the position attends to itself too).
Var self_attend_fuse(const Var& h, const SymAttnParams& params);

}  // namespace madst
