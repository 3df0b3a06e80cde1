#pragma once

#include <random>

#include "madst/autodiff.hpp"

namespace madst {

// Matrices are (hidden x input) or (hidden x hidden); biases 1 x hidden.
struct GruDirection {
    Var w_update, u_update, b_update;
    Var w_reset, u_reset, b_reset;
    Var w_cand, u_cand, b_cand;
};

struct GruParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    GruDirection fwd;
    GruDirection bwd;  // unused by the unidirectional runner
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) matrices, zero biases
Tensor init_matrix(std::size_t rows, std::size_t fan_in, std::mt19937_64& rng);
GruParams make_gru_params(std::size_t input_size, std::size_t hidden_size, bool bidirectional,
                          std::mt19937_64& rng, const std::string& name_prefix);

// h' = (1-z) . h + z . c with c = tanh(Wx + r.(Uh) + b)
Var gru_cell(const Var& x, const Var& h_prev, const GruDirection& dir);

// Final hidden state of a left-to-right pass; inputs are T x input_size rows.
Var gru_last_hidden(const Var& inputs, const GruParams& params);

// Per-step mean of the forward and backward hidden states, T x hidden.
Var gru_bidirectional(const Var& inputs, const GruParams& params);

}  // namespace madst
