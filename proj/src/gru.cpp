#include "madst/gru.hpp"

#include <cmath>

namespace madst {

Tensor init_matrix(std::size_t rows, std::size_t fan_in, std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, fan_in);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = dist(rng);
    return t;
}

namespace {

GruDirection make_direction(std::size_t in, std::size_t hid, std::mt19937_64& rng,
                            const std::string& prefix) {
    GruDirection d;
    d.w_update = parameter(init_matrix(hid, in, rng), prefix + ".w_update");
    d.u_update = parameter(init_matrix(hid, hid, rng), prefix + ".u_update");
    d.b_update = parameter(Tensor::zeros(1, hid), prefix + ".b_update");
    d.w_reset = parameter(init_matrix(hid, in, rng), prefix + ".w_reset");
    d.u_reset = parameter(init_matrix(hid, hid, rng), prefix + ".u_reset");
    d.b_reset = parameter(Tensor::zeros(1, hid), prefix + ".b_reset");
    d.w_cand = parameter(init_matrix(hid, in, rng), prefix + ".w_cand");
    d.u_cand = parameter(init_matrix(hid, hid, rng), prefix + ".u_cand");
    d.b_cand = parameter(Tensor::zeros(1, hid), prefix + ".b_cand");
    return d;
}

Var matvec_h(const Var& h, const Var& u) {
    // h: 1 x hidden, u: hidden x hidden -> 1 x hidden
    return matmul_nt(h, u);
}

}  // namespace

GruParams make_gru_params(std::size_t input_size, std::size_t hidden_size, bool bidirectional,
                          std::mt19937_64& rng, const std::string& name_prefix) {
    GruParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.fwd = make_direction(input_size, hidden_size, rng, name_prefix + ".fwd");
    if (bidirectional) p.bwd = make_direction(input_size, hidden_size, rng, name_prefix + ".bwd");
    return p;
}

Var gru_cell(const Var& x, const Var& h_prev, const GruDirection& dir) {
    Var z = sigmoid_op(add(linear(x, dir.w_update, dir.b_update), matvec_h(h_prev, dir.u_update)));
    Var r = sigmoid_op(add(linear(x, dir.w_reset, dir.b_reset), matvec_h(h_prev, dir.u_reset)));
    Var c = tanh_op(add(linear(x, dir.w_cand, dir.b_cand), mul(r, matvec_h(h_prev, dir.u_cand))));
    // (1-z).h + z.c
    Var one = constant(Tensor(1, z->value.cols(), std::vector<double>(z->value.cols(), 1.0)));
    return add(mul(sub(one, z), h_prev), mul(z, c));
}

namespace {

std::vector<Var> run_direction(const Var& inputs, const GruDirection& dir, std::size_t hidden,
                               bool reversed) {
    std::size_t t_len = inputs->value.rows();
    Var h = constant(Tensor::zeros(1, hidden));
    std::vector<Var> states(t_len);
    for (std::size_t step = 0; step < t_len; ++step) {
        std::size_t t = reversed ? t_len - 1 - step : step;
        h = gru_cell(slice_row(inputs, t), h, dir);
        states[t] = h;
    }
    return states;
}

}  // namespace

Var gru_last_hidden(const Var& inputs, const GruParams& params) {
    if (inputs->value.rows() < 1) throw std::invalid_argument("gru: empty sequence");
    auto states = run_direction(inputs, params.fwd, params.hidden_size, false);
    return states.back();
}

Var gru_bidirectional(const Var& inputs, const GruParams& params) {
    if (inputs->value.rows() < 1) throw std::invalid_argument("gru_bidirectional: empty sequence");
    if (inputs->value.cols() != params.input_size)
        throw std::invalid_argument("gru_bidirectional: input width " + inputs->value.shape_str() +
                                    " vs expected " + std::to_string(params.input_size));
    auto f = run_direction(inputs, params.fwd, params.hidden_size, false);
    auto b = run_direction(inputs, params.bwd, params.hidden_size, true);
    std::vector<Var> rows(f.size());
    for (std::size_t t = 0; t < f.size(); ++t) rows[t] = scale(add(f[t], b[t]), 0.5);
    return concat_rows(rows);
}

}  // namespace madst
