#include "madst/attention.hpp"

namespace madst {

SymAttnParams make_sym_attn(std::size_t att_dim, std::size_t in_dim, std::mt19937_64& rng,
                            const std::string& name_prefix) {
    SymAttnParams p;
    p.proj = parameter(init_matrix(att_dim, in_dim, rng), name_prefix + ".proj");
    Tensor d(1, att_dim);
    d.fill(1.0);
    p.diag = parameter(std::move(d), name_prefix + ".diag");
    return p;
}

AttendResult sym_attend(const Var& queries, const Var& keys, const Var& values,
                        const SymAttnParams& params, const std::vector<char>* mask) {
    if (queries->value.cols() != params.proj->value.cols() ||
        keys->value.cols() != params.proj->value.cols())
        throw std::invalid_argument("sym_attend: input width " + queries->value.shape_str() +
                                    "/" + keys->value.shape_str() + " vs projection " +
                                    params.proj->value.shape_str());
    if (keys->value.rows() != values->value.rows())
        throw std::invalid_argument("sym_attend: keys/values row mismatch");
    Var fq = relu(matmul_nt(queries, params.proj));
    Var fk = relu(matmul_nt(keys, params.proj));
    Var scores = matmul_nt(mul_rowvec(fq, params.diag), fk);
    Var weights = mask ? softmax_rows_masked(scores, *mask) : softmax(scores, 1);
    return {matmul(weights, values), weights};
}

Var word_level_cross(const Var& conv_emb, const Var& slot_emb, const SymAttnParams& params) {
    AttendResult att = sym_attend(conv_emb, slot_emb, slot_emb, params);
    return concat_cols({conv_emb, att.attended});
}

Var cross_fuse(const Var& h_from, const Var& h_to, const SymAttnParams& params) {
    if (h_from->value.cols() != h_to->value.cols())
        throw std::invalid_argument("cross_fuse: hidden width mismatch " +
                                    h_from->value.shape_str() + " vs " + h_to->value.shape_str());
    AttendResult att = sym_attend(h_from, h_to, h_to, params);
    const Var& hat = att.attended;
    return concat_cols({h_from, hat, add(hat, h_from), mul(hat, h_from)});
}

Var self_attend_fuse(const Var& h, const SymAttnParams& params) {
    return cross_fuse(h, h, params);
}

}  // namespace madst
