#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "madst/tensor.hpp"

namespace madst {

// One node of the computation graph. Built forward, differentiated by
// backward() in reverse topological order.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // adds into parents' grad
    std::string name;
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var parameter(Tensor value, std::string name = "");

// Reverse-mode sweep from a scalar loss. Each reachable node is visited
// exactly once; parameters not reachable from `loss` keep their grad as is.
void backward(const Var& loss);

// --- primitive ops -------------------------------------------------------

Var matmul(const Var& a, const Var& b);
// a * b^T without materializing the transpose
Var matmul_nt(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);           // elementwise
Var scale(const Var& a, double s);
Var scalar_mul(const Var& s, const Var& x);    // s is 1x1, broadcast
Var mul_rowvec(const Var& a, const Var& v);    // each row of a scaled by v (1xC)

// y = x * W^T + b, with x: RxIn, W: OutxIn, b: 1xOut
Var linear(const Var& x, const Var& w, const Var& b);

Var concat_cols(const std::vector<Var>& xs);   // equal row counts
Var concat_rows(const std::vector<Var>& xs);   // equal col counts

Var relu(const Var& x);
Var tanh_op(const Var& x);
Var sigmoid_op(const Var& x);
Var log_op(const Var& x);                      // clamped at 1e-12
Var neg(const Var& x);

// axis 1 normalizes each row (default), axis 0 each column.
Var softmax(const Var& x, int axis = 1);
// mask over columns; masked positions get exactly zero weight.
// Throws if the mask has no true entry.
Var softmax_rows_masked(const Var& x, const std::vector<char>& mask);

Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_of(const std::vector<Var>& scalars);

Var slice_row(const Var& x, std::size_t i);
Var pick(const Var& x, std::size_t idx);       // scalar from a 1xN row

// Rows of `table` selected by `ids`; backward scatter-adds into the table.
Var embedding_lookup(const Var& table, const std::vector<int>& ids);

// Inverted dropout: identity when !training or rate == 0.
// rate must be in [0, 1).
Var dropout(const Var& x, double rate, bool training, std::mt19937_64& rng);

// -log p[target] on an already-normalized 1xN distribution, clamped at 1e-12.
Var cross_entropy(const Var& probs, std::size_t target);

// Column j of x is added into column col_ids[j] of the output; duplicate
// targets sum. Used to turn per-position copy weights into per-word mass.
Var scatter_sum_cols(const Var& x, const std::vector<int>& col_ids, std::size_t out_cols);

// Zero-pad a row matrix on the right to new_cols columns.
Var pad_cols(const Var& x, std::size_t new_cols);

}  // namespace madst
