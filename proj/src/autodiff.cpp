#include "madst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace madst {

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->requires_grad = false;
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    n->value = std::move(value);
    if (n->requires_grad) {
        n->grad = Tensor::zeros(n->value.rows(), n->value.cols());
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return n;
}

Var parameter(Tensor value, std::string name) {
    auto n = std::make_shared<Node>();
    n->grad = Tensor::zeros(value.rows(), value.cols());
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

void backward(const Var& loss) {
    if (loss->value.size() != 1)
        throw std::logic_error("backward: loss must be scalar, got " + loss->value.shape_str());
    if (!loss->requires_grad) return;

    // iterative post-order DFS; GRU chains get deep
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad.at(0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.cols() != B.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree, " + A.shape_str() +
                                    " vs " + B.shape_str());
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) C(i, j) += av * B(p, j);
        }
    return make_node(std::move(C), {a, b}, [a, b, m, k, n](Node& node) {
        const Tensor& G = node.grad;
        if (a->requires_grad) {
            // dA = G * B^T
            Tensor& dA = a->grad;
            const Tensor& B2 = b->value;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += G(i, j) * B2(p, j);
                    dA(i, p) += s;
                }
        }
        if (b->requires_grad) {
            // dB = A^T * G
            Tensor& dB = b->grad;
            const Tensor& A2 = a->value;
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i) {
                    double av = A2(i, p);
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) dB(p, j) += av * G(i, j);
                }
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.cols() != B.cols())
        throw std::invalid_argument("matmul_nt: inner dimensions disagree, " + A.shape_str() +
                                    " vs " + B.shape_str() + "^T");
    std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor C(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += A(i, p) * B(j, p);
            C(i, j) = s;
        }
    return make_node(std::move(C), {a, b}, [a, b, m, k, n](Node& node) {
        const Tensor& G = node.grad;
        if (a->requires_grad) {
            Tensor& dA = a->grad;
            const Tensor& B2 = b->value;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double g = G(i, j);
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) dA(i, p) += g * B2(j, p);
                }
        }
        if (b->requires_grad) {
            Tensor& dB = b->grad;
            const Tensor& A2 = a->value;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double g = G(i, j);
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) dB(j, p) += g * A2(i, p);
                }
        }
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += b->value.at(i);
    return make_node(std::move(out), {a, b}, [a, b](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            if (a->requires_grad) a->grad.at(i) += node.grad.at(i);
            if (b->requires_grad) b->grad.at(i) += node.grad.at(i);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) -= b->value.at(i);
    return make_node(std::move(out), {a, b}, [a, b](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            if (a->requires_grad) a->grad.at(i) += node.grad.at(i);
            if (b->requires_grad) b->grad.at(i) -= node.grad.at(i);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= b->value.at(i);
    return make_node(std::move(out), {a, b}, [a, b](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double g = node.grad.at(i);
            if (a->requires_grad) a->grad.at(i) += g * b->value.at(i);
            if (b->requires_grad) b->grad.at(i) += g * a->value.at(i);
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= s;
    return make_node(std::move(out), {a}, [a, s](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) a->grad.at(i) += s * node.grad.at(i);
    });
}

Var scalar_mul(const Var& s, const Var& x) {
    if (s->value.size() != 1)
        throw std::invalid_argument("scalar_mul: scalar operand has shape " + s->value.shape_str());
    double sv = s->value.item();
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= sv;
    return make_node(std::move(out), {s, x}, [s, x, sv](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double g = node.grad.at(i);
            if (s->requires_grad) s->grad.at(0) += g * x->value.at(i);
            if (x->requires_grad) x->grad.at(i) += g * sv;
        }
    });
}

Var mul_rowvec(const Var& a, const Var& v) {
    if (v->value.rows() != 1 || v->value.cols() != a->value.cols())
        throw std::invalid_argument("mul_rowvec: shapes " + a->value.shape_str() + " vs " +
                                    v->value.shape_str());
    Tensor out = a->value;
    std::size_t r = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) *= v->value.at(j);
    return make_node(std::move(out), {a, v}, [a, v, r, c](Node& node) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                double g = node.grad(i, j);
                if (a->requires_grad) a->grad(i, j) += g * v->value.at(j);
                if (v->requires_grad) v->grad.at(j) += g * a->value(i, j);
            }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& X = x->value;
    const Tensor& W = w->value;
    const Tensor& B = b->value;
    if (X.cols() != W.cols())
        throw std::invalid_argument("linear: input width " + X.shape_str() +
                                    " does not match weight " + W.shape_str());
    if (B.rows() != 1 || B.cols() != W.rows())
        throw std::invalid_argument("linear: bias shape " + B.shape_str() + " vs weight " +
                                    W.shape_str());
    std::size_t r = X.rows(), in = X.cols(), out_dim = W.rows();
    Tensor out(r, out_dim);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t o = 0; o < out_dim; ++o) {
            double s = B.at(o);
            for (std::size_t p = 0; p < in; ++p) s += X(i, p) * W(o, p);
            out(i, o) = s;
        }
    return make_node(std::move(out), {x, w, b}, [x, w, b, r, in, out_dim](Node& node) {
        const Tensor& G = node.grad;
        if (x->requires_grad) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t o = 0; o < out_dim; ++o) {
                    double g = G(i, o);
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < in; ++p) x->grad(i, p) += g * w->value(o, p);
                }
        }
        if (w->requires_grad) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t o = 0; o < out_dim; ++o) {
                    double g = G(i, o);
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < in; ++p) w->grad(o, p) += g * x->value(i, p);
                }
        }
        if (b->requires_grad) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t o = 0; o < out_dim; ++o) b->grad.at(o) += G(i, o);
        }
    });
}

Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
    std::size_t r = xs[0]->value.rows(), total = 0;
    for (const auto& x : xs) {
        if (x->value.rows() != r)
            throw std::invalid_argument("concat_cols: row count mismatch");
        total += x->value.cols();
    }
    Tensor out(r, total);
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::size_t c = x->value.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out(i, off + j) = x->value(i, j);
        off += c;
    }
    return make_node(std::move(out), xs, [xs, r](Node& node) {
        std::size_t off = 0;
        for (const auto& x : xs) {
            std::size_t c = x->value.cols();
            if (x->requires_grad)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) x->grad(i, j) += node.grad(i, off + j);
            off += c;
        }
    });
}

Var concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
    std::size_t c = xs[0]->value.cols(), total = 0;
    for (const auto& x : xs) {
        if (x->value.cols() != c)
            throw std::invalid_argument("concat_rows: column count mismatch");
        total += x->value.rows();
    }
    Tensor out(total, c);
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::size_t r = x->value.rows();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out(off + i, j) = x->value(i, j);
        off += r;
    }
    return make_node(std::move(out), xs, [xs, c](Node& node) {
        std::size_t off = 0;
        for (const auto& x : xs) {
            std::size_t r = x->value.rows();
            if (x->requires_grad)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) x->grad(i, j) += node.grad(off + i, j);
            off += r;
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::max(0.0, out.at(i));
    return make_node(std::move(out), {x}, [x](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if (x->value.at(i) > 0.0) x->grad.at(i) += node.grad.at(i);
    });
}

Var tanh_op(const Var& x) {
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::tanh(out.at(i));
    return make_node(std::move(out), {x}, [x](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double y = node.value.at(i);
            x->grad.at(i) += node.grad.at(i) * (1.0 - y * y);
        }
    });
}

Var sigmoid_op(const Var& x) {
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out.at(i);
        out.at(i) = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
    }
    return make_node(std::move(out), {x}, [x](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double y = node.value.at(i);
            x->grad.at(i) += node.grad.at(i) * y * (1.0 - y);
        }
    });
}

constexpr double kEps = 1e-12;

Var log_op(const Var& x) {
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::log(std::max(out.at(i), kEps));
    return make_node(std::move(out), {x}, [x](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            x->grad.at(i) += node.grad.at(i) / std::max(x->value.at(i), kEps);
    });
}

Var neg(const Var& x) { return scale(x, -1.0); }

namespace {

void softmax_row_inplace(const double* in, double* out, std::size_t n) {
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

}  // namespace

Var softmax(const Var& x, int axis) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
    const Tensor& X = x->value;
    std::size_t r = X.rows(), c = X.cols();
    Tensor out(r, c);
    if (axis == 1) {
        std::vector<double> buf(c);
        for (std::size_t i = 0; i < r; ++i) {
            softmax_row_inplace(&X.data()[i * c], buf.data(), c);
            for (std::size_t j = 0; j < c; ++j) out(i, j) = buf[j];
        }
    } else {
        std::vector<double> col(r), buf(r);
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t i = 0; i < r; ++i) col[i] = X(i, j);
            softmax_row_inplace(col.data(), buf.data(), r);
            for (std::size_t i = 0; i < r; ++i) out(i, j) = buf[i];
        }
    }
    return make_node(std::move(out), {x}, [x, axis, r, c](Node& node) {
        // dx = y * (g - sum(g*y)) along the normalized axis
        if (axis == 1) {
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += node.grad(i, j) * node.value(i, j);
                for (std::size_t j = 0; j < c; ++j)
                    x->grad(i, j) += node.value(i, j) * (node.grad(i, j) - dot);
            }
        } else {
            for (std::size_t j = 0; j < c; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < r; ++i) dot += node.grad(i, j) * node.value(i, j);
                for (std::size_t i = 0; i < r; ++i)
                    x->grad(i, j) += node.value(i, j) * (node.grad(i, j) - dot);
            }
        }
    });
}

Var softmax_rows_masked(const Var& x, const std::vector<char>& mask) {
    const Tensor& X = x->value;
    std::size_t r = X.rows(), c = X.cols();
    if (mask.size() != c)
        throw std::invalid_argument("softmax_rows_masked: mask length " +
                                    std::to_string(mask.size()) + " vs cols " + std::to_string(c));
    bool any = false;
    for (char m : mask) any = any || (m != 0);
    if (!any) throw std::invalid_argument("softmax_rows_masked: no attendable position");

    Tensor out(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < c; ++j)
            if (mask[j]) mx = std::max(mx, X(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double e = mask[j] ? std::exp(X(i, j) - mx) : 0.0;
            out(i, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) out(i, j) /= z;
    }
    return make_node(std::move(out), {x}, [x, r, c](Node& node) {
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += node.grad(i, j) * node.value(i, j);
            for (std::size_t j = 0; j < c; ++j)
                x->grad(i, j) += node.value(i, j) * (node.grad(i, j) - dot);
        }
    });
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (double v : x->value.data()) s += v;
    return make_node(Tensor::scalar(s), {x}, [x](Node& node) {
        double g = node.grad.at(0);
        for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad.at(i) += g;
    });
}

Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x->value.size())); }

Var mean_of(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("mean_of: empty input");
    Var acc = scalars[0];
    for (std::size_t i = 1; i < scalars.size(); ++i) acc = add(acc, scalars[i]);
    return scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

Var slice_row(const Var& x, std::size_t i) {
    if (i >= x->value.rows())
        throw std::out_of_range("slice_row: row " + std::to_string(i) + " of " +
                                x->value.shape_str());
    std::size_t c = x->value.cols();
    Tensor out(1, c);
    for (std::size_t j = 0; j < c; ++j) out.at(j) = x->value(i, j);
    return make_node(std::move(out), {x}, [x, i, c](Node& node) {
        for (std::size_t j = 0; j < c; ++j) x->grad(i, j) += node.grad.at(j);
    });
}

Var pick(const Var& x, std::size_t idx) {
    if (x->value.rows() != 1 || idx >= x->value.cols())
        throw std::out_of_range("pick: index " + std::to_string(idx) + " of " +
                                x->value.shape_str());
    return make_node(Tensor::scalar(x->value.at(idx)), {x}, [x, idx](Node& node) {
        x->grad.at(idx) += node.grad.at(0);
    });
}

Var embedding_lookup(const Var& table, const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty id list");
    std::size_t d = table->value.cols();
    Tensor out(ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= table->value.rows())
            throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                                    " outside table " + table->value.shape_str());
        for (std::size_t j = 0; j < d; ++j) out(i, j) = table->value(id, j);
    }
    return make_node(std::move(out), {table}, [table, ids, d](Node& node) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                table->grad(static_cast<std::size_t>(ids[i]), j) += node.grad(i, j);
    });
}

Var dropout(const Var& x, double rate, bool training, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;
    double keep = 1.0 - rate;
    std::bernoulli_distribution coin(keep);
    auto mask = std::make_shared<std::vector<char>>(x->value.size());
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool k = coin(rng);
        (*mask)[i] = k;
        out.at(i) = k ? out.at(i) / keep : 0.0;
    }
    return make_node(std::move(out), {x}, [x, mask, keep](Node& node) {
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if ((*mask)[i]) x->grad.at(i) += node.grad.at(i) / keep;
    });
}

Var cross_entropy(const Var& probs, std::size_t target) {
    return neg(log_op(pick(probs, target)));
}

Var scatter_sum_cols(const Var& x, const std::vector<int>& col_ids, std::size_t out_cols) {
    const Tensor& X = x->value;
    if (col_ids.size() != X.cols())
        throw std::invalid_argument("scatter_sum_cols: id count " + std::to_string(col_ids.size()) +
                                    " vs cols " + std::to_string(X.cols()));
    for (int id : col_ids)
        if (id < 0 || static_cast<std::size_t>(id) >= out_cols)
            throw std::out_of_range("scatter_sum_cols: target column " + std::to_string(id));
    std::size_t r = X.rows(), c = X.cols();
    Tensor out(r, out_cols);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out(i, static_cast<std::size_t>(col_ids[j])) += X(i, j);
    return make_node(std::move(out), {x}, [x, col_ids, r, c](Node& node) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                x->grad(i, j) += node.grad(i, static_cast<std::size_t>(col_ids[j]));
    });
}

Var pad_cols(const Var& x, std::size_t new_cols) {
    const Tensor& X = x->value;
    if (new_cols < X.cols())
        throw std::invalid_argument("pad_cols: cannot shrink from " + X.shape_str());
    if (new_cols == X.cols()) return x;
    std::size_t r = X.rows(), c = X.cols();
    Tensor out(r, new_cols);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) = X(i, j);
    return make_node(std::move(out), {x}, [x, r, c](Node& node) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) x->grad(i, j) += node.grad(i, j);
    });
}

}  // namespace madst
