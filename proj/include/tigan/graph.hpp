#pragma once

// Reverse-mode autodiff over dense 2-D tensors.
//
// Gradients are built symbolically: differentiating a scalar node appends new
// nodes that compute the adjoints. Because adjoints are ordinary nodes, the
// gradient of a scalar w.r.t. an input is itself differentiable, which is what
// the WGAN gradient penalty needs (second-order parameter gradients).
//
// Shapes are fixed at construction time. Node ids are topologically ordered by
// construction; a node's parents always have smaller ids.

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tigan/tensor.hpp"

namespace tigan {

enum class Op {
    input,
    param,
    constant,
    add,
    sub,
    mul,
    div,
    div_or_zero,  // a/b with the convention 0 where b == 0
    matmul,
    transpose,
    bias_add,     // (B x F) + (1 x F), broadcast over rows
    concat_cols,
    slice_cols,
    pad_cols,
    tile_rows,    // 1 x F -> R x F
    tile_cols,    // B x 1 -> B x C
    tile_scalar,  // 1 x 1 -> R x C
    col_sums,     // B x F -> 1 x F
    row_sums,     // B x F -> B x 1
    sum_all,      // -> 1 x 1
    sigmoid,
    log,
    exp,
    square,
    sqrt,
    leaky_relu,      // x > 0 ? x : slope * x
    leaky_mask,      // x > 0 ? 1 : slope
    above_mask,      // x > c ? 1 : 0
    below_mask,      // x < c ? 1 : 0
    clip_min,        // max(x, c)
    clip_max,        // min(x, c)
    affine,          // scale * x + shift
    softmax_rows,
    row_l2_norm,     // B x F -> B x 1
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::input: return "input";
        case Op::param: return "param";
        case Op::constant: return "constant";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::div_or_zero: return "div_or_zero";
        case Op::matmul: return "matmul";
        case Op::transpose: return "transpose";
        case Op::bias_add: return "bias_add";
        case Op::concat_cols: return "concat_cols";
        case Op::slice_cols: return "slice_cols";
        case Op::pad_cols: return "pad_cols";
        case Op::tile_rows: return "tile_rows";
        case Op::tile_cols: return "tile_cols";
        case Op::tile_scalar: return "tile_scalar";
        case Op::col_sums: return "col_sums";
        case Op::row_sums: return "row_sums";
        case Op::sum_all: return "sum_all";
        case Op::sigmoid: return "sigmoid";
        case Op::log: return "log";
        case Op::exp: return "exp";
        case Op::square: return "square";
        case Op::sqrt: return "sqrt";
        case Op::leaky_relu: return "leaky_relu";
        case Op::leaky_mask: return "leaky_mask";
        case Op::above_mask: return "above_mask";
        case Op::below_mask: return "below_mask";
        case Op::clip_min: return "clip_min";
        case Op::clip_max: return "clip_max";
        case Op::affine: return "affine";
        case Op::softmax_rows: return "softmax_rows";
        case Op::row_l2_norm: return "row_l2_norm";
    }
    return "?";
}

struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c0 = 0.0;  // slope / bound / scale
    double c1 = 0.0;  // shift
    std::size_t i0 = 0;  // tile counts, slice begin / pad left
    std::size_t i1 = 0;  // slice end / pad right
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string name;        // leaves only
    bool trainable = false;  // param leaves
    Tensor value;            // constants only
};

// Leaf values for one evaluation. Tensors are held by pointer; the caller
// keeps them alive for the duration of the call.
class Bindings {
public:
    void set(const std::string& name, const Tensor& t) { map_[name] = &t; }
    void set(const std::string& name, Tensor&&) = delete;

    const Tensor* find(const std::string& name) const {
        auto it = map_.find(name);
        return it == map_.end() ? nullptr : it->second;
    }

private:
    std::unordered_map<std::string, const Tensor*> map_;
};

class Graph {
public:
    // ---- leaves ----

    int input(const std::string& name, std::size_t rows, std::size_t cols) {
        return leaf(name, rows, cols, false);
    }

    int param(const std::string& name, std::size_t rows, std::size_t cols) {
        return leaf(name, rows, cols, true);
    }

    int constant(Tensor t) {
        Node n;
        n.op = Op::constant;
        n.rows = t.rows();
        n.cols = t.cols();
        n.value = std::move(t);
        return push(std::move(n));
    }

    int scalar(double v) { return constant(Tensor::scalar(v)); }

    // ---- elementwise / structural ops ----

    int add(int a, int b) { return binary_same(Op::add, a, b); }
    int sub(int a, int b) { return binary_same(Op::sub, a, b); }
    int mul(int a, int b) { return binary_same(Op::mul, a, b); }
    int div(int a, int b) { return binary_same(Op::div, a, b); }
    int div_or_zero(int a, int b) { return binary_same(Op::div_or_zero, a, b); }

    int matmul(int a, int b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        TIGAN_ENSURE(na.cols == nb.rows, "matmul: inner dimensions disagree, " + describe(a) + " x " + describe(b));
        Node n;
        n.op = Op::matmul;
        n.a = a;
        n.b = b;
        n.rows = na.rows;
        n.cols = nb.cols;
        return push(std::move(n));
    }

    int transpose(int a) {
        Node n;
        n.op = Op::transpose;
        n.a = a;
        n.rows = node(a).cols;
        n.cols = node(a).rows;
        return push(std::move(n));
    }

    int bias_add(int a, int b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        TIGAN_ENSURE(nb.rows == 1 && nb.cols == na.cols,
               "bias_add: bias must be 1x" + std::to_string(na.cols) + ", got " + describe(b));
        Node n;
        n.op = Op::bias_add;
        n.a = a;
        n.b = b;
        n.rows = na.rows;
        n.cols = na.cols;
        return push(std::move(n));
    }

    int concat_cols(int a, int b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        TIGAN_ENSURE(na.rows == nb.rows, "concat_cols: row counts disagree, " + describe(a) + " | " + describe(b));
        Node n;
        n.op = Op::concat_cols;
        n.a = a;
        n.b = b;
        n.rows = na.rows;
        n.cols = na.cols + nb.cols;
        return push(std::move(n));
    }

    int slice_cols(int a, std::size_t begin, std::size_t end) {
        const Node& na = node(a);
        TIGAN_ENSURE(begin < end && end <= na.cols, "slice_cols: bad range on " + describe(a));
        Node n;
        n.op = Op::slice_cols;
        n.a = a;
        n.i0 = begin;
        n.i1 = end;
        n.rows = na.rows;
        n.cols = end - begin;
        return push(std::move(n));
    }

    int pad_cols(int a, std::size_t left, std::size_t right) {
        Node n;
        n.op = Op::pad_cols;
        n.a = a;
        n.i0 = left;
        n.i1 = right;
        n.rows = node(a).rows;
        n.cols = node(a).cols + left + right;
        return push(std::move(n));
    }

    int tile_rows(int a, std::size_t rows) {
        TIGAN_ENSURE(node(a).rows == 1, "tile_rows expects a 1xF operand, got " + describe(a));
        Node n;
        n.op = Op::tile_rows;
        n.a = a;
        n.i0 = rows;
        n.rows = rows;
        n.cols = node(a).cols;
        return push(std::move(n));
    }

    int tile_cols(int a, std::size_t cols) {
        TIGAN_ENSURE(node(a).cols == 1, "tile_cols expects a Bx1 operand, got " + describe(a));
        Node n;
        n.op = Op::tile_cols;
        n.a = a;
        n.i0 = cols;
        n.rows = node(a).rows;
        n.cols = cols;
        return push(std::move(n));
    }

    int tile_scalar(int a, std::size_t rows, std::size_t cols) {
        TIGAN_ENSURE(node(a).rows == 1 && node(a).cols == 1, "tile_scalar expects a scalar, got " + describe(a));
        Node n;
        n.op = Op::tile_scalar;
        n.a = a;
        n.i0 = rows;
        n.i1 = cols;
        n.rows = rows;
        n.cols = cols;
        return push(std::move(n));
    }

    int col_sums(int a) {
        Node n;
        n.op = Op::col_sums;
        n.a = a;
        n.rows = 1;
        n.cols = node(a).cols;
        return push(std::move(n));
    }

    int row_sums(int a) {
        Node n;
        n.op = Op::row_sums;
        n.a = a;
        n.rows = node(a).rows;
        n.cols = 1;
        return push(std::move(n));
    }

    int sum_all(int a) {
        Node n;
        n.op = Op::sum_all;
        n.a = a;
        n.rows = 1;
        n.cols = 1;
        return push(std::move(n));
    }

    int mean_all(int a) {
        double inv = 1.0 / static_cast<double>(node(a).rows * node(a).cols);
        return affine(sum_all(a), inv, 0.0);
    }

    int sigmoid(int a) { return unary(Op::sigmoid, a); }
    int log(int a) { return unary(Op::log, a); }
    int exp(int a) { return unary(Op::exp, a); }
    int square(int a) { return unary(Op::square, a); }
    int sqrt(int a) { return unary(Op::sqrt, a); }

    int leaky_relu(int a, double slope) {
        int id = unary(Op::leaky_relu, a);
        nodes_[id].c0 = slope;
        return id;
    }
    int leaky_mask(int a, double slope) {
        int id = unary(Op::leaky_mask, a);
        nodes_[id].c0 = slope;
        return id;
    }
    int above_mask(int a, double bound) {
        int id = unary(Op::above_mask, a);
        nodes_[id].c0 = bound;
        return id;
    }
    int below_mask(int a, double bound) {
        int id = unary(Op::below_mask, a);
        nodes_[id].c0 = bound;
        return id;
    }
    int clip_min(int a, double bound) {
        int id = unary(Op::clip_min, a);
        nodes_[id].c0 = bound;
        return id;
    }
    int clip_max(int a, double bound) {
        int id = unary(Op::clip_max, a);
        nodes_[id].c0 = bound;
        return id;
    }
    int affine(int a, double scale, double shift) {
        int id = unary(Op::affine, a);
        nodes_[id].c0 = scale;
        nodes_[id].c1 = shift;
        return id;
    }

    int softmax_rows(int a) { return unary(Op::softmax_rows, a); }

    int row_l2_norm(int a) {
        Node n;
        n.op = Op::row_l2_norm;
        n.a = a;
        n.rows = node(a).rows;
        n.cols = 1;
        return push(std::move(n));
    }

    // ---- introspection ----

    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    std::string describe(int id) const {
        const Node& n = node(id);
        std::string s = "#" + std::to_string(id) + " " + op_name(n.op);
        if (!n.name.empty()) s += "(" + n.name + ")";
        s += " " + std::to_string(n.rows) + "x" + std::to_string(n.cols);
        return s;
    }

    // ---- evaluation ----

    std::vector<Tensor> evaluate(const Bindings& bindings, const std::vector<int>& outputs) const {
        std::vector<char> needed(nodes_.size(), 0);
        std::vector<int> stack(outputs);
        for (int id : stack) {
            TIGAN_ENSURE(id >= 0 && id < size(), "evaluate: node id out of range");
        }
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            if (needed[static_cast<std::size_t>(id)]) continue;
            needed[static_cast<std::size_t>(id)] = 1;
            const Node& n = node(id);
            if (n.a >= 0) stack.push_back(n.a);
            if (n.b >= 0) stack.push_back(n.b);
        }

        std::vector<Tensor> values(nodes_.size());
        for (int id = 0; id < size(); ++id) {
            if (!needed[static_cast<std::size_t>(id)]) continue;
            compute(id, bindings, values);
        }

        std::vector<Tensor> result;
        result.reserve(outputs.size());
        for (int id : outputs) {
            result.push_back(values[static_cast<std::size_t>(id)]);
        }
        return result;
    }

    Tensor evaluate_one(const Bindings& bindings, int output) const {
        return evaluate(bindings, {output})[0];
    }

    // ---- differentiation ----

    // Adjoint of every ancestor of `output`, built symbolically and memoized
    // per output node. Appends nodes on first use.
    const std::map<int, int>& adjoints(int output) {
        auto it = adjoint_cache_.find(output);
        if (it != adjoint_cache_.end()) return it->second;

        const Node& out = node(output);
        TIGAN_ENSURE(out.rows == 1 && out.cols == 1,
                     "backward: output must be scalar, got " + describe(output));

        std::map<int, int> adj;
        adj[output] = scalar(1.0);
        for (int id = output; id >= 0; --id) {
            auto found = adj.find(id);
            if (found == adj.end()) continue;
            int g = found->second;
            const Node n = node(id);  // copy: push() may reallocate
            switch (n.op) {
                case Op::input:
                case Op::param:
                case Op::constant:
                    break;
                case Op::add:
                    accumulate(adj, n.a, g);
                    accumulate(adj, n.b, g);
                    break;
                case Op::sub:
                    accumulate(adj, n.a, g);
                    accumulate(adj, n.b, affine(g, -1.0, 0.0));
                    break;
                case Op::mul:
                    accumulate(adj, n.a, mul(g, n.b));
                    accumulate(adj, n.b, mul(g, n.a));
                    break;
                case Op::div:
                    accumulate(adj, n.a, div(g, n.b));
                    accumulate(adj, n.b, affine(mul(g, div(id, n.b)), -1.0, 0.0));
                    break;
                case Op::div_or_zero:
                    accumulate(adj, n.a, div_or_zero(g, n.b));
                    accumulate(adj, n.b, affine(mul(g, div_or_zero(id, n.b)), -1.0, 0.0));
                    break;
                case Op::matmul:
                    accumulate(adj, n.a, matmul(g, transpose(n.b)));
                    accumulate(adj, n.b, matmul(transpose(n.a), g));
                    break;
                case Op::transpose:
                    accumulate(adj, n.a, transpose(g));
                    break;
                case Op::bias_add:
                    accumulate(adj, n.a, g);
                    accumulate(adj, n.b, col_sums(g));
                    break;
                case Op::concat_cols:
                    accumulate(adj, n.a, slice_cols(g, 0, node(n.a).cols));
                    accumulate(adj, n.b, slice_cols(g, node(n.a).cols, n.cols));
                    break;
                case Op::slice_cols:
                    accumulate(adj, n.a, pad_cols(g, n.i0, node(n.a).cols - n.i1));
                    break;
                case Op::pad_cols:
                    accumulate(adj, n.a, slice_cols(g, n.i0, n.i0 + node(n.a).cols));
                    break;
                case Op::tile_rows:
                    accumulate(adj, n.a, col_sums(g));
                    break;
                case Op::tile_cols:
                    accumulate(adj, n.a, row_sums(g));
                    break;
                case Op::tile_scalar:
                    accumulate(adj, n.a, sum_all(g));
                    break;
                case Op::col_sums:
                    accumulate(adj, n.a, tile_rows(g, node(n.a).rows));
                    break;
                case Op::row_sums:
                    accumulate(adj, n.a, tile_cols(g, node(n.a).cols));
                    break;
                case Op::sum_all:
                    accumulate(adj, n.a, tile_scalar(g, node(n.a).rows, node(n.a).cols));
                    break;
                case Op::sigmoid:
                    accumulate(adj, n.a, mul(g, mul(id, affine(id, -1.0, 1.0))));
                    break;
                case Op::log:
                    accumulate(adj, n.a, div(g, n.a));
                    break;
                case Op::exp:
                    accumulate(adj, n.a, mul(g, id));
                    break;
                case Op::square:
                    accumulate(adj, n.a, mul(g, affine(n.a, 2.0, 0.0)));
                    break;
                case Op::sqrt:
                    accumulate(adj, n.a, div(g, affine(id, 2.0, 0.0)));
                    break;
                case Op::leaky_relu:
                    accumulate(adj, n.a, mul(g, leaky_mask(n.a, n.c0)));
                    break;
                case Op::leaky_mask:
                case Op::above_mask:
                case Op::below_mask:
                    // Piecewise constant: zero derivative almost everywhere.
                    break;
                case Op::clip_min:
                    // Gradient passes only where the operand strictly exceeds the bound.
                    accumulate(adj, n.a, mul(g, above_mask(n.a, n.c0)));
                    break;
                case Op::clip_max:
                    accumulate(adj, n.a, mul(g, below_mask(n.a, n.c0)));
                    break;
                case Op::affine:
                    accumulate(adj, n.a, affine(g, n.c0, 0.0));
                    break;
                case Op::softmax_rows: {
                    int t = mul(g, id);
                    accumulate(adj, n.a, sub(t, mul(id, tile_cols(row_sums(t), n.cols))));
                    break;
                }
                case Op::row_l2_norm:
                    // d norm_r / d x_rc = x_rc / norm_r, with 0 at the zero vector.
                    accumulate(adj, n.a, mul(n.a, tile_cols(div_or_zero(g, id), node(n.a).cols)));
                    break;
            }
        }
        return adjoint_cache_.emplace(output, std::move(adj)).first->second;
    }

    // Gradient of a scalar node w.r.t. any node, as a node in the same graph.
    // Returns a zero constant when the output does not depend on `wrt`.
    int gradient_node(int output, int wrt) {
        const auto& adj = adjoints(output);
        auto it = adj.find(wrt);
        if (it != adj.end()) return it->second;
        return constant(Tensor::matrix(node(wrt).rows, node(wrt).cols, 0.0));
    }

    struct BackwardResult {
        std::map<std::string, Tensor> grads;
        std::vector<Tensor> extras;
    };

    // Gradients of a scalar node for all trainable leaves, plus the values of
    // any extra nodes, computed in a single pass. Unused parameters get zero
    // tensors of the parameter shape.
    BackwardResult backward_with(int output, const Bindings& bindings,
                                 const std::vector<int>& extras) {
        const auto& adj = adjoints(output);
        std::vector<std::string> names;
        std::vector<int> targets;
        BackwardResult result;
        for (const auto& [name, id] : leaves_) {
            const Node& n = node(id);
            if (!n.trainable) continue;
            auto it = adj.find(id);
            if (it == adj.end()) {
                result.grads[name] = Tensor::matrix(n.rows, n.cols, 0.0);
            } else {
                names.push_back(name);
                targets.push_back(it->second);
            }
        }
        for (int id : extras) targets.push_back(id);
        std::vector<Tensor> values = evaluate(bindings, targets);
        for (std::size_t i = 0; i < names.size(); ++i) {
            result.grads[names[i]] = std::move(values[i]);
        }
        for (std::size_t i = names.size(); i < values.size(); ++i) {
            result.extras.push_back(std::move(values[i]));
        }
        return result;
    }

    std::map<std::string, Tensor> backward(int output, const Bindings& bindings) {
        return backward_with(output, bindings, {}).grads;
    }

private:
    std::vector<Node> nodes_;
    std::map<std::string, int> leaves_;
    std::map<int, std::map<int, int>> adjoint_cache_;

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int leaf(const std::string& name, std::size_t rows, std::size_t cols, bool trainable) {
        auto it = leaves_.find(name);
        if (it != leaves_.end()) {
            const Node& n = node(it->second);
                TIGAN_ENSURE(n.rows == rows && n.cols == cols && n.trainable == trainable,
                         "leaf redeclared with different shape or trainability: " + name);
            return it->second;
        }
        Node n;
        n.op = trainable ? Op::param : Op::input;
        n.rows = rows;
        n.cols = cols;
        n.name = name;
        n.trainable = trainable;
        int id = push(std::move(n));
        leaves_[name] = id;
        return id;
    }

    int unary(Op op, int a) {
        Node n;
        n.op = op;
        n.a = a;
        n.rows = node(a).rows;
        n.cols = node(a).cols;
        return push(std::move(n));
    }

    int binary_same(Op op, int a, int b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        TIGAN_ENSURE(na.rows == nb.rows && na.cols == nb.cols,
                     std::string(op_name(op)) + ": shapes disagree, " + describe(a) + " vs " +
                         describe(b));
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.rows = na.rows;
        n.cols = na.cols;
        return push(std::move(n));
    }

    void accumulate(std::map<int, int>& adj, int parent, int contribution) {
        auto it = adj.find(parent);
        if (it == adj.end()) {
            adj[parent] = contribution;
        } else {
            it->second = add(it->second, contribution);
        }
    }

    void check_finite(int id, const Tensor& t) const {
        TIGAN_ENSURE(t.all_finite(), "non-finite value in node " + describe(id));
    }

    void compute(int id, const Bindings& bindings, std::vector<Tensor>& values) const {
        const Node& n = node(id);
        Tensor& out = values[static_cast<std::size_t>(id)];
        const Tensor* ta = n.a >= 0 ? &values[static_cast<std::size_t>(n.a)] : nullptr;
        const Tensor* tb = n.b >= 0 ? &values[static_cast<std::size_t>(n.b)] : nullptr;

        switch (n.op) {
            case Op::input:
            case Op::param: {
                const Tensor* bound = bindings.find(n.name);
                TIGAN_ENSURE(bound != nullptr, "evaluate: leaf not bound: " + n.name);
                TIGAN_ENSURE(bound->rows() == n.rows && bound->cols() == n.cols,
                             "evaluate: binding shape mismatch for " + n.name + ": expected " +
                                 std::to_string(n.rows) + "x" + std::to_string(n.cols) + ", got " +
                                 shape_str(bound->shape));
                out = *bound;
                break;
            }
            case Op::constant:
                out = n.value;
                break;
            case Op::add:
            case Op::sub:
            case Op::mul:
            case Op::div:
            case Op::div_or_zero: {
                out = Tensor::matrix(n.rows, n.cols);
                const std::size_t count = out.numel();
                for (std::size_t i = 0; i < count; ++i) {
                    double x = ta->values[i];
                    double y = tb->values[i];
                    double r = 0.0;
                    switch (n.op) {
                        case Op::add: r = x + y; break;
                        case Op::sub: r = x - y; break;
                        case Op::mul: r = x * y; break;
                        case Op::div: r = x / y; break;
                        case Op::div_or_zero: r = (y == 0.0) ? 0.0 : x / y; break;
                        default: break;
                    }
                    out.values[i] = r;
                }
                break;
            }
            case Op::matmul: {
                out = Tensor::matrix(n.rows, n.cols);
                const std::size_t m = ta->rows(), k = ta->cols(), p = tb->cols();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = &ta->values[i * k];
                    double* orow = &out.values[i * p];
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        if (av == 0.0) continue;  // bow batches are mostly zeros
                        const double* brow = &tb->values[kk * p];
                        for (std::size_t j = 0; j < p; ++j) {
                            orow[j] += av * brow[j];
                        }
                    }
                }
                break;
            }
            case Op::transpose: {
                out = Tensor::matrix(n.rows, n.cols);
                for (std::size_t i = 0; i < ta->rows(); ++i) {
                    for (std::size_t j = 0; j < ta->cols(); ++j) {
                        out.at(j, i) = ta->at(i, j);
                    }
                }
                break;
            }
            case Op::bias_add: {
                out = *ta;
                for (std::size_t i = 0; i < n.rows; ++i) {
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        out.at(i, j) += tb->values[j];
                    }
                }
                break;
            }
            case Op::concat_cols: {
                out = Tensor::matrix(n.rows, n.cols);
                const std::size_t ca = ta->cols(), cb = tb->cols();
                for (std::size_t i = 0; i < n.rows; ++i) {
                    for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = ta->at(i, j);
                    for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = tb->at(i, j);
                }
                break;
            }
            case Op::slice_cols: {
                out = Tensor::matrix(n.rows, n.cols);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        out.at(i, j) = ta->at(i, n.i0 + j);
                    }
                }
                break;
            }
            case Op::pad_cols: {
                out = Tensor::matrix(n.rows, n.cols, 0.0);
                for (std::size_t i = 0; i < ta->rows(); ++i) {
                    for (std::size_t j = 0; j < ta->cols(); ++j) {
                        out.at(i, n.i0 + j) = ta->at(i, j);
                    }
                }
                break;
            }
            case Op::tile_rows: {
                out = Tensor::matrix(n.rows, n.cols);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        out.at(i, j) = ta->values[j];
                    }
                }
                break;
            }
            case Op::tile_cols: {
                out = Tensor::matrix(n.rows, n.cols);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        out.at(i, j) = ta->values[i];
                    }
                }
                break;
            }
            case Op::tile_scalar:
                out = Tensor::matrix(n.rows, n.cols, ta->values[0]);
                break;
            case Op::col_sums: {
                out = Tensor::matrix(1, n.cols, 0.0);
                for (std::size_t i = 0; i < ta->rows(); ++i) {
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        out.values[j] += ta->at(i, j);
                    }
                }
                break;
            }
            case Op::row_sums: {
                out = Tensor::matrix(n.rows, 1, 0.0);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < ta->cols(); ++j) s += ta->at(i, j);
                    out.values[i] = s;
                }
                break;
            }
            case Op::sum_all: {
                double s = 0.0;
                for (double v : ta->values) s += v;
                out = Tensor::scalar(s);
                break;
            }
            case Op::sigmoid:
            case Op::log:
            case Op::exp:
            case Op::square:
            case Op::sqrt:
            case Op::leaky_relu:
            case Op::leaky_mask:
            case Op::above_mask:
            case Op::below_mask:
            case Op::clip_min:
            case Op::clip_max:
            case Op::affine: {
                out = Tensor::matrix(n.rows, n.cols);
                const std::size_t count = out.numel();
                for (std::size_t i = 0; i < count; ++i) {
                    double x = ta->values[i];
                    double r = 0.0;
                    switch (n.op) {
                        case Op::sigmoid: r = 1.0 / (1.0 + std::exp(-x)); break;
                        case Op::log: r = std::log(x); break;
                        case Op::exp: r = std::exp(x); break;
                        case Op::square: r = x * x; break;
                        case Op::sqrt: r = std::sqrt(x); break;
                        case Op::leaky_relu: r = x > 0.0 ? x : n.c0 * x; break;
                        case Op::leaky_mask: r = x > 0.0 ? 1.0 : n.c0; break;
                        case Op::above_mask: r = x > n.c0 ? 1.0 : 0.0; break;
                        case Op::below_mask: r = x < n.c0 ? 1.0 : 0.0; break;
                        case Op::clip_min: r = x > n.c0 ? x : n.c0; break;
                        case Op::clip_max: r = x < n.c0 ? x : n.c0; break;
                        case Op::affine: r = n.c0 * x + n.c1; break;
                        default: break;
                    }
                    out.values[i] = r;
                }
                break;
            }
            case Op::softmax_rows: {
                out = Tensor::matrix(n.rows, n.cols);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    double mx = ta->at(i, 0);
                    for (std::size_t j = 1; j < n.cols; ++j) mx = std::max(mx, ta->at(i, j));
                    double denom = 0.0;
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        double e = std::exp(ta->at(i, j) - mx);
                        out.at(i, j) = e;
                        denom += e;
                    }
                    for (std::size_t j = 0; j < n.cols; ++j) out.at(i, j) /= denom;
                }
                break;
            }
            case Op::row_l2_norm: {
                out = Tensor::matrix(n.rows, 1);
                for (std::size_t i = 0; i < n.rows; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < ta->cols(); ++j) {
                        double v = ta->at(i, j);
                        s += v * v;
                    }
                    out.values[i] = std::sqrt(s);
                }
                break;
            }
        }
        check_finite(id, out);
    }
};

// Central finite differences, (f(p + eps e_i) - f(p - eps e_i)) / 2 eps.
// Independent of the graph machinery; test oracle for backward().
inline Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                         const Tensor& point, double eps) {
    ensure(eps > 0.0, "finite_difference_gradient: eps must be positive");
    Tensor grad(point.shape, 0.0);
    Tensor p = point;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        const double saved = p.values[i];
        p.values[i] = saved + eps;
        double fp = f(p);
        p.values[i] = saved - eps;
        double fm = f(p);
        p.values[i] = saved;
        ensure(std::isfinite(fp) && std::isfinite(fm),
               "finite_difference_gradient: non-finite function value");
        grad.values[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace tigan
