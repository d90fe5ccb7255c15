#pragma once

// Layer primitives (dense, batch norm), MLP composition and the Adam
// optimizer. Layers are plain value objects; the graph builders below are
// what training uses, the *_forward helpers wrap them for direct calls.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tigan/graph.hpp"
#include "tigan/tensor.hpp"

namespace tigan {

constexpr double kLeakySlope = 0.2;

enum class Activation { linear, sigmoid, leaky_relu, softmax };
enum class Mode { train, eval };

struct DenseLayer {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out
};

inline DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer layer;
    layer.weight = Tensor::matrix(in, out);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : layer.weight.values) {
        v = rng.normal() * stddev;
    }
    layer.bias = Tensor::matrix(1, out, 0.0);
    return layer;
}

struct BatchNormLayer {
    Tensor gain;          // 1 x F
    Tensor shift;         // 1 x F
    Tensor running_mean;  // 1 x F
    Tensor running_var;   // 1 x F
    double momentum = 0.9;
    double epsilon = 1e-5;
};

inline BatchNormLayer make_batchnorm(std::size_t features) {
    BatchNormLayer layer;
    layer.gain = Tensor::matrix(1, features, 1.0);
    layer.shift = Tensor::matrix(1, features, 0.0);
    layer.running_mean = Tensor::matrix(1, features, 0.0);
    layer.running_var = Tensor::matrix(1, features, 1.0);
    return layer;
}

struct MlpLayer {
    DenseLayer dense;
    std::optional<BatchNormLayer> bn;
    Activation act = Activation::linear;
};

struct Mlp {
    std::vector<MlpLayer> layers;

    std::size_t input_width() const { return layers.front().dense.weight.rows(); }
    std::size_t output_width() const { return layers.back().dense.weight.cols(); }
};

// hidden widths may be empty (a single dense output layer).
inline Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                    Activation out_act, bool batch_norm_hidden, Rng& rng) {
    Mlp mlp;
    std::size_t width = in;
    for (std::size_t h : hidden) {
        MlpLayer layer;
        layer.dense = make_dense(width, h, rng);
        if (batch_norm_hidden) layer.bn = make_batchnorm(h);
        layer.act = Activation::leaky_relu;
        mlp.layers.push_back(std::move(layer));
        width = h;
    }
    MlpLayer head;
    head.dense = make_dense(width, out, rng);
    head.act = out_act;
    mlp.layers.push_back(std::move(head));
    return mlp;
}

// ---- graph building ----
//
// Parameters enter the graph as named leaves: <prefix>.l<i>.w / .b and, for
// batch-normed layers, .g / .s plus running-stat inputs .rm / .rv in eval
// mode. bind_mlp fills a Bindings with matching entries.

struct BatchStatNodes {
    std::size_t layer;  // index into Mlp::layers
    int mean;
    int var;
};

struct MlpBuild {
    int output = -1;
    std::vector<BatchStatNodes> batch_stats;  // train mode only
};

inline std::string layer_key(const std::string& prefix, std::size_t i, const char* field) {
    return prefix + ".l" + std::to_string(i) + "." + field;
}

inline int append_activation(Graph& g, int x, Activation act) {
    switch (act) {
        case Activation::linear: return x;
        case Activation::sigmoid: return g.sigmoid(x);
        case Activation::leaky_relu: return g.leaky_relu(x, kLeakySlope);
        case Activation::softmax: return g.softmax_rows(x);
    }
    return x;
}

inline MlpBuild append_mlp(Graph& g, const Mlp& mlp, int x, const std::string& prefix,
                           Mode mode, bool trainable = true) {
    MlpBuild build;
    const std::size_t batch = g.node(x).rows;
    int cur = x;
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        const MlpLayer& layer = mlp.layers[i];
        const std::size_t in = layer.dense.weight.rows();
        const std::size_t out = layer.dense.weight.cols();
        int w = trainable ? g.param(layer_key(prefix, i, "w"), in, out)
                          : g.input(layer_key(prefix, i, "w"), in, out);
        int b = trainable ? g.param(layer_key(prefix, i, "b"), 1, out)
                          : g.input(layer_key(prefix, i, "b"), 1, out);
        cur = g.bias_add(g.matmul(cur, w), b);

        if (layer.bn) {
            int gain = trainable ? g.param(layer_key(prefix, i, "g"), 1, out)
                                 : g.input(layer_key(prefix, i, "g"), 1, out);
            int shift = trainable ? g.param(layer_key(prefix, i, "s"), 1, out)
                                  : g.input(layer_key(prefix, i, "s"), 1, out);
            if (mode == Mode::train) {
                ensure(batch >= 2, "batch norm in train mode needs batch size >= 2 (" +
                                       prefix + ", layer " + std::to_string(i) + ")");
                const double inv_b = 1.0 / static_cast<double>(batch);
                int mean = g.affine(g.col_sums(cur), inv_b, 0.0);
                int centered = g.sub(cur, g.tile_rows(mean, batch));
                int var = g.affine(g.col_sums(g.square(centered)), inv_b, 0.0);
                int denom = g.sqrt(g.affine(var, 1.0, layer.bn->epsilon));
                int standardized = g.div(centered, g.tile_rows(denom, batch));
                cur = g.bias_add(g.mul(standardized, g.tile_rows(gain, batch)), shift);
                build.batch_stats.push_back({i, mean, var});
            } else {
                int rm = g.input(layer_key(prefix, i, "rm"), 1, out);
                int rv = g.input(layer_key(prefix, i, "rv"), 1, out);
                int denom = g.sqrt(g.affine(rv, 1.0, layer.bn->epsilon));
                int standardized = g.div(g.sub(cur, g.tile_rows(rm, batch)), g.tile_rows(denom, batch));
                cur = g.bias_add(g.mul(standardized, g.tile_rows(gain, batch)), shift);
            }
        }
        cur = append_activation(g, cur, layer.act);
    }
    build.output = cur;
    return build;
}

inline void bind_mlp(Bindings& bindings, const Mlp& mlp, const std::string& prefix) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        const MlpLayer& layer = mlp.layers[i];
        bindings.set(layer_key(prefix, i, "w"), layer.dense.weight);
        bindings.set(layer_key(prefix, i, "b"), layer.dense.bias);
        if (layer.bn) {
            bindings.set(layer_key(prefix, i, "g"), layer.bn->gain);
            bindings.set(layer_key(prefix, i, "s"), layer.bn->shift);
            bindings.set(layer_key(prefix, i, "rm"), layer.bn->running_mean);
            bindings.set(layer_key(prefix, i, "rv"), layer.bn->running_var);
        }
    }
}

// new_running = momentum * running + (1 - momentum) * batch_stat
inline void update_running_stats(Mlp& mlp, const MlpBuild& build,
                                 const std::vector<Tensor>& means,
                                 const std::vector<Tensor>& vars) {
    for (std::size_t k = 0; k < build.batch_stats.size(); ++k) {
        BatchNormLayer& bn = *mlp.layers[build.batch_stats[k].layer].bn;
        const double m = bn.momentum;
        for (std::size_t j = 0; j < bn.running_mean.numel(); ++j) {
            bn.running_mean.values[j] = m * bn.running_mean.values[j] + (1.0 - m) * means[k].values[j];
            bn.running_var.values[j] = m * bn.running_var.values[j] + (1.0 - m) * vars[k].values[j];
        }
    }
}

// Direct forward pass. Train mode updates running statistics as a side
// effect, matching what the training loop does with the same graph.
inline Tensor mlp_forward(Mlp& mlp, const Tensor& batch, Mode mode) {
    ensure(batch.rows() >= 1, "mlp_forward: empty batch");
    Graph g;
    int x = g.input("x", batch.rows(), batch.cols());
    MlpBuild build = append_mlp(g, mlp, x, "mlp", mode);
    Bindings bindings;
    bindings.set("x", batch);
    bind_mlp(bindings, mlp, "mlp");

    std::vector<int> targets{build.output};
    for (const auto& s : build.batch_stats) {
        targets.push_back(s.mean);
        targets.push_back(s.var);
    }
    std::vector<Tensor> values = g.evaluate(bindings, targets);
    if (mode == Mode::train && !build.batch_stats.empty()) {
        std::vector<Tensor> means, vars;
        for (std::size_t k = 0; k < build.batch_stats.size(); ++k) {
            means.push_back(values[1 + 2 * k]);
            vars.push_back(values[2 + 2 * k]);
        }
        update_running_stats(mlp, build, means, vars);
    }
    return values[0];
}

inline Tensor mlp_forward(const Mlp& mlp, const Tensor& batch, Mode mode) {
    ensure(mode == Mode::eval, "const mlp_forward is eval-mode only");
    Mlp& mutable_ref = const_cast<Mlp&>(mlp);  // eval path never writes
    return mlp_forward(mutable_ref, batch, mode);
}

inline Tensor batchnorm_forward(BatchNormLayer& layer, const Tensor& batch, Mode mode) {
    ensure(batch.all_finite(), "batchnorm_forward: non-finite input");
    Mlp shim;
    MlpLayer l;
    const std::size_t f = batch.cols();
    l.dense.weight = Tensor::matrix(f, f, 0.0);
    for (std::size_t j = 0; j < f; ++j) l.dense.weight.at(j, j) = 1.0;
    l.dense.bias = Tensor::matrix(1, f, 0.0);
    l.bn = layer;
    l.act = Activation::linear;
    shim.layers.push_back(std::move(l));
    Tensor out = mlp_forward(shim, batch, mode);
    if (mode == Mode::train) {
        layer = *shim.layers[0].bn;  // running stats moved back out
    }
    return out;
}

// ---- Adam ----

struct AdamHyper {
    double lr = 5e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
    long step_count = 0;
};

using ParamRefs = std::map<std::string, Tensor*>;

inline void adam_step(ParamRefs& params, const std::map<std::string, Tensor>& grads,
                      AdamState& state, const AdamHyper& hyper) {
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step_count));
    for (auto& [name, param] : params) {
        auto git = grads.find(name);
        ensure(git != grads.end(), "adam_step: missing gradient for " + name);
        const Tensor& grad = git->second;
        ensure(grad.shape == param->shape, "adam_step: gradient shape mismatch for " + name);
        ensure(grad.all_finite(), "adam_step: non-finite gradient for " + name);

        Tensor& m = state.first_moment.try_emplace(name, param->shape, 0.0).first->second;
        Tensor& v = state.second_moment.try_emplace(name, param->shape, 0.0).first->second;
        for (std::size_t i = 0; i < param->numel(); ++i) {
            const double gval = grad.values[i];
            m.values[i] = hyper.beta1 * m.values[i] + (1.0 - hyper.beta1) * gval;
            v.values[i] = hyper.beta2 * v.values[i] + (1.0 - hyper.beta2) * gval * gval;
            const double mhat = m.values[i] / bc1;
            const double vhat = v.values[i] / bc2;
            param->values[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
        }
    }
}

}  // namespace tigan
