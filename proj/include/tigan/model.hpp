#pragma once

// The four TIGAN networks (generator, critic, topic classifier, noise
// predictor), every loss term, and the alternating adversarial /
// auto-encoder training schedule.
//
// Conventions baked in here:
//  - the generator input is the concatenation of the topic code c and the
//    noise z,
//  - the critic is trained with the Wasserstein loss plus a gradient penalty
//    on per-example real/fake interpolates,
//  - the categorical loss is cross-entropy floored at alpha_clip, so examples
//    already below the floor stop contributing gradient,
//  - the auto-encoder phase reconstructs x from G(Q(x), E(x)) under binary
//    cross-entropy; the critic is untouched there.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tigan/corpus.hpp"
#include "tigan/embeddings.hpp"
#include "tigan/graph.hpp"
#include "tigan/nn.hpp"

namespace tigan {

enum class QVariant { sif, mlp_random_embed, linear };

inline const char* q_variant_name(QVariant v) {
    switch (v) {
        case QVariant::sif: return "sif";
        case QVariant::mlp_random_embed: return "mlp_random_embed";
        case QVariant::linear: return "linear";
    }
    return "?";
}

inline QVariant q_variant_from_name(const std::string& name) {
    if (name == "sif") return QVariant::sif;
    if (name == "mlp_random_embed") return QVariant::mlp_random_embed;
    if (name == "linear") return QVariant::linear;
    throw Error("unknown q_variant: " + name);
}

struct TiganConfig {
    int topics = 0;          // K, required
    int z_dim = 200;
    double lambda_mi = 0.1;  // weight of the categorical term in the G/Q objective
    double alpha_clip = 0.15;
    double lambda_gp = 10.0;
    int critic_steps = 5;
    int batch_size = 64;
    int epochs = 10;
    std::uint64_t seed = 7;
    QVariant q_variant = QVariant::sif;
    bool finetune_embeddings = false;
    bool autoencoder = true;  // alternate the reconstruction phase 1:1
    int g_hidden = 1000;
    int g_layers = 3;
    int d_hidden = 500;
    int d_layers = 2;
    int e_hidden = 500;
    int embed_dim = 100;  // Q embedding width when trained from scratch
    AdamHyper adam;

    void validate() const {
        ensure(topics >= 2, "config: topics must be at least 2");
        ensure(z_dim >= 1, "config: z_dim must be positive");
        ensure(lambda_mi >= 0.0 && lambda_gp >= 0.0, "config: loss weights must be non-negative");
        ensure(alpha_clip >= 0.0, "config: alpha_clip must be non-negative");
        ensure(critic_steps >= 1 && batch_size >= 2, "config: bad training shape");
        ensure(g_layers >= 0 && d_layers >= 0, "config: negative layer counts");
    }
};

// Per-variant topic classifier.
//  sif / mlp_random_embed: SIF-weighted embedding average -> linear -> softmax
//  linear:                 single linear V -> K -> softmax
struct TopicClassifier {
    QVariant variant = QVariant::sif;
    Tensor embed;      // V x d (empty for the linear variant)
    Tensor a_raw;      // 1 x 1, effective SIF constant is exp(a_raw)
    Tensor word_freq;  // 1 x V, p(w) from the vocabulary
    DenseLayer out;    // d x K (sif variants) or V x K (linear)
    bool train_embed = false;
};

struct TiganModel {
    std::size_t vocab_size = 0;
    int topics = 0;
    int z_dim = 0;
    Mlp gen;
    Mlp critic;
    Mlp noise_pred;
    TopicClassifier q;
};

// Seeded, deterministic initialization. The sif variant requires pretrained
// embeddings; mlp_random_embed draws its own trainable table.
inline TiganModel init_model(const TiganConfig& config, const Vocabulary& vocab,
                             const EmbeddingMatrix* embeddings) {
    config.validate();
    const std::size_t v = vocab.words.size();
    ensure(v >= 2, "init_model: vocabulary too small");

    Rng rng(config.seed);
    TiganModel model;
    model.vocab_size = v;
    model.topics = config.topics;
    model.z_dim = config.z_dim;

    std::vector<std::size_t> g_hidden(static_cast<std::size_t>(config.g_layers),
                                      static_cast<std::size_t>(config.g_hidden));
    model.gen = make_mlp(static_cast<std::size_t>(config.topics + config.z_dim), g_hidden, v,
                         Activation::sigmoid, /*batch_norm_hidden=*/true, rng);

    std::vector<std::size_t> d_hidden(static_cast<std::size_t>(config.d_layers),
                                      static_cast<std::size_t>(config.d_hidden));
    model.critic = make_mlp(v, d_hidden, 1, Activation::linear, false, rng);

    TopicClassifier& q = model.q;
    q.variant = config.q_variant;
    q.a_raw = Tensor::scalar(std::log(1e-3));
    if (config.q_variant == QVariant::linear) {
        q.out = make_dense(v, static_cast<std::size_t>(config.topics), rng);
    } else {
        q.word_freq = Tensor::matrix(1, v);
        for (std::size_t i = 0; i < v; ++i) q.word_freq.values[i] = vocab.freq[i];
        if (config.q_variant == QVariant::sif) {
            ensure(embeddings != nullptr, "init_model: the sif variant requires pretrained embeddings");
            ensure(embeddings->vocab_size() == v, "init_model: embedding table does not match the vocabulary");
            q.embed = embeddings->vectors;
            q.train_embed = config.finetune_embeddings;
        } else {
            q.embed = Tensor::matrix(v, static_cast<std::size_t>(config.embed_dim));
            const double stddev = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
            for (double& x : q.embed.values) x = rng.normal() * stddev;
            q.train_embed = true;
        }
        q.out = make_dense(q.embed.cols(), static_cast<std::size_t>(config.topics), rng);
    }

    model.noise_pred = make_mlp(v, {static_cast<std::size_t>(config.e_hidden)},
                                static_cast<std::size_t>(config.z_dim), Activation::linear, false, rng);
    return model;
}

// ---- parameter registry ----
//
// Prefixes: g. d. q. e. — each network owns one Adam state.

inline void for_each_mlp_tensor(Mlp& mlp, const std::string& prefix, bool include_running,
                                const std::function<void(const std::string&, Tensor&)>& fn) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        MlpLayer& layer = mlp.layers[i];
        fn(layer_key(prefix, i, "w"), layer.dense.weight);
        fn(layer_key(prefix, i, "b"), layer.dense.bias);
        if (layer.bn) {
            fn(layer_key(prefix, i, "g"), layer.bn->gain);
            fn(layer_key(prefix, i, "s"), layer.bn->shift);
            if (include_running) {
                fn(layer_key(prefix, i, "rm"), layer.bn->running_mean);
                fn(layer_key(prefix, i, "rv"), layer.bn->running_var);
            }
        }
    }
}

// Trainable parameters only (what Adam updates).
inline void for_each_trainable(TiganModel& model,
                               const std::function<void(const std::string&, Tensor&)>& fn) {
    for_each_mlp_tensor(model.gen, "g", false, fn);
    for_each_mlp_tensor(model.critic, "d", false, fn);
    for_each_mlp_tensor(model.noise_pred, "e", false, fn);
    fn("q.out.w", model.q.out.weight);
    fn("q.out.b", model.q.out.bias);
    if (model.q.variant != QVariant::linear) {
        fn("q.a_raw", model.q.a_raw);
        if (model.q.train_embed) fn("q.embed", model.q.embed);
    }
}

// Everything a checkpoint must carry to reproduce inference: trainables plus
// batch-norm running statistics, frozen embeddings and word frequencies.
inline void for_each_state_tensor(TiganModel& model,
                                  const std::function<void(const std::string&, Tensor&)>& fn) {
    for_each_mlp_tensor(model.gen, "g", true, fn);
    for_each_mlp_tensor(model.critic, "d", true, fn);
    for_each_mlp_tensor(model.noise_pred, "e", true, fn);
    fn("q.out.w", model.q.out.weight);
    fn("q.out.b", model.q.out.bias);
    if (model.q.variant != QVariant::linear) {
        fn("q.a_raw", model.q.a_raw);
        fn("q.embed", model.q.embed);
        fn("q.word_freq", model.q.word_freq);
    }
}

inline std::size_t parameter_count(TiganModel& model) {
    std::size_t n = 0;
    for_each_trainable(model, [&](const std::string&, Tensor& t) { n += t.numel(); });
    return n;
}

inline void bind_model(Bindings& bindings, const TiganModel& model) {
    TiganModel& m = const_cast<TiganModel&>(model);  // bindings hold const pointers
    for_each_state_tensor(m, [&](const std::string& name, Tensor& t) { bindings.set(name, t); });
}

// ---- sampling ----

// One-hot topic code, index uniform over [0, K).
inline Tensor sample_topic_code(int topics, Rng& rng) {
    ensure(topics >= 1, "sample_topic_code: topics must be positive");
    Tensor c = Tensor::matrix(1, static_cast<std::size_t>(topics), 0.0);
    c.values[rng.uniform_index(static_cast<std::size_t>(topics))] = 1.0;
    return c;
}

inline Tensor sample_topic_codes(std::size_t batch, int topics, Rng& rng) {
    Tensor c = Tensor::matrix(batch, static_cast<std::size_t>(topics), 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        c.at(i, rng.uniform_index(static_cast<std::size_t>(topics))) = 1.0;
    }
    return c;
}

inline Tensor sample_noise(int z_dim, Rng& rng) {
    Tensor z = Tensor::matrix(1, static_cast<std::size_t>(z_dim));
    for (double& v : z.values) v = rng.normal();
    return z;
}

inline Tensor sample_noise_batch(std::size_t batch, int z_dim, Rng& rng) {
    Tensor z = Tensor::matrix(batch, static_cast<std::size_t>(z_dim));
    for (double& v : z.values) v = rng.normal();
    return z;
}

// ---- graph builders ----

struct GeneratorBuild {
    int output = -1;  // B x V in (0,1)
    MlpBuild mlp;
};

inline GeneratorBuild append_generator(Graph& g, const TiganModel& model, int code, int noise,
                                       Mode mode, bool trainable = true) {
    GeneratorBuild build;
    int x = g.concat_cols(code, noise);
    build.mlp = append_mlp(g, model.gen, x, "g", mode, trainable);
    build.output = build.mlp.output;
    return build;
}

inline int append_critic(Graph& g, const TiganModel& model, int x, bool trainable = true) {
    return append_mlp(g, model.critic, x, "d", Mode::eval, trainable).output;
}

inline int append_noise_predictor(Graph& g, const TiganModel& model, int x, bool trainable = true) {
    return append_mlp(g, model.noise_pred, x, "e", Mode::eval, trainable).output;
}

// Topic classifier. For the sif variants the document vector is
//   (x .* w) W / rowsum(x)  with per-word weights w_v = a / (a + p_v);
// on binary rows this is exactly the SIF average over present words, and it
// extends smoothly to the generator's continuous outputs.
struct QBuild {
    int probs = -1;   // B x K softmax rows
    int logits = -1;  // B x K
};

inline QBuild append_topic_classifier(Graph& g, const TiganModel& model, int x,
                                      bool trainable = true) {
    const TopicClassifier& q = model.q;
    const std::size_t batch = g.node(x).rows;
    QBuild build;
    int features;
    if (q.variant == QVariant::linear) {
        features = x;
    } else {
        int embed = (trainable && q.train_embed) ? g.param("q.embed", q.embed.rows(), q.embed.cols())
                                                 : g.input("q.embed", q.embed.rows(), q.embed.cols());
        int a_raw = trainable ? g.param("q.a_raw", 1, 1) : g.input("q.a_raw", 1, 1);
        int p = g.input("q.word_freq", 1, model.vocab_size);
        int a = g.tile_scalar(g.exp(a_raw), 1, model.vocab_size);
        int weights = g.div(a, g.add(a, p));  // 1 x V, a/(a+p)
        int weighted = g.mul(x, g.tile_rows(weights, batch));
        int raw = g.matmul(weighted, embed);                      // B x d
        int present = g.row_sums(x);                              // B x 1
        features = g.div(raw, g.tile_cols(present, q.embed.cols()));
    }
    int w = trainable ? g.param("q.out.w", q.out.weight.rows(), q.out.weight.cols())
                      : g.input("q.out.w", q.out.weight.rows(), q.out.weight.cols());
    int b = trainable ? g.param("q.out.b", 1, q.out.bias.cols())
                      : g.input("q.out.b", 1, q.out.bias.cols());
    build.logits = g.bias_add(g.matmul(features, w), b);
    build.probs = g.softmax_rows(build.logits);
    return build;
}

// ---- loss builders ----

// Wasserstein critic loss: mean(fake scores) - mean(real scores).
inline int append_wgan_critic_loss(Graph& g, int real_scores, int fake_scores) {
    return g.sub(g.mean_all(fake_scores), g.mean_all(real_scores));
}

// Per-example cross-entropy floored at alpha, then batch-averaged. The floor
// stops gradient through examples the classifier already fits.
inline int append_clipped_categorical(Graph& g, int code, int q_probs, double alpha) {
    int logq = g.log(g.clip_min(q_probs, 1e-12));
    int ce = g.affine(g.row_sums(g.mul(code, logq)), -1.0, 0.0);  // B x 1
    return g.mean_all(g.clip_min(ce, alpha));
}

// Mean binary cross-entropy over batch and vocabulary, with the prediction
// clamped into [1e-12, 1 - 1e-12].
inline int append_bce(Graph& g, int x, int x_hat) {
    int clamped = g.clip_max(g.clip_min(x_hat, 1e-12), 1.0 - 1e-12);
    int pos = g.mul(x, g.log(clamped));
    int neg = g.mul(g.affine(x, -1.0, 1.0), g.log(g.affine(clamped, -1.0, 1.0)));
    return g.affine(g.mean_all(g.add(pos, neg)), -1.0, 0.0);
}

// Gradient penalty at x_hat: mean over the batch of (||grad_x D(x_hat)|| - 1)^2,
// built through the differentiable input-gradient so the critic's parameter
// gradients include the second-order path.
struct PenaltyBuild {
    int penalty = -1;
    int grad_norms = -1;  // B x 1
};

inline PenaltyBuild append_gradient_penalty(Graph& g, const TiganModel& model, int x_hat) {
    int scores = append_critic(g, model, x_hat, true);
    int total = g.sum_all(scores);
    int gx = g.gradient_node(total, x_hat);
    PenaltyBuild build;
    build.grad_norms = g.row_l2_norm(gx);
    build.penalty = g.mean_all(g.square(g.affine(build.grad_norms, 1.0, -1.0)));
    return build;
}

// ---- forward ops on tensors ----

// Train-mode forwards update batch-norm running statistics, like any
// train-mode pass through the network.
inline Tensor generator_forward(TiganModel& model, const Tensor& code, const Tensor& noise,
                                Mode mode) {
    ensure(code.cols() == static_cast<std::size_t>(model.topics),
           "generator_forward: code width mismatch");
    ensure(noise.cols() == static_cast<std::size_t>(model.z_dim),
           "generator_forward: noise width mismatch");
    ensure(code.rows() == noise.rows(), "generator_forward: batch sizes disagree");
    Graph g;
    int c = g.input("c", code.rows(), code.cols());
    int z = g.input("z", noise.rows(), noise.cols());
    GeneratorBuild build = append_generator(g, model, c, z, mode);
    Bindings b;
    b.set("c", code);
    b.set("z", noise);
    bind_model(b, model);
    std::vector<int> targets{build.output};
    for (const auto& s : build.mlp.batch_stats) {
        targets.push_back(s.mean);
        targets.push_back(s.var);
    }
    auto values = g.evaluate(b, targets);
    if (mode == Mode::train) {
        std::vector<Tensor> means, vars;
        for (std::size_t k = 0; k < build.mlp.batch_stats.size(); ++k) {
            means.push_back(values[1 + 2 * k]);
            vars.push_back(values[2 + 2 * k]);
        }
        update_running_stats(model.gen, build.mlp, means, vars);
    }
    return values[0];
}

inline Tensor generator_forward(const TiganModel& model, const Tensor& code, const Tensor& noise) {
    return generator_forward(const_cast<TiganModel&>(model), code, noise, Mode::eval);
}

inline Tensor discriminator_forward(const TiganModel& model, const Tensor& bow) {
    ensure(bow.cols() == model.vocab_size, "discriminator_forward: input width mismatch");
    Graph g;
    int x = g.input("x", bow.rows(), bow.cols());
    int scores = append_critic(g, model, x);
    Bindings b;
    b.set("x", bow);
    bind_model(b, model);
    return g.evaluate_one(b, scores);
}

inline Tensor topic_classifier_forward(const TiganModel& model, const Tensor& bow) {
    ensure(bow.cols() == model.vocab_size, "topic_classifier_forward: input width mismatch");
    if (model.q.variant != QVariant::linear) {
        for (std::size_t i = 0; i < bow.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < bow.cols(); ++j) s += bow.at(i, j);
            ensure(s > 0.0, "topic_classifier_forward: all-zero row " + std::to_string(i));
        }
    }
    Graph g;
    int x = g.input("x", bow.rows(), bow.cols());
    QBuild build = append_topic_classifier(g, model, x);
    Bindings b;
    b.set("x", bow);
    bind_model(b, model);
    return g.evaluate_one(b, build.probs);
}

inline Tensor noise_predictor_forward(const TiganModel& model, const Tensor& bow) {
    ensure(bow.cols() == model.vocab_size, "noise_predictor_forward: input width mismatch");
    Graph g;
    int x = g.input("x", bow.rows(), bow.cols());
    int zhat = append_noise_predictor(g, model, x);
    Bindings b;
    b.set("x", bow);
    bind_model(b, model);
    return g.evaluate_one(b, zhat);
}

// ---- loss ops on tensors ----

inline double wgan_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores) {
    ensure(real_scores.numel() > 0 && fake_scores.numel() > 0,
           "wgan_discriminator_loss: empty batch");
    Graph g;
    int r = g.input("r", real_scores.rows(), real_scores.cols());
    int f = g.input("f", fake_scores.rows(), fake_scores.cols());
    int loss = append_wgan_critic_loss(g, r, f);
    Bindings b;
    b.set("r", real_scores);
    b.set("f", fake_scores);
    return g.evaluate_one(b, loss).item();
}

inline double clipped_categorical_loss(const Tensor& code, const Tensor& q_out, double alpha) {
    ensure(code.same_shape(q_out), "clipped_categorical_loss: shape mismatch");
    Graph g;
    int c = g.input("c", code.rows(), code.cols());
    int q = g.input("q", q_out.rows(), q_out.cols());
    int loss = append_clipped_categorical(g, c, q, alpha);
    Bindings b;
    b.set("c", code);
    b.set("q", q_out);
    return g.evaluate_one(b, loss).item();
}

inline double reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
    ensure(x.same_shape(x_hat), "reconstruction_loss: shape mismatch");
    Graph g;
    int xn = g.input("x", x.rows(), x.cols());
    int hn = g.input("h", x_hat.rows(), x_hat.cols());
    int loss = append_bce(g, xn, hn);
    Bindings b;
    b.set("x", x);
    b.set("h", x_hat);
    return g.evaluate_one(b, loss).item();
}

// Samples per-example interpolation coefficients, forms x_hat and evaluates
// the penalty scalar. The lambda_gp coefficient is applied by the caller.
inline double gradient_penalty(const TiganModel& model, const Tensor& real, const Tensor& fake,
                               Rng& rng) {
    ensure(real.same_shape(fake), "gradient_penalty: batch shapes disagree");
    const std::size_t batch = real.rows();
    Tensor x_hat = Tensor::matrix(batch, real.cols());
    for (std::size_t i = 0; i < batch; ++i) {
        const double u = rng.uniform();
        for (std::size_t j = 0; j < real.cols(); ++j) {
            x_hat.at(i, j) = u * real.at(i, j) + (1.0 - u) * fake.at(i, j);
        }
    }
    Graph g;
    int xh = g.input("xh", batch, real.cols());
    PenaltyBuild build = append_gradient_penalty(g, model, xh);
    Bindings b;
    b.set("xh", x_hat);
    bind_model(b, model);
    return g.evaluate_one(b, build.penalty).item();
}

// ---- training ----

struct StepLosses {
    double d_loss = 0.0;  // Wasserstein critic loss (last critic update)
    double gp = 0.0;      // raw gradient penalty (last critic update)
    double adv = 0.0;     // generator adversarial term, -mean D(G(c,z))
    double q_loss = 0.0;  // clipped categorical loss
    double recon = 0.0;   // auto-encoder reconstruction loss
};

struct TrainState {
    AdamState gen;
    AdamState critic;
    AdamState q;
    AdamState noise_pred;
    long step = 0;
    int epoch = 0;
    std::vector<StepLosses> history;
};

namespace detail {

inline ParamRefs collect_params(TiganModel& model, const std::string& prefix) {
    ParamRefs refs;
    for_each_trainable(model, [&](const std::string& name, Tensor& t) {
        if (name.rfind(prefix, 0) == 0) refs.emplace(name, &t);
    });
    return refs;
}

inline std::map<std::string, Tensor> filter_grads(const std::map<std::string, Tensor>& grads,
                                                  const std::string& prefix) {
    std::map<std::string, Tensor> out;
    for (const auto& [name, t] : grads) {
        if (name.rfind(prefix, 0) == 0) out.emplace(name, t);
    }
    return out;
}

}  // namespace detail

// One adversarial step: critic_steps Wasserstein critic updates (fresh c, z
// and interpolates each time), then a joint generator / classifier update of
//   -mean D(G(c,z)) + lambda_mi * clipped cross-entropy.
inline StepLosses infogan_step(TiganModel& model, TrainState& state, const Tensor& real,
                               const TiganConfig& config, Rng& rng) {
    const std::size_t batch = real.rows();
    ensure(batch >= 2, "infogan_step: batch size must be at least 2");
    ensure(real.cols() == model.vocab_size, "infogan_step: batch width mismatch");
    StepLosses losses;

    // critic updates
    for (int step = 0; step < config.critic_steps; ++step) {
        Tensor code = sample_topic_codes(batch, model.topics, rng);
        Tensor noise = sample_noise_batch(batch, model.z_dim, rng);

        Graph gg;
        int cn = gg.input("c", batch, static_cast<std::size_t>(model.topics));
        int zn = gg.input("z", batch, static_cast<std::size_t>(model.z_dim));
        GeneratorBuild gen = append_generator(gg, model, cn, zn, Mode::train, /*trainable=*/false);
        Bindings gb;
        gb.set("c", code);
        gb.set("z", noise);
        bind_model(gb, model);
        std::vector<int> gen_targets{gen.output};
        for (const auto& s : gen.mlp.batch_stats) {
            gen_targets.push_back(s.mean);
            gen_targets.push_back(s.var);
        }
        auto gen_values = gg.evaluate(gb, gen_targets);
        Tensor fake = std::move(gen_values[0]);
        {
            std::vector<Tensor> means, vars;
            for (std::size_t k = 0; k < gen.mlp.batch_stats.size(); ++k) {
                means.push_back(gen_values[1 + 2 * k]);
                vars.push_back(gen_values[2 + 2 * k]);
            }
            update_running_stats(model.gen, gen.mlp, means, vars);
        }

        Tensor x_hat = Tensor::matrix(batch, model.vocab_size);
        for (std::size_t i = 0; i < batch; ++i) {
            const double u = rng.uniform();
            for (std::size_t j = 0; j < model.vocab_size; ++j) {
                x_hat.at(i, j) = u * real.at(i, j) + (1.0 - u) * fake.at(i, j);
            }
        }

        Graph dg;
        int xr = dg.input("xr", batch, model.vocab_size);
        int xf = dg.input("xf", batch, model.vocab_size);
        int xh = dg.input("xh", batch, model.vocab_size);
        int real_scores = append_critic(dg, model, xr);
        int fake_scores = append_critic(dg, model, xf);
        int wloss = append_wgan_critic_loss(dg, real_scores, fake_scores);
        PenaltyBuild gp = append_gradient_penalty(dg, model, xh);
        int total = dg.add(wloss, dg.affine(gp.penalty, config.lambda_gp, 0.0));

        Bindings db;
        db.set("xr", real);
        db.set("xf", fake);
        db.set("xh", x_hat);
        bind_model(db, model);
        auto result = dg.backward_with(total, db, {wloss, gp.penalty});
        losses.d_loss = result.extras[0].item();
        losses.gp = result.extras[1].item();
        ensure(std::isfinite(losses.d_loss) && std::isfinite(losses.gp),
               "infogan_step: non-finite critic loss at step " + std::to_string(state.step));

        ParamRefs d_params = detail::collect_params(model, "d.");
        adam_step(d_params, result.grads, state.critic, config.adam);
    }

    // joint generator / classifier update
    {
        Tensor code = sample_topic_codes(batch, model.topics, rng);
        Tensor noise = sample_noise_batch(batch, model.z_dim, rng);

        Graph g;
        int cn = g.input("c", batch, static_cast<std::size_t>(model.topics));
        int zn = g.input("z", batch, static_cast<std::size_t>(model.z_dim));
        GeneratorBuild gen = append_generator(g, model, cn, zn, Mode::train, /*trainable=*/true);
        int scores = append_critic(g, model, gen.output, /*trainable=*/false);
        QBuild q = append_topic_classifier(g, model, gen.output, /*trainable=*/true);
        int adv = g.affine(g.mean_all(scores), -1.0, 0.0);
        int q_loss = append_clipped_categorical(g, cn, q.probs, config.alpha_clip);
        int total = g.add(adv, g.affine(q_loss, config.lambda_mi, 0.0));

        std::vector<int> extras{adv, q_loss};
        for (const auto& s : gen.mlp.batch_stats) {
            extras.push_back(s.mean);
            extras.push_back(s.var);
        }
        Bindings b;
        b.set("c", code);
        b.set("z", noise);
        bind_model(b, model);
        auto result = g.backward_with(total, b, extras);
        losses.adv = result.extras[0].item();
        losses.q_loss = result.extras[1].item();
        ensure(std::isfinite(losses.adv) && std::isfinite(losses.q_loss),
               "infogan_step: non-finite generator loss at step " + std::to_string(state.step));

        std::vector<Tensor> means, vars;
        for (std::size_t k = 0; k < gen.mlp.batch_stats.size(); ++k) {
            means.push_back(result.extras[2 + 2 * k]);
            vars.push_back(result.extras[3 + 2 * k]);
        }
        update_running_stats(model.gen, gen.mlp, means, vars);

        ParamRefs g_params = detail::collect_params(model, "g.");
        adam_step(g_params, detail::filter_grads(result.grads, "g."), state.gen, config.adam);
        ParamRefs q_params = detail::collect_params(model, "q.");
        adam_step(q_params, detail::filter_grads(result.grads, "q."), state.q, config.adam);
    }
    return losses;
}

// One auto-encoder step: jointly update G, Q and E to reconstruct real rows
// from G(Q(x), E(x)) under binary cross-entropy. Q's soft output feeds G
// directly; the critic is not involved.
inline double autoencoder_step(TiganModel& model, TrainState& state, const Tensor& real,
                               const TiganConfig& config) {
    const std::size_t batch = real.rows();
    ensure(batch >= 2, "autoencoder_step: batch size must be at least 2");
    ensure(real.cols() == model.vocab_size, "autoencoder_step: batch width mismatch");

    Graph g;
    int x = g.input("x", batch, model.vocab_size);
    QBuild q = append_topic_classifier(g, model, x, /*trainable=*/true);
    int zhat = append_noise_predictor(g, model, x, /*trainable=*/true);
    GeneratorBuild gen = append_generator(g, model, q.probs, zhat, Mode::train, /*trainable=*/true);
    int loss = append_bce(g, x, gen.output);

    std::vector<int> extras{loss};
    for (const auto& s : gen.mlp.batch_stats) {
        extras.push_back(s.mean);
        extras.push_back(s.var);
    }
    Bindings b;
    b.set("x", real);
    bind_model(b, model);
    auto result = g.backward_with(loss, b, extras);
    double recon = result.extras[0].item();
    ensure(std::isfinite(recon),
           "autoencoder_step: non-finite reconstruction loss at step " + std::to_string(state.step));

    std::vector<Tensor> means, vars;
    for (std::size_t k = 0; k < gen.mlp.batch_stats.size(); ++k) {
        means.push_back(result.extras[1 + 2 * k]);
        vars.push_back(result.extras[2 + 2 * k]);
    }
    update_running_stats(model.gen, gen.mlp, means, vars);

    ParamRefs g_params = detail::collect_params(model, "g.");
    adam_step(g_params, detail::filter_grads(result.grads, "g."), state.gen, config.adam);
    ParamRefs q_params = detail::collect_params(model, "q.");
    adam_step(q_params, detail::filter_grads(result.grads, "q."), state.q, config.adam);
    ParamRefs e_params = detail::collect_params(model, "e.");
    adam_step(e_params, detail::filter_grads(result.grads, "e."), state.noise_pred, config.adam);
    return recon;
}

struct TrainCallbacks {
    // called after every epoch and once more with final=true
    std::function<void(int epoch, const TiganModel&, const TrainState&, bool final)> on_checkpoint;
    std::function<void(long step, const StepLosses&)> on_step;
};

struct TrainResult {
    TiganModel model;
    TrainState state;
};

// Alternating schedule: per batch, one adversarial step then one auto-encoder
// step. Epochs shuffle the document order; a trailing partial batch is
// dropped. Deterministic per config.seed.
inline TrainResult train(const TiganConfig& config, const BowDataset& dataset,
                         const Vocabulary& vocab, const EmbeddingMatrix* embeddings,
                         const TrainCallbacks& callbacks = {}) {
    config.validate();
    ensure(dataset.size() >= 2, "train: dataset needs at least 2 documents");
    ensure(dataset.vocab_size == vocab.words.size(), "train: dataset and vocabulary disagree");

    TrainResult result;
    result.model = init_model(config, vocab, embeddings);
    TiganModel& model = result.model;
    TrainState& state = result.state;

    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                    dataset.size());
    ensure(batch >= 2, "train: effective batch size must be at least 2");

    Rng rng(seed_stream(config.seed, 1));
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        state.epoch = epoch;
        rng.shuffle(order);
        const std::size_t full_batches = dataset.size() / batch;
        for (std::size_t bi = 0; bi < full_batches; ++bi) {
            std::vector<std::size_t> ids(order.begin() + static_cast<long>(bi * batch),
                                         order.begin() + static_cast<long>((bi + 1) * batch));
            Tensor real = dataset.dense_batch(ids);
            StepLosses losses = infogan_step(model, state, real, config, rng);
            if (config.autoencoder) {
                losses.recon = autoencoder_step(model, state, real, config);
            }
            state.step += 1;
            state.history.push_back(losses);
            if (callbacks.on_step) callbacks.on_step(state.step, losses);
        }
        if (callbacks.on_checkpoint) callbacks.on_checkpoint(epoch, model, state, false);
    }
    if (callbacks.on_checkpoint) callbacks.on_checkpoint(config.epochs, model, state, true);
    return result;
}

}  // namespace tigan
