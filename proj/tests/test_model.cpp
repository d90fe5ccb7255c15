#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "support/checkers.hpp"
#include "tigan/model.hpp"

using namespace tigan;
using testsupport::gradcheck;
using testsupport::random_matrix;

namespace {

// Small corpus + config used throughout this suite.
struct Fixture {
    Vocabulary vocab;
    BowDataset dataset;
    EmbeddingMatrix embeddings;
    TiganConfig config;

    explicit Fixture(int topics = 3, std::uint64_t seed = 400) {
        SyntheticSpec spec;
        spec.topics = topics;
        spec.words_per_topic = 6;
        spec.shared_words = 8;
        spec.docs_per_topic = 30;
        spec.doc_length = 8;
        spec.noise_rate = 0.2;
        auto corpus = synthetic_corpus(spec, seed);
        auto prep = preprocess(corpus.lines, PreprocessConfig{});
        vocab = std::move(prep.vocab);
        dataset = std::move(prep.dataset);

        SgnsConfig sgns;
        sgns.dim = 10;
        sgns.epochs = 1;
        sgns.seed = seed;
        std::vector<std::vector<std::string>> docs;
        PreprocessConfig pc;
        for (const auto& line : corpus.lines) {
            docs.push_back(tokenize(split_label_line(line).second, pc));
        }
        embeddings = train_sgns(docs, vocab, sgns);

        config.topics = topics;
        config.z_dim = 7;
        config.g_hidden = 12;
        config.g_layers = 2;
        config.d_hidden = 10;
        config.d_layers = 2;
        config.e_hidden = 9;
        config.embed_dim = 10;
        config.batch_size = 8;
        config.epochs = 1;
        config.seed = 42;
    }

    TiganModel model() const { return init_model(config, vocab, &embeddings); }

    Tensor batch(std::size_t n, std::uint64_t seed = 9) const {
        Rng rng(seed);
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back(rng.uniform_index(dataset.size()));
        return dataset.dense_batch(ids);
    }
};

}  // namespace

TEST_CASE("model initialization") {
    SECTION("generator widths follow K, z_dim and V") {
        Fixture f;
        TiganConfig config = f.config;
        config.topics = 4;
        config.z_dim = 200;
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        REQUIRE(model.gen.input_width() == 204);
        REQUIRE(model.gen.output_width() == f.vocab.words.size());
        REQUIRE(model.critic.input_width() == f.vocab.words.size());
        REQUIRE(model.noise_pred.output_width() == 200);
    }

    SECTION("same seed gives bitwise-identical parameters") {
        Fixture f;
        TiganModel a = f.model();
        TiganModel b = f.model();
        bool equal = true;
        for_each_state_tensor(a, [&](const std::string& name, Tensor& t) {
            TiganModel& other = b;
            for_each_state_tensor(other, [&](const std::string& name2, Tensor& t2) {
                if (name == name2 && !(t == t2)) equal = false;
            });
        });
        REQUIRE(equal);
    }

    SECTION("linear variant parameter count is V*K + K") {
        Fixture f;
        TiganConfig config = f.config;
        config.q_variant = QVariant::linear;
        TiganModel model = init_model(config, f.vocab, nullptr);
        std::size_t count = 0;
        for_each_trainable(model, [&](const std::string& name, Tensor& t) {
            if (name.rfind("q.", 0) == 0) count += t.numel();
        });
        const std::size_t v = f.vocab.words.size();
        REQUIRE(count == v * static_cast<std::size_t>(config.topics) +
                             static_cast<std::size_t>(config.topics));
    }

    SECTION("sif variant without embeddings is an error") {
        Fixture f;
        REQUIRE_THROWS_AS(init_model(f.config, f.vocab, nullptr), Error);
    }
}

TEST_CASE("latent sampling") {
    SECTION("K=1 always returns the single one-hot") {
        Rng rng(1);
        for (int i = 0; i < 5; ++i) {
            Tensor c = sample_topic_code(1, rng);
            REQUIRE(c.values == std::vector<double>{1.0});
        }
    }

    SECTION("topic codes are uniform one-hots") {
        Rng rng(2);
        const int k = 4, draws = 100000;
        std::vector<int> hits(k, 0);
        for (int i = 0; i < draws; ++i) {
            Tensor c = sample_topic_code(k, rng);
            double sum = 0.0;
            int hot = -1;
            for (int j = 0; j < k; ++j) {
                sum += c.values[static_cast<std::size_t>(j)];
                if (c.values[static_cast<std::size_t>(j)] == 1.0) hot = j;
            }
            REQUIRE(sum == 1.0);
            hits[static_cast<std::size_t>(hot)] += 1;
        }
        for (int j = 0; j < k; ++j) {
            REQUIRE(std::fabs(hits[static_cast<std::size_t>(j)] / double(draws) - 0.25) < 0.01);
        }
    }

    SECTION("noise is standard normal with the requested width") {
        Rng rng(3);
        Tensor z = sample_noise(200, rng);
        REQUIRE(z.cols() == 200);

        double mean = 0.0, var = 0.0;
        const int draws = 100000;
        std::vector<double> xs;
        for (int i = 0; i < draws; ++i) xs.push_back(sample_noise(1, rng).item());
        for (double x : xs) mean += x;
        mean /= draws;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= draws;
        REQUIRE(std::fabs(mean) < 0.02);
        REQUIRE(std::fabs(var - 1.0) < 0.03);
    }

    SECTION("seeded noise is reproducible") {
        Rng a(77), b(77);
        REQUIRE(sample_noise_batch(3, 5, a) == sample_noise_batch(3, 5, b));
    }
}

TEST_CASE("network forwards") {
    Fixture f;

    SECTION("generator outputs stay strictly inside (0,1) and eval mode is deterministic") {
        TiganModel model = f.model();
        Rng rng(5);
        Tensor c = sample_topic_codes(4, model.topics, rng);
        Tensor z = sample_noise_batch(4, model.z_dim, rng);
        Tensor out1 = generator_forward(model, c, z);
        Tensor out2 = generator_forward(model, c, z);
        REQUIRE(out1 == out2);
        for (double v : out1.values) {
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
        }
    }

    SECTION("generator gradient w.r.t. the noise matches finite differences") {
        TiganModel model = f.model();
        Graph g;
        int c = g.input("c", 2, static_cast<std::size_t>(model.topics));
        int z = g.param("z", 2, static_cast<std::size_t>(model.z_dim));
        GeneratorBuild gen = append_generator(g, model, c, z, Mode::train, /*trainable=*/false);
        int loss = g.mean_all(g.square(gen.output));
        Rng rng(6);
        std::map<std::string, Tensor> leaves;
        leaves["c"] = sample_topic_codes(2, model.topics, rng);
        leaves["z"] = sample_noise_batch(2, model.z_dim, rng);
        TiganModel& m = model;
        for_each_state_tensor(m, [&](const std::string& name, Tensor& t) { leaves[name] = t; });
        REQUIRE(gradcheck(g, loss, leaves) < 1e-4);
    }

    SECTION("zero-weight critic scores everything with its bias") {
        TiganModel model = f.model();
        for (auto& layer : model.critic.layers) {
            for (double& v : layer.dense.weight.values) v = 0.0;
            for (double& v : layer.dense.bias.values) v = 0.0;
        }
        model.critic.layers.back().dense.bias.values[0] = 1.25;
        Tensor scores = discriminator_forward(model, f.batch(5));
        for (double s : scores.values) REQUIRE(s == 1.25);
    }

    SECTION("critic accepts binary rows and continuous generator output alike") {
        TiganModel model = f.model();
        Rng rng(7);
        Tensor fake = generator_forward(model, sample_topic_codes(3, model.topics, rng),
                                        sample_noise_batch(3, model.z_dim, rng));
        REQUIRE(discriminator_forward(model, fake).rows() == 3);
        REQUIRE(discriminator_forward(model, f.batch(3)).rows() == 3);
    }

    SECTION("permuting batch rows permutes critic scores identically") {
        TiganModel model = f.model();
        Tensor batch = f.batch(6);
        Tensor scores = discriminator_forward(model, batch);
        std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
        Tensor shuffled = Tensor::matrix(6, batch.cols());
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < batch.cols(); ++j) {
                shuffled.at(i, j) = batch.at(perm[i], j);
            }
        }
        Tensor scores2 = discriminator_forward(model, shuffled);
        for (std::size_t i = 0; i < 6; ++i) {
            REQUIRE(scores2.values[i] == scores.values[perm[i]]);
        }
    }

    SECTION("topic classifier rows are distributions") {
        TiganModel model = f.model();
        Tensor probs = topic_classifier_forward(model, f.batch(5));
        for (std::size_t i = 0; i < 5; ++i) {
            double sum = 0.0;
            for (int k = 0; k < model.topics; ++k) {
                double p = probs.at(i, static_cast<std::size_t>(k));
                REQUIRE(p >= 0.0);
                sum += p;
            }
            REQUIRE(std::fabs(sum - 1.0) < 1e-9);
        }
    }

    SECTION("linear variant with zero weights is uniform") {
        TiganConfig config = f.config;
        config.q_variant = QVariant::linear;
        TiganModel model = init_model(config, f.vocab, nullptr);
        for (double& v : model.q.out.weight.values) v = 0.0;
        for (double& v : model.q.out.bias.values) v = 0.0;
        Tensor probs = topic_classifier_forward(model, f.batch(4));
        for (double p : probs.values) {
            REQUIRE(p == Catch::Approx(1.0 / f.config.topics));
        }
    }

    SECTION("sif classifier output is per-example: duplication does not change rows") {
        TiganModel model = f.model();
        Tensor one = f.batch(1);
        Tensor doubled = Tensor::matrix(2, one.cols());
        for (std::size_t j = 0; j < one.cols(); ++j) {
            doubled.at(0, j) = one.at(0, j);
            doubled.at(1, j) = one.at(0, j);
        }
        Tensor alone = topic_classifier_forward(model, one);
        Tensor dup = topic_classifier_forward(model, doubled);
        for (int k = 0; k < model.topics; ++k) {
            REQUIRE(alone.at(0, static_cast<std::size_t>(k)) == dup.at(0, static_cast<std::size_t>(k)));
            REQUIRE(alone.at(0, static_cast<std::size_t>(k)) == dup.at(1, static_cast<std::size_t>(k)));
        }
    }

    SECTION("sif classifier rejects all-zero rows") {
        TiganModel model = f.model();
        Tensor zero = Tensor::matrix(1, model.vocab_size, 0.0);
        REQUIRE_THROWS_AS(topic_classifier_forward(model, zero), Error);
    }

    SECTION("zero-weight noise predictor returns its bias, width z_dim") {
        TiganModel model = f.model();
        for (auto& layer : model.noise_pred.layers) {
            for (double& v : layer.dense.weight.values) v = 0.0;
            for (double& v : layer.dense.bias.values) v = 0.0;
        }
        for (std::size_t j = 0; j < model.noise_pred.layers.back().dense.bias.numel(); ++j) {
            model.noise_pred.layers.back().dense.bias.values[j] = 0.5 * static_cast<double>(j);
        }
        Tensor zhat = noise_predictor_forward(model, f.batch(2));
        REQUIRE(zhat.cols() == static_cast<std::size_t>(model.z_dim));
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < zhat.cols(); ++j) {
                REQUIRE(zhat.at(i, j) == 0.5 * static_cast<double>(j));
            }
        }
    }

    SECTION("noise predictor gradients match finite differences") {
        TiganModel model = f.model();
        Graph g;
        int x = g.input("x", 3, model.vocab_size);
        int zhat = append_noise_predictor(g, model, x);
        int loss = g.mean_all(g.square(zhat));
        std::map<std::string, Tensor> leaves;
        leaves["x"] = f.batch(3);
        for_each_state_tensor(model, [&](const std::string& name, Tensor& t) { leaves[name] = t; });
        REQUIRE(gradcheck(g, loss, leaves) < 1e-4);
    }

    SECTION("sif classifier gradients, including the weight scalar, match finite differences") {
        TiganConfig config = f.config;
        config.finetune_embeddings = true;  // a_raw, embeddings and the linear map all live
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        Graph g;
        int x = g.input("x", 4, model.vocab_size);
        QBuild q = append_topic_classifier(g, model, x);
        int code = g.input("code", 4, static_cast<std::size_t>(model.topics));
        int loss = append_clipped_categorical(g, code, q.probs, 0.0);
        std::map<std::string, Tensor> leaves;
        leaves["x"] = f.batch(4);
        Rng rng(23);
        leaves["code"] = sample_topic_codes(4, model.topics, rng);
        for_each_state_tensor(model, [&](const std::string& name, Tensor& t) { leaves[name] = t; });
        REQUIRE(gradcheck(g, loss, leaves) < 1e-4);
    }
}

TEST_CASE("loss terms") {
    SECTION("wgan loss is mean(fake) - mean(real)") {
        Tensor real = Tensor::matrix(2, 1);
        real.values = {1.5, 2.5};  // mean 2.0
        Tensor fake = Tensor::matrix(2, 1);
        fake.values = {0.5, 1.5};  // mean 1.0
        REQUIRE(wgan_discriminator_loss(real, fake) == -1.0);
        REQUIRE(wgan_discriminator_loss(real, real) == 0.0);
    }

    SECTION("wgan loss equals straight-line mean arithmetic on random batches") {
        Rng rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor real = random_matrix(7, 1, rng, -5, 5);
            Tensor fake = random_matrix(7, 1, rng, -5, 5);
            double mr = 0, mf = 0;
            for (double v : real.values) mr += v;
            for (double v : fake.values) mf += v;
            mr /= 7; mf /= 7;
            REQUIRE(std::fabs(wgan_discriminator_loss(real, fake) - (mf - mr)) < 1e-12);
        }
    }

    SECTION("perfect prediction clips to alpha") {
        Tensor c = Tensor::matrix(2, 3, 0.0);
        c.at(0, 1) = 1.0;
        c.at(1, 2) = 1.0;
        REQUIRE(clipped_categorical_loss(c, c, 0.15) == 0.15);
    }

    SECTION("cross-entropy above the clip is untouched") {
        Tensor c = Tensor::matrix(1, 2, 0.0);
        c.at(0, 0) = 1.0;
        Tensor q = Tensor::matrix(1, 2);
        q.at(0, 0) = std::exp(-0.5);  // ce = 0.5
        q.at(0, 1) = 1.0 - std::exp(-0.5);
        REQUIRE(clipped_categorical_loss(c, q, 0.15) == Catch::Approx(0.5).margin(1e-12));
    }

    SECTION("clipped examples send exactly zero gradient to the classifier") {
        Graph g;
        int c = g.input("c", 1, 2);
        int logits = g.param("logits", 1, 2);
        int probs = g.softmax_rows(logits);
        int loss = append_clipped_categorical(g, c, probs, 0.15);

        Tensor code = Tensor::row({1.0, 0.0});
        Tensor confident = Tensor::row({5.0, -5.0});  // ce ~ 4.5e-5 < alpha
        Bindings b1;
        b1.set("c", code);
        b1.set("logits", confident);
        Tensor zero_grad = g.backward(loss, b1).at("logits");
        REQUIRE(zero_grad == Tensor::matrix(1, 2, 0.0));

        Tensor uncertain = Tensor::row({0.3, -0.1});  // ce ~ 0.51 > alpha
        Bindings b2;
        b2.set("c", code);
        b2.set("logits", uncertain);
        Tensor live_grad = g.backward(loss, b2).at("logits");
        REQUIRE(std::fabs(live_grad.values[0]) > 1e-3);

        // the live gradient also matches finite differences
        std::map<std::string, Tensor> leaves{{"c", code}, {"logits", uncertain}};
        REQUIRE(gradcheck(g, loss, leaves) < 1e-4);
    }

    SECTION("bce at one half is ln 2 and vanishes in the binary limit") {
        Tensor x = Tensor::row({1.0, 0.0, 1.0});
        Tensor half = Tensor::row({0.5, 0.5, 0.5});
        REQUIRE(reconstruction_loss(x, half) == Catch::Approx(std::log(2.0)).margin(1e-12));

        Tensor near = Tensor::row({1.0 - 1e-13, 1e-13, 1.0 - 1e-13});
        REQUIRE(reconstruction_loss(x, near) < 1e-10);
    }

    SECTION("bce equals a straight-line oracle on random batches") {
        Rng rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor x = Tensor::matrix(4, 6);
            for (double& v : x.values) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
            Tensor xh = Tensor::matrix(4, 6);
            for (double& v : xh.values) v = 0.05 + 0.9 * rng.uniform();
            double oracle = 0.0;
            for (std::size_t i = 0; i < x.numel(); ++i) {
                oracle += -(x.values[i] * std::log(xh.values[i]) +
                            (1.0 - x.values[i]) * std::log(1.0 - xh.values[i]));
            }
            oracle /= static_cast<double>(x.numel());
            REQUIRE(std::fabs(reconstruction_loss(x, xh) - oracle) < 1e-10);
        }
    }
}

TEST_CASE("gradient penalty") {
    Fixture f;

    // a critic reduced to a single linear layer with a chosen weight norm
    auto linear_critic = [&](double norm) {
        TiganConfig config = f.config;
        config.d_layers = 0;
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        auto& w = model.critic.layers[0].dense.weight;
        for (double& v : w.values) v = 0.0;
        w.values[0] = norm;
        model.critic.layers[0].dense.bias.values[0] = 0.7;
        return model;
    };

    SECTION("unit-norm linear critic has zero penalty") {
        TiganModel model = linear_critic(1.0);
        Rng rng(10);
        Tensor fake = random_matrix(4, f.vocab.words.size(), rng, 0.0, 1.0);
        REQUIRE(gradient_penalty(model, f.batch(4), fake, rng) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("norm-3 linear critic has penalty 4") {
        TiganModel model = linear_critic(3.0);
        Rng rng(11);
        Tensor fake = random_matrix(4, f.vocab.words.size(), rng, 0.0, 1.0);
        REQUIRE(gradient_penalty(model, f.batch(4), fake, rng) == Catch::Approx(4.0).margin(1e-12));
    }

    SECTION("penalty parameter gradients match finite differences") {
        TiganModel model = f.model();
        Graph g;
        int xh = g.input("xh", 3, model.vocab_size);
        PenaltyBuild build = append_gradient_penalty(g, model, xh);
        Rng rng(12);
        std::map<std::string, Tensor> leaves;
        leaves["xh"] = random_matrix(3, model.vocab_size, rng, 0.0, 1.0);
        for_each_state_tensor(model, [&](const std::string& name, Tensor& t) { leaves[name] = t; });
        REQUIRE(gradcheck(g, build.penalty, leaves) < 1e-3);
    }
}

TEST_CASE("training steps") {
    Fixture f;

    SECTION("critic update direction matches the analytic wgan gradient for a linear critic") {
        TiganConfig config = f.config;
        config.d_layers = 0;
        config.lambda_gp = 0.0;
        config.critic_steps = 1;
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        Tensor w_before = model.critic.layers[0].dense.weight;

        Tensor real = f.batch(8);
        TrainState state;
        Rng rng(13);

        // replay the rng stream the step will use to recover c and z
        Rng replay(13);
        Tensor code = sample_topic_codes(8, model.topics, replay);
        Tensor noise = sample_noise_batch(8, model.z_dim, replay);
        TiganModel copy = model;
        Tensor fake = generator_forward(copy, code, noise, Mode::train);

        infogan_step(model, state, real, config, rng);

        // analytic gradient of mean(fake) - mean(real) for D(x) = x w + b
        Tensor analytic = Tensor::matrix(model.vocab_size, 1, 0.0);
        for (std::size_t j = 0; j < model.vocab_size; ++j) {
            double mf = 0.0, mr = 0.0;
            for (std::size_t i = 0; i < 8; ++i) {
                mf += fake.at(i, j);
                mr += real.at(i, j);
            }
            analytic.values[j] = (mf - mr) / 8.0;
        }
        // first Adam step moves each coordinate by -lr * sign(gradient)
        const Tensor& w_after = model.critic.layers[0].dense.weight;
        for (std::size_t j = 0; j < model.vocab_size; ++j) {
            if (std::fabs(analytic.values[j]) < 1e-9) continue;
            const double delta = w_after.values[j] - w_before.values[j];
            REQUIRE(delta * analytic.values[j] < 0.0);
            REQUIRE(std::fabs(delta) == Catch::Approx(config.adam.lr).epsilon(1e-3));
        }
    }

    SECTION("lambda_mi = 0 leaves the classifier untouched") {
        TiganConfig config = f.config;
        config.lambda_mi = 0.0;
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        Tensor w_before = model.q.out.weight;
        Tensor a_before = model.q.a_raw;
        TrainState state;
        Rng rng(14);
        infogan_step(model, state, f.batch(8), config, rng);
        REQUIRE(model.q.out.weight == w_before);
        REQUIRE(model.q.a_raw == a_before);
    }

    SECTION("losses stay finite over 200 adversarial steps") {
        TiganConfig config = f.config;
        config.critic_steps = 2;
        TiganModel model = init_model(config, f.vocab, &f.embeddings);
        TrainState state;
        Rng rng(15);
        for (int i = 0; i < 200; ++i) {
            StepLosses losses = infogan_step(model, state, f.batch(8, 100 + i), config, rng);
            REQUIRE(std::isfinite(losses.d_loss));
            REQUIRE(std::isfinite(losses.gp));
            REQUIRE(std::isfinite(losses.adv));
            REQUIRE(std::isfinite(losses.q_loss));
        }
    }

    SECTION("autoencoder steps reduce reconstruction loss on a fixed batch") {
        TiganModel model = f.model();
        TrainState state;
        Tensor batch = f.batch(8);
        TiganConfig config = f.config;
        config.adam.lr = 2e-3;
        double first = autoencoder_step(model, state, batch, config);
        double last = first;
        for (int i = 0; i < 49; ++i) {
            last = autoencoder_step(model, state, batch, config);
        }
        REQUIRE(last < first);
    }

    SECTION("autoencoder trains E and leaves D untouched") {
        TiganModel model = f.model();
        Tensor e_before = model.noise_pred.layers[0].dense.weight;
        Tensor d_before = model.critic.layers[0].dense.weight;
        TrainState state;
        autoencoder_step(model, state, f.batch(8), f.config);
        REQUIRE(!(model.noise_pred.layers[0].dense.weight == e_before));
        REQUIRE(model.critic.layers[0].dense.weight == d_before);
    }

    SECTION("generator outputs remain in (0,1) during training") {
        TiganModel model = f.model();
        TrainState state;
        Rng rng(18);
        for (int i = 0; i < 20; ++i) {
            infogan_step(model, state, f.batch(8, 200 + i), f.config, rng);
            autoencoder_step(model, state, f.batch(8, 300 + i), f.config);
        }
        Tensor out = generator_forward(model, sample_topic_codes(4, model.topics, rng),
                                       sample_noise_batch(4, model.z_dim, rng));
        for (double v : out.values) {
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
        }
    }
}

TEST_CASE("training loop") {
    Fixture f;

    SECTION("deterministic: same seed, same data, identical final parameters") {
        TiganConfig config = f.config;
        config.epochs = 2;
        auto a = train(config, f.dataset, f.vocab, &f.embeddings);
        auto b = train(config, f.dataset, f.vocab, &f.embeddings);
        bool equal = true;
        for_each_state_tensor(a.model, [&](const std::string& name, Tensor& t) {
            for_each_state_tensor(b.model, [&](const std::string& name2, Tensor& t2) {
                if (name == name2 && !(t == t2)) equal = false;
            });
        });
        REQUIRE(equal);
    }

    SECTION("history length equals the step count and callbacks fire per epoch") {
        TiganConfig config = f.config;
        config.epochs = 3;
        int checkpoints = 0, finals = 0;
        long steps_seen = 0;
        TrainCallbacks callbacks;
        callbacks.on_checkpoint = [&](int, const TiganModel&, const TrainState&, bool final) {
            if (final) ++finals; else ++checkpoints;
        };
        callbacks.on_step = [&](long, const StepLosses&) { ++steps_seen; };
        auto result = train(config, f.dataset, f.vocab, &f.embeddings, callbacks);
        REQUIRE(result.state.history.size() == static_cast<std::size_t>(result.state.step));
        REQUIRE(steps_seen == result.state.step);
        REQUIRE(checkpoints == 3);
        REQUIRE(finals == 1);
        // 90 documents, batch 8 -> 11 full batches per epoch
        REQUIRE(result.state.step == 3 * 11);
    }
}
