#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "tigan/baselines.hpp"
#include "tigan/eval.hpp"
#include "tigan/model.hpp"

using namespace tigan;

namespace {

Vocabulary tiny_vocab(const std::vector<std::string>& words) {
    Vocabulary v;
    v.words = words;
    for (std::size_t i = 0; i < words.size(); ++i) {
        v.index.emplace(words[i], static_cast<int>(i));
        v.counts.push_back(1);
        v.freq.push_back(1.0 / static_cast<double>(words.size()));
    }
    v.total_kept_tokens = words.size();
    return v;
}

BowDataset dataset_from_rows(std::size_t vocab_size,
                             const std::vector<std::vector<std::uint32_t>>& rows) {
    BowDataset d;
    d.vocab_size = vocab_size;
    d.rows = rows;
    return d;
}

// Linear-variant model whose Q softmax is fully determined by its bias.
TiganModel fixed_bias_model(const std::vector<double>& log_probs, std::size_t vocab_size) {
    TiganModel model;
    model.vocab_size = vocab_size;
    model.topics = static_cast<int>(log_probs.size());
    model.z_dim = 2;
    model.q.variant = QVariant::linear;
    model.q.out.weight = Tensor::matrix(vocab_size, log_probs.size(), 0.0);
    model.q.out.bias = Tensor::row(std::vector<double>(log_probs));
    return model;
}

}  // namespace

TEST_CASE("infer topics") {
    SECTION("argmax of the classifier, ties toward the lower index") {
        auto data = dataset_from_rows(3, {{0}, {1, 2}});
        TiganModel skewed = fixed_bias_model({std::log(0.7), std::log(0.2), std::log(0.1)}, 3);
        auto assignment = infer_topics(skewed, data);
        REQUIRE(assignment.topic == std::vector<int>{0, 0});
        REQUIRE(assignment.confidence[0] == Catch::Approx(0.7));

        TiganModel tied = fixed_bias_model({1.5, 1.5}, 3);
        auto tie = infer_topics(tied, data);
        REQUIRE(tie.topic == std::vector<int>{0, 0});
        REQUIRE(tie.confidence[0] == Catch::Approx(0.5));
    }

    SECTION("row permutation permutes assignments identically") {
        SyntheticSpec spec;
        spec.topics = 3;
        spec.words_per_topic = 5;
        spec.shared_words = 5;
        spec.docs_per_topic = 12;
        spec.doc_length = 6;
        auto corpus = synthetic_corpus(spec, 21);
        auto prep = preprocess(corpus.lines, PreprocessConfig{});
        TiganConfig config;
        config.topics = 3;
        config.z_dim = 4;
        config.g_hidden = 8;
        config.g_layers = 1;
        config.d_hidden = 8;
        config.d_layers = 1;
        config.e_hidden = 8;
        config.q_variant = QVariant::linear;
        config.seed = 5;
        TiganModel model = init_model(config, prep.vocab, nullptr);

        auto direct = infer_topics(model, prep.dataset);
        std::vector<std::size_t> perm(prep.dataset.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
        BowDataset shuffled = prep.dataset;
        for (std::size_t i = 0; i < perm.size(); ++i) shuffled.rows[i] = prep.dataset.rows[perm[i]];
        auto after = infer_topics(model, shuffled);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            REQUIRE(after.topic[i] == direct.topic[perm[i]]);
        }
    }
}

TEST_CASE("vote accuracy") {
    auto make_assignment = [](std::vector<int> topic) {
        ClusterAssignment a;
        a.confidence.assign(topic.size(), 1.0);
        a.topic = std::move(topic);
        return a;
    };

    SECTION("perfectly aligned clusters score 1.0") {
        auto vote = vote_accuracy(make_assignment({0, 0, 1, 1}), {0, 0, 1, 1}, 2);
        REQUIRE(vote.accuracy == 1.0);
        REQUIRE(vote.topic_to_label == std::vector<int>{0, 1});
    }

    SECTION("plurality vote with a minority mistake") {
        auto vote = vote_accuracy(make_assignment({0, 0, 0, 1}), {0, 1, 0, 1}, 2);
        REQUIRE(vote.topic_to_label == std::vector<int>{0, 1});
        REQUIRE(vote.accuracy == 0.75);
    }

    SECTION("plurality ties break toward the smaller label id") {
        auto vote = vote_accuracy(make_assignment({0, 0}), {1, 0}, 1);
        REQUIRE(vote.topic_to_label == std::vector<int>{0});
    }

    SECTION("empty clusters map to -1 and contribute nothing") {
        auto vote = vote_accuracy(make_assignment({0, 0, 1, 1}), {0, 0, 1, 1}, 3);
        REQUIRE(vote.topic_to_label == std::vector<int>{0, 1, -1});
        REQUIRE(vote.accuracy == 1.0);
    }

    SECTION("labels scored against themselves is exactly 1") {
        Rng rng(31);
        std::vector<int> labels;
        for (int i = 0; i < 50; ++i) labels.push_back(static_cast<int>(rng.uniform_index(5)));
        auto vote = vote_accuracy(make_assignment(std::vector<int>(labels)), labels, 5);
        REQUIRE(vote.accuracy == 1.0);
    }

    SECTION("matches an exhaustive per-cluster plurality oracle") {
        Rng rng(32);
        for (int trial = 0; trial < 100; ++trial) {
            const int topics = 2 + static_cast<int>(rng.uniform_index(4));
            const int label_count = 2 + static_cast<int>(rng.uniform_index(4));
            const std::size_t n = 5 + rng.uniform_index(40);
            std::vector<int> topic(n), labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                topic[i] = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(topics)));
                labels[i] = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(label_count)));
            }
            auto vote = vote_accuracy(make_assignment(std::vector<int>(topic)), labels, topics);

            // oracle: for every cluster pick the plurality label by scanning
            long correct = 0;
            for (int k = 0; k < topics; ++k) {
                std::map<int, long> hist;
                for (std::size_t i = 0; i < n; ++i) {
                    if (topic[i] == k) hist[labels[i]] += 1;
                }
                int best_label = -1;
                long best = 0;
                for (const auto& [l, c] : hist) {
                    if (c > best) {
                        best = c;
                        best_label = l;  // map iterates ascending: ties keep the smaller id
                    }
                }
                REQUIRE(vote.topic_to_label[static_cast<std::size_t>(k)] == best_label);
                for (std::size_t i = 0; i < n; ++i) {
                    if (topic[i] == k && labels[i] == best_label) ++correct;
                }
            }
            REQUIRE(vote.accuracy == Catch::Approx(double(correct) / double(n)).margin(1e-15));
        }
    }
}

TEST_CASE("topical words") {
    SECTION("identity embeddings and basis-vector rows pick the expected words") {
        const std::size_t v = 4;
        TiganModel model;
        model.vocab_size = v;
        model.topics = 2;
        model.z_dim = 2;
        model.q.variant = QVariant::mlp_random_embed;
        model.q.embed = Tensor::matrix(v, v, 0.0);
        for (std::size_t i = 0; i < v; ++i) model.q.embed.at(i, i) = 1.0;
        model.q.out.weight = Tensor::matrix(v, 2, 0.0);
        model.q.out.weight.at(2, 0) = 1.0;  // M row 0 = e_2
        model.q.out.weight.at(1, 1) = 1.0;  // M row 1 = e_1
        model.q.out.bias = Tensor::matrix(1, 2, 0.0);

        auto vocab = tiny_vocab({"w0", "w1", "w2", "w3"});
        auto table = extract_topical_words(model, vocab, 1);
        REQUIRE(table.topics[0][0].word == "w2");
        REQUIRE(table.topics[1][0].word == "w1");
    }

    // Ranking must agree with the oracle exactly; scores to 1e-9 (the oracle
    // is a separately compiled loop, so contraction may round differently).
    SECTION("matches the dense product-and-sort oracle") {
        Rng rng(33);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t v = 5 + rng.uniform_index(10);
            const std::size_t d = 2 + rng.uniform_index(6);
            const int topics = 2 + static_cast<int>(rng.uniform_index(3));
            TiganModel model;
            model.vocab_size = v;
            model.topics = topics;
            model.z_dim = 2;
            model.q.variant = QVariant::mlp_random_embed;
            model.q.embed = Tensor::matrix(v, d);
            for (double& x : model.q.embed.values) x = rng.normal();
            model.q.out.weight = Tensor::matrix(d, static_cast<std::size_t>(topics));
            for (double& x : model.q.out.weight.values) x = rng.normal();
            model.q.out.bias = Tensor::matrix(1, static_cast<std::size_t>(topics), 0.0);

            std::vector<std::string> words;
            for (std::size_t i = 0; i < v; ++i) words.push_back("w" + std::to_string(i));
            auto vocab = tiny_vocab(words);
            const int top_n = 1 + static_cast<int>(rng.uniform_index(v));
            auto table = extract_topical_words(model, vocab, top_n);

            for (int k = 0; k < topics; ++k) {
                std::vector<std::pair<double, int>> scores;
                for (std::size_t w = 0; w < v; ++w) {
                    double c = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        c += model.q.out.weight.at(j, static_cast<std::size_t>(k)) *
                             model.q.embed.at(w, j);
                    }
                    scores.push_back({c, static_cast<int>(w)});
                }
                std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
                    if (a.first != b.first) return a.first > b.first;
                    return a.second < b.second;
                });
                for (int i = 0; i < top_n; ++i) {
                    REQUIRE(table.topics[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].index ==
                            scores[static_cast<std::size_t>(i)].second);
                    REQUIRE(table.topics[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].score ==
                            Catch::Approx(scores[static_cast<std::size_t>(i)].first).margin(1e-9));
                }
            }
        }
    }

    SECTION("linear variant reads the weight matrix directly") {
        TiganModel model;
        model.vocab_size = 3;
        model.topics = 2;
        model.z_dim = 2;
        model.q.variant = QVariant::linear;
        model.q.out.weight = Tensor::matrix(3, 2, 0.0);
        model.q.out.weight.at(1, 0) = 2.0;
        model.q.out.weight.at(0, 1) = 3.0;
        model.q.out.bias = Tensor::matrix(1, 2, 0.0);
        auto table = extract_topical_words(model, tiny_vocab({"aa", "bb", "cc"}), 1);
        REQUIRE(table.topics[0][0].word == "bb");
        REQUIRE(table.topics[1][0].word == "aa");
    }

    SECTION("top_n beyond the vocabulary is an error") {
        TiganModel model = fixed_bias_model({0.0, 0.0}, 3);
        REQUIRE_THROWS_AS(extract_topical_words(model, tiny_vocab({"aa", "bb", "cc"}), 4), Error);
    }
}

TEST_CASE("npmi coherence") {
    SECTION("perfectly co-occurring words score 1") {
        REQUIRE(npmi_pair(0.5, 0.5, 0.5) == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(npmi_pair(0.25, 0.25, 0.25) == Catch::Approx(1.0).margin(1e-9));
    }

    SECTION("independent words score 0") {
        REQUIRE(npmi_pair(0.5, 0.4, 0.2) == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("three-document hand fixture matches frozen values") {
        // docs: {aa,bb,cc}, {aa,bb}, {aa,dd} over vocab aa,bb,cc,dd
        auto data = dataset_from_rows(4, {{0, 1, 2}, {0, 1}, {0, 3}});
        // values computed independently from the documented formula
        REQUIRE(npmi_of_sets({{0, 1, 2}}, data) ==
                Catch::Approx(0.12302341547493618).margin(1e-9));
        REQUIRE(npmi_of_sets({{1, 3}}, data) ==
                Catch::Approx(-0.9455656238522175).margin(1e-9));
        REQUIRE(npmi_of_sets({{0, 1, 2}, {1, 3}}, data) ==
                Catch::Approx(-0.41127110418864066).margin(1e-9));
    }

    SECTION("symmetric in the word pair and bounded in [-1, 1]") {
        Rng rng(34);
        for (int trial = 0; trial < 200; ++trial) {
            double pi = 0.05 + 0.9 * rng.uniform();
            double pj = 0.05 + 0.9 * rng.uniform();
            double pij = rng.uniform() * std::min(pi, pj);
            REQUIRE(npmi_pair(pi, pj, pij) == npmi_pair(pj, pi, pij));
            REQUIRE(npmi_pair(pi, pj, pij) <= 1.0 + 1e-9);
            REQUIRE(npmi_pair(pi, pj, pij) >= -1.0 - 1e-9);
        }
    }

    SECTION("words absent from the dataset skip their pairs") {
        auto data = dataset_from_rows(5, {{0, 1}, {0, 1}, {2}});
        std::size_t skipped = 0;
        double score = npmi_of_sets({{0, 1, 4}}, data, &skipped);
        REQUIRE(skipped == 2);  // (0,4) and (1,4)
        REQUIRE(score == Catch::Approx(npmi_of_sets({{0, 1}}, data)));
    }

    SECTION("table interface takes the top words per topic") {
        auto data = dataset_from_rows(3, {{0, 1}, {0, 1}, {2}});
        TopicWordTable table;
        table.topics = {{{0, "w0", 3.0}, {1, "w1", 2.0}, {2, "w2", 1.0}}};
        std::size_t skipped = 0;
        double top2 = npmi_coherence(table, data, 2, &skipped);
        REQUIRE(top2 == Catch::Approx(npmi_of_sets({{0, 1}}, data)));
        REQUIRE(skipped == 0);
        REQUIRE_THROWS_AS(npmi_coherence(table, data, 1), Error);
    }
}

TEST_CASE("disentanglement probes") {
    // Small generator over a 12-word vocabulary. Zeroing the first-layer
    // weight rows for the code (or the noise) makes G ignore that input.
    auto make_model = [](bool ignore_code, bool ignore_noise) {
        TiganConfig config;
        config.topics = 3;
        config.z_dim = 4;
        config.g_hidden = 10;
        config.g_layers = 1;
        config.d_hidden = 4;
        config.d_layers = 1;
        config.e_hidden = 4;
        config.q_variant = QVariant::linear;
        config.seed = 77;
        auto vocab = tiny_vocab({"a0", "a1", "a2", "a3", "b0", "b1", "b2", "b3",
                                 "c0", "c1", "c2", "c3"});
        TiganModel model = init_model(config, vocab, nullptr);
        Tensor& w = model.gen.layers[0].dense.weight;
        if (ignore_code) {
            for (int r = 0; r < config.topics; ++r) {
                for (std::size_t j = 0; j < w.cols(); ++j) w.at(static_cast<std::size_t>(r), j) = 0.0;
            }
        }
        if (ignore_noise) {
            for (std::size_t r = static_cast<std::size_t>(config.topics); r < w.rows(); ++r) {
                for (std::size_t j = 0; j < w.cols(); ++j) w.at(r, j) = 0.0;
            }
        }
        return model;
    };

    SECTION("a generator ignoring the code has full cross-code overlap") {
        TiganModel model = make_model(true, false);
        Rng rng(40);
        auto report = disentanglement_report(model, 4, 5, 5, rng);
        REQUIRE(report.cross_code.mean == 1.0);
        REQUIRE(report.cross_code.stddev == 0.0);
    }

    SECTION("a generator ignoring the noise has full within-code overlap") {
        TiganModel model = make_model(false, true);
        Rng rng(41);
        auto report = disentanglement_report(model, 4, 5, 5, rng);
        REQUIRE(report.within_code.mean == 1.0);
        REQUIRE(report.within_code.stddev == 0.0);
    }
}
