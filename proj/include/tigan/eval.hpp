#pragma once

// Evaluation of a trained model: cluster assignment via the topic classifier,
// majority-vote accuracy against gold labels, topical-word extraction from
// Q's weights, NPMI coherence over the training corpus, and the
// disentanglement probes comparing generated word sets across codes vs noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tigan/corpus.hpp"
#include "tigan/model.hpp"

namespace tigan {

struct ClusterAssignment {
    std::vector<int> topic;         // argmax of Q per document
    std::vector<double> confidence; // the max posterior probability
};

// Argmax of the topic classifier per document; exact ties resolve to the
// lowest topic index.
inline ClusterAssignment infer_topics(const TiganModel& model, const BowDataset& dataset,
                                      std::size_t chunk = 256) {
    ClusterAssignment out;
    std::vector<std::size_t> ids;
    for (std::size_t start = 0; start < dataset.size(); start += chunk) {
        ids.clear();
        const std::size_t end = std::min(dataset.size(), start + chunk);
        for (std::size_t i = start; i < end; ++i) ids.push_back(i);
        Tensor probs = topic_classifier_forward(model, dataset.dense_batch(ids));
        for (std::size_t r = 0; r < ids.size(); ++r) {
            int best = 0;
            double best_p = probs.at(r, 0);
            for (int k = 1; k < model.topics; ++k) {
                const double p = probs.at(r, static_cast<std::size_t>(k));
                if (p > best_p) {
                    best = k;
                    best_p = p;
                }
            }
            out.topic.push_back(best);
            out.confidence.push_back(best_p);
        }
    }
    return out;
}

struct VoteResult {
    std::vector<int> topic_to_label;  // -1 for empty clusters
    double accuracy = 0.0;
};

// Each topic adopts the plurality gold label of its members (ties toward the
// smaller label id); accuracy is the fraction of documents whose topic maps
// to their own label. Several topics may map to one label.
inline VoteResult vote_accuracy(const ClusterAssignment& assignment,
                                const std::vector<int>& labels, int topics) {
    ensure(assignment.topic.size() == labels.size(), "vote_accuracy: length mismatch");
    ensure(!labels.empty(), "vote_accuracy: no labeled documents");
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);

    std::vector<std::vector<long>> votes(static_cast<std::size_t>(topics),
                                         std::vector<long>(static_cast<std::size_t>(max_label) + 1, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        votes[static_cast<std::size_t>(assignment.topic[i])][static_cast<std::size_t>(labels[i])] += 1;
    }

    VoteResult result;
    result.topic_to_label.assign(static_cast<std::size_t>(topics), -1);
    for (int k = 0; k < topics; ++k) {
        long best = 0;
        int arg = -1;
        for (int l = 0; l <= max_label; ++l) {
            long count = votes[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
            if (count > best) {
                best = count;
                arg = l;
            }
        }
        result.topic_to_label[static_cast<std::size_t>(k)] = arg;  // -1 when the cluster is empty
    }

    long correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (result.topic_to_label[static_cast<std::size_t>(assignment.topic[i])] == labels[i]) {
            ++correct;
        }
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    return result;
}

struct ScoredWord {
    int index = -1;
    std::string word;
    double score = 0.0;

    bool operator==(const ScoredWord&) const = default;
};

struct TopicWordTable {
    std::vector<std::vector<ScoredWord>> topics;  // per topic, descending score
};

// Word-importance matrix C = M W^T for the embedding variants (M is Q's
// linear map, W the embedding table); for the linear variant C is the weight
// matrix itself. Rows rank words per topic, ties toward the lower word index.
inline TopicWordTable extract_topical_words(const TiganModel& model, const Vocabulary& vocab,
                                            int top_n) {
    ensure(top_n >= 1, "extract_topical_words: top_n must be positive");
    ensure(static_cast<std::size_t>(top_n) <= model.vocab_size,
           "extract_topical_words: top_n exceeds the vocabulary size");
    ensure(vocab.words.size() == model.vocab_size, "extract_topical_words: vocabulary mismatch");

    const TopicClassifier& q = model.q;
    TopicWordTable table;
    for (int k = 0; k < model.topics; ++k) {
        std::vector<ScoredWord> scored(model.vocab_size);
        for (std::size_t v = 0; v < model.vocab_size; ++v) {
            double c_kv;
            if (q.variant == QVariant::linear) {
                c_kv = q.out.weight.at(v, static_cast<std::size_t>(k));
            } else {
                c_kv = 0.0;  // row k of M times row v of W
                for (std::size_t j = 0; j < q.embed.cols(); ++j) {
                    c_kv += q.out.weight.at(j, static_cast<std::size_t>(k)) * q.embed.at(v, j);
                }
            }
            scored[v] = {static_cast<int>(v), vocab.words[v], c_kv};
        }
        std::sort(scored.begin(), scored.end(), [](const ScoredWord& a, const ScoredWord& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.index < b.index;
        });
        scored.resize(static_cast<std::size_t>(top_n));
        table.topics.push_back(std::move(scored));
    }
    return table;
}

// NPMI over whole-document co-occurrence:
//   npmi(i,j) = ln((p_ij + e) / ((p_i + e)(p_j + e))) / -ln(p_ij + e)
// with e = 1e-12 and probabilities as document frequencies. Pairs involving a
// word absent from the dataset are skipped and counted.
inline double npmi_pair(double p_i, double p_j, double p_ij) {
    constexpr double e = 1e-12;
    const double pmi = std::log((p_ij + e) / ((p_i + e) * (p_j + e)));
    return pmi / -std::log(p_ij + e);
}

inline double npmi_of_sets(const std::vector<std::vector<int>>& word_sets,
                           const BowDataset& dataset, std::size_t* skipped_pairs = nullptr) {
    const double n = static_cast<double>(dataset.size());
    ensure(n > 0, "npmi_of_sets: empty dataset");

    std::vector<long> df(dataset.vocab_size, 0);
    std::vector<std::set<std::uint32_t>> doc_sets;
    doc_sets.reserve(dataset.rows.size());
    for (const auto& row : dataset.rows) {
        for (std::uint32_t v : row) df[v] += 1;
        doc_sets.emplace_back(row.begin(), row.end());
    }
    auto joint_df = [&](int a, int b) {
        long c = 0;
        for (const auto& doc : doc_sets) {
            if (doc.count(static_cast<std::uint32_t>(a)) && doc.count(static_cast<std::uint32_t>(b))) ++c;
        }
        return c;
    };

    std::size_t skipped = 0;
    double topic_sum = 0.0;
    std::size_t topic_count = 0;
    for (const auto& words : word_sets) {
        double pair_sum = 0.0;
        std::size_t pair_count = 0;
        for (std::size_t a = 0; a < words.size(); ++a) {
            for (std::size_t b = a + 1; b < words.size(); ++b) {
                const int i = words[a], j = words[b];
                ensure(i >= 0 && static_cast<std::size_t>(i) < dataset.vocab_size &&
                           j >= 0 && static_cast<std::size_t>(j) < dataset.vocab_size,
                       "npmi_of_sets: word index out of range");
                if (df[static_cast<std::size_t>(i)] == 0 || df[static_cast<std::size_t>(j)] == 0) {
                    ++skipped;
                    continue;
                }
                pair_sum += npmi_pair(df[static_cast<std::size_t>(i)] / n,
                                      df[static_cast<std::size_t>(j)] / n,
                                      joint_df(i, j) / n);
                ++pair_count;
            }
        }
        if (pair_count > 0) {
            topic_sum += pair_sum / static_cast<double>(pair_count);
            ++topic_count;
        }
    }
    if (skipped_pairs) *skipped_pairs = skipped;
    ensure(topic_count > 0, "npmi_of_sets: no scorable pairs");
    return topic_sum / static_cast<double>(topic_count);
}

inline double npmi_coherence(const TopicWordTable& table, const BowDataset& dataset, int top_n,
                             std::size_t* skipped_pairs = nullptr) {
    ensure(top_n >= 2, "npmi_coherence: top_n must be at least 2");
    std::vector<std::vector<int>> sets;
    for (const auto& topic : table.topics) {
        std::vector<int> words;
        const std::size_t take = std::min<std::size_t>(topic.size(), static_cast<std::size_t>(top_n));
        for (std::size_t i = 0; i < take; ++i) words.push_back(topic[i].index);
        sets.push_back(std::move(words));
    }
    return npmi_of_sets(sets, dataset, skipped_pairs);
}

// ---- disentanglement probes ----

struct OverlapStats {
    double mean = 0.0;
    double stddev = 0.0;
};

struct DisentanglementReport {
    OverlapStats cross_code;   // across codes at fixed z: small when c carries topics
    OverlapStats within_code;  // across noise at fixed c: large when z only varies content
    int top_m = 0;
    int repetitions = 0;
    int noise_draws = 0;
};

namespace detail {

inline std::set<int> top_words_of_row(const Tensor& probs, std::size_t row, int top_m) {
    std::vector<std::pair<double, int>> scored;
    for (std::size_t v = 0; v < probs.cols(); ++v) {
        scored.push_back({probs.at(row, v), static_cast<int>(v)});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::set<int> out;
    for (int i = 0; i < top_m; ++i) out.insert(scored[static_cast<std::size_t>(i)].second);
    return out;
}

inline double jaccard(const std::set<int>& a, const std::set<int>& b) {
    std::size_t inter = 0;
    for (int x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline OverlapStats mean_stddev(const std::vector<double>& xs) {
    OverlapStats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(xs.size()));
    return s;
}

}  // namespace detail

// Cross-code: for a fixed z, generate with all K codes and measure the mean
// pairwise Jaccard overlap of the top_m most probable words. Within-code: fix
// a code and vary z. Repetitions give the spread.
inline DisentanglementReport disentanglement_report(const TiganModel& model, int top_m,
                                                    int repetitions, int noise_draws, Rng& rng) {
    ensure(top_m >= 1 && static_cast<std::size_t>(top_m) <= model.vocab_size,
           "disentanglement_report: bad top_m");
    ensure(repetitions >= 1 && noise_draws >= 2, "disentanglement_report: bad sample counts");

    DisentanglementReport report;
    report.top_m = top_m;
    report.repetitions = repetitions;
    report.noise_draws = noise_draws;

    const int k = model.topics;
    std::vector<double> cross;
    for (int rep = 0; rep < repetitions; ++rep) {
        Tensor z_row = sample_noise(model.z_dim, rng);
        Tensor codes = Tensor::matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(k), 0.0);
        Tensor noise = Tensor::matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(model.z_dim));
        for (int i = 0; i < k; ++i) {
            codes.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
            for (std::size_t j = 0; j < z_row.cols(); ++j) {
                noise.at(static_cast<std::size_t>(i), j) = z_row.values[j];
            }
        }
        Tensor out = generator_forward(model, codes, noise);
        std::vector<std::set<int>> sets;
        for (int i = 0; i < k; ++i) {
            sets.push_back(detail::top_words_of_row(out, static_cast<std::size_t>(i), top_m));
        }
        double sum = 0.0;
        int pairs = 0;
        for (int a = 0; a < k; ++a) {
            for (int b = a + 1; b < k; ++b) {
                sum += detail::jaccard(sets[static_cast<std::size_t>(a)], sets[static_cast<std::size_t>(b)]);
                ++pairs;
            }
        }
        cross.push_back(sum / pairs);
    }
    report.cross_code = detail::mean_stddev(cross);

    std::vector<double> within;
    for (int rep = 0; rep < repetitions; ++rep) {
        for (int code = 0; code < k; ++code) {
            Tensor codes = Tensor::matrix(static_cast<std::size_t>(noise_draws),
                                          static_cast<std::size_t>(k), 0.0);
            for (int i = 0; i < noise_draws; ++i) {
                codes.at(static_cast<std::size_t>(i), static_cast<std::size_t>(code)) = 1.0;
            }
            Tensor noise = sample_noise_batch(static_cast<std::size_t>(noise_draws), model.z_dim, rng);
            Tensor out = generator_forward(model, codes, noise);
            std::vector<std::set<int>> sets;
            for (int i = 0; i < noise_draws; ++i) {
                sets.push_back(detail::top_words_of_row(out, static_cast<std::size_t>(i), top_m));
            }
            double sum = 0.0;
            int pairs = 0;
            for (int a = 0; a < noise_draws; ++a) {
                for (int b = a + 1; b < noise_draws; ++b) {
                    sum += detail::jaccard(sets[static_cast<std::size_t>(a)],
                                           sets[static_cast<std::size_t>(b)]);
                    ++pairs;
                }
            }
            within.push_back(sum / pairs);
        }
    }
    report.within_code = detail::mean_stddev(within);
    return report;
}

// ---- the serialized report ----

struct EvalReport {
    int schema_version = 1;
    std::string config_echo;  // JSON text of the run configuration
    std::optional<double> accuracy;
    std::vector<int> topic_to_label;
    std::vector<std::string> label_names;
    std::vector<std::vector<ScoredWord>> topic_words;
    std::optional<double> coherence;
    std::size_t coherence_skipped_pairs = 0;
    std::optional<DisentanglementReport> disentanglement;

    bool operator==(const EvalReport& o) const {
        auto disent_eq = [&] {
            if (disentanglement.has_value() != o.disentanglement.has_value()) return false;
            if (!disentanglement) return true;
            const auto& a = *disentanglement;
            const auto& b = *o.disentanglement;
            return a.cross_code.mean == b.cross_code.mean &&
                   a.cross_code.stddev == b.cross_code.stddev &&
                   a.within_code.mean == b.within_code.mean &&
                   a.within_code.stddev == b.within_code.stddev && a.top_m == b.top_m &&
                   a.repetitions == b.repetitions && a.noise_draws == b.noise_draws;
        };
        return schema_version == o.schema_version && config_echo == o.config_echo &&
               accuracy == o.accuracy && topic_to_label == o.topic_to_label &&
               label_names == o.label_names && topic_words == o.topic_words &&
               coherence == o.coherence &&
               coherence_skipped_pairs == o.coherence_skipped_pairs && disent_eq();
    }
};

}  // namespace tigan
