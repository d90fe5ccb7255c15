#pragma once

// The embedding-average + k-means baseline, sharing the vote-accuracy scorer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tigan/corpus.hpp"
#include "tigan/embeddings.hpp"
#include "tigan/eval.hpp"
#include "tigan/tensor.hpp"

namespace tigan {

struct KmeansResult {
    Tensor centroids;  // K x d
    std::vector<int> assignment;
    double inertia = 0.0;
    int iterations = 0;
    int best_restart = 0;
};

namespace detail {

inline double sq_dist(const Tensor& points, std::size_t i, const Tensor& centroids, std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < points.cols(); ++j) {
        const double d = points.at(i, j) - centroids.at(k, j);
        s += d * d;
    }
    return s;
}

// k-means++ seeding: first centroid uniform, the rest proportional to the
// squared distance from the nearest chosen centroid.
inline Tensor kmeanspp_seed(const Tensor& points, int k, Rng& rng) {
    const std::size_t n = points.rows(), d = points.cols();
    Tensor centroids = Tensor::matrix(static_cast<std::size_t>(k), d);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());

    std::size_t first = rng.uniform_index(n);
    for (std::size_t j = 0; j < d; ++j) centroids.at(0, j) = points.at(first, j);

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], sq_dist(points, i, centroids, static_cast<std::size_t>(c - 1)));
            total += dist[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(n);  // all points coincide with chosen centroids
        } else {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            centroids.at(static_cast<std::size_t>(c), j) = points.at(pick, j);
        }
    }
    return centroids;
}

struct LloydResult {
    Tensor centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
    int iterations = 0;
};

inline LloydResult lloyd(const Tensor& points, Tensor centroids, int max_iter, double tol) {
    const std::size_t n = points.rows(), d = points.cols();
    const std::size_t k = centroids.rows();
    LloydResult result;
    result.assignment.assign(n, 0);

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iter; ++iter) {
        // assignment step
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = sq_dist(points, i, centroids, c);
                if (dd < best) {
                    best = dd;
                    arg = static_cast<int>(c);
                }
            }
            result.assignment[i] = arg;
            inertia += best;
        }
        ensure(inertia <= prev_inertia + 1e-9, "kmeans: inertia increased across iterations");
        prev_inertia = inertia;
        result.inertia = inertia;
        result.iterations = iter;

        // update step
        Tensor next = Tensor::matrix(k, d, 0.0);
        std::vector<long> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = static_cast<std::size_t>(result.assignment[i]);
            counts[c] += 1;
            for (std::size_t j = 0; j < d; ++j) next.at(c, j) += points.at(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // re-seed an empty cluster at the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dd = sq_dist(points, i, centroids,
                                              static_cast<std::size_t>(result.assignment[i]));
                    if (dd > far_d) {
                        far_d = dd;
                        far = i;
                    }
                }
                for (std::size_t j = 0; j < d; ++j) next.at(c, j) = points.at(far, j);
            } else {
                for (std::size_t j = 0; j < d; ++j) next.at(c, j) /= static_cast<double>(counts[c]);
            }
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, std::sqrt(sq_dist(next, c, centroids, c)));
        }
        centroids = std::move(next);
        if (shift < tol) break;
    }

    // final assignment against the converged centroids
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double dd = sq_dist(points, i, centroids, c);
            if (dd < best) {
                best = dd;
                arg = static_cast<int>(c);
            }
        }
        result.assignment[i] = arg;
        inertia += best;
    }
    result.inertia = inertia;
    result.centroids = std::move(centroids);
    return result;
}

}  // namespace detail

// Best-of-restarts k-means with k-means++ seeding. Deterministic per
// (seed, restarts); ties in inertia resolve to the earlier restart.
inline KmeansResult kmeans(const Tensor& points, int k, std::uint64_t seed, int restarts = 10,
                           int max_iter = 300, double tol = 1e-6) {
    ensure(k >= 1, "kmeans: k must be positive");
    ensure(points.rows() >= static_cast<std::size_t>(k),
           "kmeans: need at least k points, got " + std::to_string(points.rows()));
    ensure(restarts >= 1 && max_iter >= 1, "kmeans: bad restart/iteration counts");

    Rng rng(seed);
    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        detail::LloydResult run = detail::lloyd(points, detail::kmeanspp_seed(points, k, rng),
                                                max_iter, tol);
        if (run.inertia < best.inertia) {
            best.centroids = std::move(run.centroids);
            best.assignment = std::move(run.assignment);
            best.inertia = run.inertia;
            best.iterations = run.iterations;
            best.best_restart = r;
        }
    }
    return best;
}

// Document vectors by plain embedding average over present words (or the SIF
// weighting when params are given), then k-means, then vote accuracy.
inline Tensor average_document_vectors(const BowDataset& dataset, const EmbeddingMatrix& emb,
                                       const SifParams* sif, const std::vector<double>& word_freq) {
    ensure(dataset.vocab_size == emb.vocab_size(),
           "average_document_vectors: embedding table does not match the dataset");
    Tensor docs = Tensor::matrix(dataset.size(), emb.dim(), 0.0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& row = dataset.rows[i];
        for (std::uint32_t v : row) {
            const double w = sif ? sif_weight(sif->effective_a(), word_freq[v]) : 1.0;
            for (std::size_t j = 0; j < emb.dim(); ++j) {
                docs.at(i, j) += w * emb.vectors.at(v, j);
            }
        }
        for (std::size_t j = 0; j < emb.dim(); ++j) {
            docs.at(i, j) /= static_cast<double>(row.size());
        }
    }
    return docs;
}

inline EvalReport embedding_average_baseline(const BowDataset& dataset, const Vocabulary& vocab,
                                             const EmbeddingMatrix& emb, const SifParams* sif,
                                             int k, std::uint64_t seed, int restarts = 10) {
    ensure(dataset.labels.has_value(), "embedding_average_baseline: labels required for scoring");
    Tensor docs = average_document_vectors(dataset, emb, sif, vocab.freq);
    KmeansResult clusters = kmeans(docs, k, seed, restarts);

    ClusterAssignment assignment;
    assignment.topic = clusters.assignment;
    assignment.confidence.assign(dataset.size(), 1.0);
    VoteResult vote = vote_accuracy(assignment, *dataset.labels, k);

    EvalReport report;
    report.accuracy = vote.accuracy;
    report.topic_to_label = vote.topic_to_label;
    report.label_names = dataset.label_names;
    return report;
}

}  // namespace tigan
