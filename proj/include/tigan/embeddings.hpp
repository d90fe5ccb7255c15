#pragma once

// Pretrained word vectors for the topic classifier: a small skip-gram
// negative-sampling trainer over the preprocessed corpus, a loader/saver for
// the usual word-vector text format, and the SIF document encoder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tigan/corpus.hpp"
#include "tigan/tensor.hpp"

namespace tigan {

struct EmbeddingMatrix {
    Tensor vectors;  // V x d, row i aligned with vocabulary index i

    std::size_t vocab_size() const { return vectors.rows(); }
    std::size_t dim() const { return vectors.cols(); }
};

struct SgnsConfig {
    int dim = 100;
    int window = 5;  // symmetric, truncated at document bounds
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025;
    std::uint64_t seed = 1;
};

namespace detail {

// word2vec-style init: input vectors uniform in (-0.5/d, 0.5/d), context
// vectors zero.
inline Tensor sgns_init(std::size_t vocab, std::size_t dim, Rng& rng) {
    Tensor t = Tensor::matrix(vocab, dim);
    for (double& v : t.values) {
        v = (rng.uniform() - 0.5) / static_cast<double>(dim);
    }
    return t;
}

inline double fast_sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace detail

// Plain skip-gram with negative sampling; noise distribution is the unigram
// frequency raised to the 3/4 power. Deterministic per seed.
inline EmbeddingMatrix train_sgns(const std::vector<std::vector<std::string>>& documents,
                                  const Vocabulary& vocab, const SgnsConfig& config) {
    ensure(config.dim >= 1 && config.window >= 1 && config.negatives >= 0,
           "train_sgns: bad configuration");
    ensure(vocab.size() > 0, "train_sgns: empty vocabulary");

    std::vector<std::vector<int>> sequences;
    for (const auto& doc : documents) {
        std::vector<int> seq;
        for (const std::string& tok : doc) {
            int idx = vocab.lookup(tok);
            if (idx >= 0) seq.push_back(idx);
        }
        if (!seq.empty()) sequences.push_back(std::move(seq));
    }
    ensure(!sequences.empty(), "train_sgns: no in-vocabulary tokens in the corpus");

    Rng rng(config.seed);
    const std::size_t v = static_cast<std::size_t>(vocab.size());
    const std::size_t d = static_cast<std::size_t>(config.dim);
    Tensor in = detail::sgns_init(v, d, rng);
    Tensor out = Tensor::matrix(v, d, 0.0);

    // cumulative noise distribution over counts^(3/4)
    std::vector<double> cdf(v);
    double acc = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        acc += std::pow(static_cast<double>(vocab.counts[i]), 0.75);
        cdf[i] = acc;
    }
    auto sample_noise = [&]() {
        double u = rng.uniform() * acc;
        return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    };

    std::vector<double> delta(d);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& seq : sequences) {
            const int len = static_cast<int>(seq.size());
            for (int pos = 0; pos < len; ++pos) {
                const int center = seq[static_cast<std::size_t>(pos)];
                double* vin = &in.values[static_cast<std::size_t>(center) * d];
                const int lo = std::max(0, pos - config.window);
                const int hi = std::min(len - 1, pos + config.window);
                for (int c = lo; c <= hi; ++c) {
                    if (c == pos) continue;
                    const int context = seq[static_cast<std::size_t>(c)];
                    std::fill(delta.begin(), delta.end(), 0.0);
                    for (int neg = 0; neg <= config.negatives; ++neg) {
                        int target;
                        double label;
                        if (neg == 0) {
                            target = context;
                            label = 1.0;
                        } else {
                            target = sample_noise();
                            if (target == context) continue;
                            label = 0.0;
                        }
                        double* uout = &out.values[static_cast<std::size_t>(target) * d];
                        double dot = 0.0;
                        for (std::size_t j = 0; j < d; ++j) dot += vin[j] * uout[j];
                        const double g = (label - detail::fast_sigmoid(dot)) * config.lr;
                        for (std::size_t j = 0; j < d; ++j) {
                            delta[j] += g * uout[j];
                            uout[j] += g * vin[j];
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) vin[j] += delta[j];
                }
            }
        }
    }
    ensure(in.all_finite(), "train_sgns: diverged to non-finite values");
    return EmbeddingMatrix{std::move(in)};
}

// ---- word-vector text format ----
//
// Optional header line "V d", then one `word v1 ... vd` line per word,
// space-separated.

inline void save_embeddings(std::ostream& os, const Vocabulary& vocab, const EmbeddingMatrix& emb) {
    ensure(emb.vocab_size() == vocab.words.size(), "save_embeddings: vocabulary mismatch");
    os << vocab.words.size() << ' ' << emb.dim() << '\n';
    std::ostringstream line;
    line.precision(17);
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        line.str("");
        line << vocab.words[i];
        for (std::size_t j = 0; j < emb.dim(); ++j) {
            line << ' ' << emb.vectors.at(i, j);
        }
        os << line.str() << '\n';
    }
}

inline void save_embeddings(const std::string& path, const Vocabulary& vocab,
                            const EmbeddingMatrix& emb) {
    std::ofstream os(path);
    ensure(os.good(), "save_embeddings: cannot open " + path);
    save_embeddings(os, vocab, emb);
    ensure(os.good(), "save_embeddings: write failed on " + path);
}

struct LoadedEmbeddings {
    EmbeddingMatrix matrix;
    std::size_t missing = 0;  // vocabulary words absent from the file
};

// Rows for vocabulary words found in the file; absent words get seeded random
// init rows, with a count the caller can log.
inline LoadedEmbeddings load_embeddings(std::istream& is, const Vocabulary& vocab,
                                        std::uint64_t seed = 12345) {
    std::vector<std::pair<std::string, std::vector<double>>> entries;
    std::string line;
    std::size_t lineno = 0;
    long dim = -1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> vals;
        double x;
        while (ss >> x) vals.push_back(x);
        if (!ss.eof()) {
            throw Error("load_embeddings: malformed line " + std::to_string(lineno));
        }
        if (lineno == 1 && vals.size() == 1) {
            // header "V d": the word slot parses as V
            char* end = nullptr;
            std::strtod(word.c_str(), &end);
            if (end && *end == '\0') continue;
        }
        if (vals.empty()) {
            throw Error("load_embeddings: malformed line " + std::to_string(lineno));
        }
        if (dim < 0) {
            dim = static_cast<long>(vals.size());
        } else if (dim != static_cast<long>(vals.size())) {
            throw Error("load_embeddings: dimension changed at line " + std::to_string(lineno) +
                        " (expected " + std::to_string(dim) + ", got " +
                        std::to_string(vals.size()) + ")");
        }
        entries.emplace_back(std::move(word), std::move(vals));
    }
    ensure(dim > 0, "load_embeddings: no vectors in file");

    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < entries.size(); ++i) where.emplace(entries[i].first, i);

    Rng rng(seed);
    LoadedEmbeddings result;
    result.matrix.vectors = Tensor::matrix(vocab.words.size(), static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        auto it = where.find(vocab.words[i]);
        if (it == where.end()) {
            ++result.missing;
            for (std::size_t j = 0; j < static_cast<std::size_t>(dim); ++j) {
                result.matrix.vectors.at(i, j) =
                    (rng.uniform() - 0.5) / static_cast<double>(dim);
            }
        } else {
            const auto& vals = entries[it->second].second;
            for (std::size_t j = 0; j < static_cast<std::size_t>(dim); ++j) {
                result.matrix.vectors.at(i, j) = vals[j];
            }
        }
    }
    ensure(result.matrix.vectors.all_finite(), "load_embeddings: non-finite vector values");
    return result;
}

inline LoadedEmbeddings load_embeddings(const std::string& path, const Vocabulary& vocab,
                                        std::uint64_t seed = 12345) {
    std::ifstream is(path);
    ensure(is.good(), "load_embeddings: cannot open " + path);
    return load_embeddings(is, vocab, seed);
}

// ---- SIF document encoder ----

// The effective weight parameter a = exp(a_raw) is positive by construction.
struct SifParams {
    double a_raw = std::log(1e-3);

    double effective_a() const { return std::exp(a_raw); }
};

inline double sif_weight(double a, double p) {
    return a / (a + p);
}

// Weighted average of the embeddings of present words, normalized by the
// number of present words:  sum_w  a/(a+p(w)) emb_w  /  |present|.
inline Tensor sif_document_vector(const Tensor& bow_row, const EmbeddingMatrix& emb,
                                  const SifParams& sif, const std::vector<double>& word_freq) {
    ensure(bow_row.rows() == 1 && bow_row.cols() == emb.vocab_size(),
           "sif_document_vector: bow row width does not match the embedding table");
    const double a = sif.effective_a();
    Tensor doc = Tensor::matrix(1, emb.dim(), 0.0);
    double present = 0.0;
    for (std::size_t v = 0; v < emb.vocab_size(); ++v) {
        if (bow_row.values[v] == 0.0) continue;
        present += 1.0;
        const double w = sif_weight(a, word_freq[v]);
        for (std::size_t j = 0; j < emb.dim(); ++j) {
            doc.values[j] += w * emb.vectors.at(v, j);
        }
    }
    ensure(present > 0.0, "sif_document_vector: all-zero bag-of-words row");
    for (double& x : doc.values) x /= present;
    return doc;
}

}  // namespace tigan
