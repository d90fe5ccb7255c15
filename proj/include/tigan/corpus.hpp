#pragma once

// Text ingestion: tokenization, vocabulary construction, binary bag-of-words
// vectorization and the synthetic planted-topic corpus generator used by the
// test suites.
//
// Corpus lines are `label<TAB>text` or bare `text`. A file is treated as
// labeled only when every non-empty line carries a tab.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tigan/tensor.hpp"

namespace tigan {

struct PreprocessConfig {
    std::size_t vocab_cap = 3000;
    bool lowercase = true;
    std::size_t min_token_length = 2;
    std::set<std::string> stopwords;
};

struct Vocabulary {
    std::vector<std::string> words;  // descending corpus count, ties by first occurrence
    std::vector<std::uint64_t> counts;
    std::vector<double> freq;  // p(w) = count(w) / total kept tokens
    std::unordered_map<std::string, int> index;
    std::uint64_t total_kept_tokens = 0;

    int size() const { return static_cast<int>(words.size()); }

    int lookup(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? -1 : it->second;
    }

    // Identity hash used to pair checkpoints with the vocabulary they were
    // trained against. FNV-1a over words, counts and the token total.
    std::uint64_t hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        auto mix = [&h](const void* data, std::size_t len) {
            const unsigned char* p = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < len; ++i) {
                h ^= p[i];
                h *= 1099511628211ULL;
            }
        };
        for (std::size_t i = 0; i < words.size(); ++i) {
            mix(words[i].data(), words[i].size());
            mix("\n", 1);
            mix(&counts[i], sizeof(counts[i]));
        }
        mix(&total_kept_tokens, sizeof(total_kept_tokens));
        return h;
    }
};

struct BowDataset {
    std::size_t vocab_size = 0;
    std::vector<std::vector<std::uint32_t>> rows;  // sorted unique word indices
    std::optional<std::vector<int>> labels;        // ids in [0, k_gold)
    std::vector<std::string> label_names;          // by first appearance
    int k_gold = 0;

    std::size_t size() const { return rows.size(); }

    Tensor dense_row(std::size_t i) const {
        Tensor t = Tensor::matrix(1, vocab_size, 0.0);
        for (std::uint32_t j : rows[i]) t.values[j] = 1.0;
        return t;
    }

    Tensor dense_batch(const std::vector<std::size_t>& which) const {
        Tensor t = Tensor::matrix(which.size(), vocab_size, 0.0);
        for (std::size_t r = 0; r < which.size(); ++r) {
            for (std::uint32_t j : rows[which[r]]) t.at(r, j) = 1.0;
        }
        return t;
    }
};

inline std::vector<std::string> tokenize(const std::string& text, const PreprocessConfig& config) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= config.min_token_length && !config.stopwords.count(cur)) {
            tokens.push_back(cur);
        }
        cur.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(config.lowercase ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

// Splits `label<TAB>text` lines. Returns no label for bare lines.
inline std::pair<std::optional<std::string>, std::string> split_label_line(const std::string& line) {
    auto pos = line.find('\t');
    if (pos == std::string::npos) return {std::nullopt, line};
    return {line.substr(0, pos), line.substr(pos + 1)};
}

struct PreprocessResult {
    Vocabulary vocab;
    BowDataset dataset;
    std::size_t dropped = 0;  // documents emptied by preprocessing
};

inline std::vector<std::uint32_t> bow_indices(const std::vector<std::string>& tokens,
                                              const Vocabulary& vocab) {
    std::set<std::uint32_t> present;
    for (const std::string& t : tokens) {
        int idx = vocab.lookup(t);
        if (idx >= 0) present.insert(static_cast<std::uint32_t>(idx));
    }
    return {present.begin(), present.end()};
}

// Presence vector: dimension v is 1 iff word v occurs at least once.
// Out-of-vocabulary tokens are ignored.
inline std::vector<std::uint8_t> bow_vectorize(const std::vector<std::string>& tokens,
                                               const Vocabulary& vocab) {
    std::vector<std::uint8_t> row(vocab.words.size(), 0);
    for (std::uint32_t idx : bow_indices(tokens, vocab)) row[idx] = 1;
    return row;
}

inline PreprocessResult preprocess(const std::vector<std::string>& raw_documents,
                                   const PreprocessConfig& config) {
    ensure(config.vocab_cap >= 2, "preprocess: vocab_cap must be at least 2");

    bool labeled = !raw_documents.empty();
    std::size_t nonempty = 0;
    for (const std::string& line : raw_documents) {
        if (line.empty()) continue;
        ++nonempty;
        if (line.find('\t') == std::string::npos) labeled = false;
    }
    if (nonempty == 0) labeled = false;

    struct Doc {
        std::vector<std::string> tokens;
        std::optional<std::string> label;
    };
    std::vector<Doc> docs;
    std::unordered_map<std::string, std::uint64_t> count;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::uint64_t total_kept = 0;

    for (const std::string& line : raw_documents) {
        if (line.empty()) continue;
        auto [label, text] = labeled ? split_label_line(line)
                                     : std::pair<std::optional<std::string>, std::string>{std::nullopt, line};
        Doc doc;
        doc.tokens = tokenize(text, config);
        doc.label = label;
        for (const std::string& t : doc.tokens) {
            auto [it, fresh] = count.try_emplace(t, 0);
            it->second += 1;
            if (fresh) first_seen.emplace(t, first_seen.size());
            ++total_kept;
        }
        docs.push_back(std::move(doc));
    }

    // top vocab_cap by count, ties broken by first occurrence
    std::vector<std::string> order;
    order.reserve(count.size());
    for (const auto& [w, c] : count) order.push_back(w);
    std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
        if (count[a] != count[b]) return count[a] > count[b];
        return first_seen[a] < first_seen[b];
    });
    if (order.size() > config.vocab_cap) order.resize(config.vocab_cap);

    PreprocessResult result;
    Vocabulary& vocab = result.vocab;
    vocab.total_kept_tokens = total_kept;
    for (const std::string& w : order) {
        vocab.index.emplace(w, static_cast<int>(vocab.words.size()));
        vocab.words.push_back(w);
        vocab.counts.push_back(count[w]);
        vocab.freq.push_back(static_cast<double>(count[w]) / static_cast<double>(total_kept));
    }

    BowDataset& data = result.dataset;
    data.vocab_size = vocab.words.size();
    std::vector<int> labels;
    std::map<std::string, int> label_ids;
    for (const Doc& doc : docs) {
        std::vector<std::uint32_t> row = bow_indices(doc.tokens, vocab);
        if (row.empty()) {
            ++result.dropped;
            continue;
        }
        data.rows.push_back(std::move(row));
        if (labeled) {
            auto [it, fresh] = label_ids.try_emplace(*doc.label, static_cast<int>(data.label_names.size()));
            if (fresh) data.label_names.push_back(*doc.label);
            labels.push_back(it->second);
        }
    }
    if (labeled) {
        data.labels = std::move(labels);
        data.k_gold = static_cast<int>(data.label_names.size());
    }

    ensure(data.rows.size() >= 2, "preprocess: fewer than 2 documents survive preprocessing");
    return result;
}

// ---- synthetic planted-topic corpora ----

struct SyntheticSpec {
    int topics = 4;
    int words_per_topic = 40;
    int shared_words = 80;
    int docs_per_topic = 500;
    int doc_length = 20;
    double noise_rate = 0.2;
};

struct SyntheticCorpus {
    std::vector<std::string> lines;  // label<TAB>text
    std::vector<int> labels;
    std::vector<std::vector<std::string>> topic_words;  // disjoint planted sets
    std::vector<std::string> shared_pool;
};

// Each document draws doc_length tokens: with probability noise_rate from the
// shared pool, otherwise uniformly from its topic's planted set.
inline SyntheticCorpus synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
    ensure(spec.doc_length >= 1, "synthetic_corpus: doc_length must be at least 1");
    ensure(spec.topics >= 1 && spec.words_per_topic >= 1, "synthetic_corpus: empty topic sets");
    ensure(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0,
           "synthetic_corpus: noise_rate must lie in [0,1)");
    ensure(spec.noise_rate == 0.0 || spec.shared_words >= 1,
           "synthetic_corpus: noise_rate > 0 needs a shared pool");

    SyntheticCorpus corpus;
    for (int k = 0; k < spec.topics; ++k) {
        std::vector<std::string> words;
        for (int i = 0; i < spec.words_per_topic; ++i) {
            words.push_back("t" + std::to_string(k) + "w" + std::to_string(i));
        }
        corpus.topic_words.push_back(std::move(words));
    }
    for (int i = 0; i < spec.shared_words; ++i) {
        corpus.shared_pool.push_back("shared" + std::to_string(i));
    }

    Rng rng(seed);
    for (int k = 0; k < spec.topics; ++k) {
        for (int d = 0; d < spec.docs_per_topic; ++d) {
            std::string text;
            for (int j = 0; j < spec.doc_length; ++j) {
                const bool noise = rng.uniform() < spec.noise_rate;
                const std::vector<std::string>& pool =
                    noise ? corpus.shared_pool : corpus.topic_words[static_cast<std::size_t>(k)];
                if (j) text += ' ';
                text += pool[rng.uniform_index(pool.size())];
            }
            corpus.lines.push_back(std::to_string(k) + "\t" + text);
            corpus.labels.push_back(k);
        }
    }
    return corpus;
}

}  // namespace tigan
