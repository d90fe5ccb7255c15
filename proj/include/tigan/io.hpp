#pragma once

// File formats: corpus lines, stopword lists, vocabulary and bag-of-words
// files, binary checkpoints, the JSONL loss log and the JSON evaluation
// report. Checkpoints round-trip parameters bit-exactly and are tied to the
// vocabulary by hash.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tigan/corpus.hpp"
#include "tigan/eval.hpp"
#include "tigan/model.hpp"

namespace tigan {

using nlohmann::json;

// ---- plain text inputs ----

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    ensure(is.good(), "cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

// One stopword per line; blank lines ignored. An empty list is an error.
inline std::set<std::string> load_stopwords(const std::string& path) {
    std::set<std::string> words;
    for (const std::string& line : read_lines(path)) {
        if (!line.empty()) words.insert(line);
    }
    ensure(!words.empty(), "stopword file is empty: " + path);
    return words;
}

// ---- vocabulary file ----
//
//   tigan-vocab v1
//   total_tokens <N>
//   lowercase <0|1>
//   min_token_length <n>
//   word<TAB>count        (descending count order)

inline void save_vocabulary(const std::string& path, const Vocabulary& vocab,
                            const PreprocessConfig& config) {
    std::ofstream os(path);
    ensure(os.good(), "cannot open " + path + " for writing");
    os << "tigan-vocab v1\n";
    os << "total_tokens " << vocab.total_kept_tokens << '\n';
    os << "lowercase " << (config.lowercase ? 1 : 0) << '\n';
    os << "min_token_length " << config.min_token_length << '\n';
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        os << vocab.words[i] << '\t' << vocab.counts[i] << '\n';
    }
    ensure(os.good(), "write failed on " + path);
}

struct LoadedVocabulary {
    Vocabulary vocab;
    PreprocessConfig config;  // tokenizer settings recorded at preprocess time
};

inline LoadedVocabulary load_vocabulary(const std::string& path) {
    auto lines = read_lines(path);
    ensure(!lines.empty() && lines[0] == "tigan-vocab v1",
           "not a tigan vocabulary file: " + path);
    ensure(lines.size() >= 4, "truncated vocabulary file: " + path);

    LoadedVocabulary out;
    auto field = [&](std::size_t idx, const std::string& key) {
        std::istringstream ss(lines[idx]);
        std::string name;
        long long value = -1;
        ss >> name >> value;
        ensure(name == key && value >= 0, "bad vocabulary header line: " + lines[idx]);
        return static_cast<std::uint64_t>(value);
    };
    out.vocab.total_kept_tokens = field(1, "total_tokens");
    out.config.lowercase = field(2, "lowercase") != 0;
    out.config.min_token_length = field(3, "min_token_length");

    for (std::size_t i = 4; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto pos = lines[i].find('\t');
        ensure(pos != std::string::npos, "bad vocabulary entry at line " + std::to_string(i + 1));
        std::string word = lines[i].substr(0, pos);
        std::uint64_t count = std::stoull(lines[i].substr(pos + 1));
        out.vocab.index.emplace(word, static_cast<int>(out.vocab.words.size()));
        out.vocab.words.push_back(std::move(word));
        out.vocab.counts.push_back(count);
        out.vocab.freq.push_back(static_cast<double>(count) /
                                 static_cast<double>(out.vocab.total_kept_tokens));
    }
    ensure(!out.vocab.words.empty(), "empty vocabulary file: " + path);
    return out;
}

// ---- bag-of-words file ----
//
//   tigan-bow v1
//   docs <N> vocab <V> labeled <0|1>
//   [labels<TAB>name0<TAB>name1...]          when labeled
//   <label id or -> <TAB> space-separated word indices

inline void save_bow(const std::string& path, const BowDataset& dataset) {
    std::ofstream os(path);
    ensure(os.good(), "cannot open " + path + " for writing");
    os << "tigan-bow v1\n";
    os << "docs " << dataset.size() << " vocab " << dataset.vocab_size << " labeled "
       << (dataset.labels ? 1 : 0) << '\n';
    if (dataset.labels) {
        os << "labels";
        for (const auto& name : dataset.label_names) os << '\t' << name;
        os << '\n';
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.labels) {
            os << (*dataset.labels)[i];
        } else {
            os << '-';
        }
        os << '\t';
        for (std::size_t j = 0; j < dataset.rows[i].size(); ++j) {
            if (j) os << ' ';
            os << dataset.rows[i][j];
        }
        os << '\n';
    }
    ensure(os.good(), "write failed on " + path);
}

inline BowDataset load_bow(const std::string& path) {
    auto lines = read_lines(path);
    ensure(lines.size() >= 2 && lines[0] == "tigan-bow v1", "not a tigan bow file: " + path);

    BowDataset dataset;
    std::size_t docs = 0;
    int labeled = 0;
    {
        std::istringstream ss(lines[1]);
        std::string k1, k2, k3;
        ss >> k1 >> docs >> k2 >> dataset.vocab_size >> k3 >> labeled;
        ensure(k1 == "docs" && k2 == "vocab" && k3 == "labeled",
               "bad bow header: " + lines[1]);
    }
    std::size_t row_start = 2;
    if (labeled) {
        ensure(lines.size() >= 3 && lines[2].rfind("labels", 0) == 0,
               "labeled bow file is missing its label-name line");
        std::string rest = lines[2].substr(6);
        std::size_t pos = 0;
        while (pos < rest.size() && rest[pos] == '\t') {
            auto next = rest.find('\t', pos + 1);
            std::string name = rest.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                              : next - pos - 1);
            dataset.label_names.push_back(name);
            if (next == std::string::npos) break;
            pos = next;
        }
        dataset.k_gold = static_cast<int>(dataset.label_names.size());
        dataset.labels.emplace();
        row_start = 3;
    }

    for (std::size_t i = row_start; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto pos = lines[i].find('\t');
        ensure(pos != std::string::npos, "bad bow row at line " + std::to_string(i + 1));
        std::string label = lines[i].substr(0, pos);
        if (labeled) {
            dataset.labels->push_back(std::stoi(label));
        }
        std::istringstream ss(lines[i].substr(pos + 1));
        std::vector<std::uint32_t> row;
        std::uint32_t idx;
        while (ss >> idx) {
            ensure(idx < dataset.vocab_size, "bow index out of range at line " + std::to_string(i + 1));
            row.push_back(idx);
        }
        ensure(!row.empty(), "all-zero bow row at line " + std::to_string(i + 1));
        dataset.rows.push_back(std::move(row));
    }
    ensure(dataset.rows.size() == docs, "bow row count disagrees with the header in " + path);
    return dataset;
}

// ---- config <-> json ----

inline json config_to_json(const TiganConfig& c) {
    return json{{"topics", c.topics},
                {"z_dim", c.z_dim},
                {"lambda_mi", c.lambda_mi},
                {"alpha_clip", c.alpha_clip},
                {"lambda_gp", c.lambda_gp},
                {"critic_steps", c.critic_steps},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"q_variant", q_variant_name(c.q_variant)},
                {"finetune_embeddings", c.finetune_embeddings},
                {"autoencoder", c.autoencoder},
                {"g_hidden", c.g_hidden},
                {"g_layers", c.g_layers},
                {"d_hidden", c.d_hidden},
                {"d_layers", c.d_layers},
                {"e_hidden", c.e_hidden},
                {"embed_dim", c.embed_dim},
                {"adam", {{"lr", c.adam.lr},
                          {"beta1", c.adam.beta1},
                          {"beta2", c.adam.beta2},
                          {"eps", c.adam.eps}}}};
}

inline TiganConfig config_from_json(const json& j) {
    TiganConfig c;
    c.topics = j.at("topics").get<int>();
    c.z_dim = j.at("z_dim").get<int>();
    c.lambda_mi = j.at("lambda_mi").get<double>();
    c.alpha_clip = j.at("alpha_clip").get<double>();
    c.lambda_gp = j.at("lambda_gp").get<double>();
    c.critic_steps = j.at("critic_steps").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.q_variant = q_variant_from_name(j.at("q_variant").get<std::string>());
    c.finetune_embeddings = j.at("finetune_embeddings").get<bool>();
    c.autoencoder = j.at("autoencoder").get<bool>();
    c.g_hidden = j.at("g_hidden").get<int>();
    c.g_layers = j.at("g_layers").get<int>();
    c.d_hidden = j.at("d_hidden").get<int>();
    c.d_layers = j.at("d_layers").get<int>();
    c.e_hidden = j.at("e_hidden").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.adam.lr = j.at("adam").at("lr").get<double>();
    c.adam.beta1 = j.at("adam").at("beta1").get<double>();
    c.adam.beta2 = j.at("adam").at("beta2").get<double>();
    c.adam.eps = j.at("adam").at("eps").get<double>();
    return c;
}

// ---- binary checkpoint ----
//
// Layout: magic "TGANCKPT", u32 version, u64 vocab hash, i64 epoch, i64 step,
// u64 vocab size, config JSON (u32 length + bytes), u32 tensor count, then per
// tensor: name (u32 + bytes), u32 rank, u64 dims, raw doubles.

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    ensure(is.good(), "checkpoint truncated");
    return value;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    auto len = read_pod<std::uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    ensure(is.good(), "checkpoint truncated");
    return s;
}

}  // namespace detail

constexpr char kCheckpointMagic[9] = "TGANCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const TiganModel& model,
                            const TiganConfig& config, std::uint64_t vocab_hash, long epoch,
                            long step) {
    std::ofstream os(path, std::ios::binary);
    ensure(os.good(), "cannot open " + path + " for writing");
    os.write(kCheckpointMagic, 8);
    detail::write_pod(os, kCheckpointVersion);
    detail::write_pod(os, vocab_hash);
    detail::write_pod<std::int64_t>(os, epoch);
    detail::write_pod<std::int64_t>(os, step);
    detail::write_pod<std::uint64_t>(os, model.vocab_size);
    detail::write_string(os, config_to_json(config).dump());

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for_each_state_tensor(const_cast<TiganModel&>(model),
                          [&](const std::string& name, Tensor& t) { tensors.emplace_back(name, &t); });
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        detail::write_string(os, name);
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor->shape.size()));
        for (std::size_t dim : tensor->shape) {
            detail::write_pod<std::uint64_t>(os, dim);
        }
        os.write(reinterpret_cast<const char*>(tensor->values.data()),
                 static_cast<std::streamsize>(tensor->values.size() * sizeof(double)));
    }
    ensure(os.good(), "write failed on " + path);
}

struct LoadedCheckpoint {
    TiganModel model;
    TiganConfig config;
    std::uint64_t vocab_hash = 0;
    long epoch = 0;
    long step = 0;
};

// Rebuilds the model skeleton from the stored config and overwrites every
// named tensor. The expected vocabulary hash must match the stored one.
inline LoadedCheckpoint load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    std::ifstream is(path, std::ios::binary);
    ensure(is.good(), "cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    ensure(is.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
           "not a tigan checkpoint: " + path);
    auto version = detail::read_pod<std::uint32_t>(is);
    ensure(version == kCheckpointVersion,
           "unsupported checkpoint version " + std::to_string(version));

    LoadedCheckpoint out;
    out.vocab_hash = detail::read_pod<std::uint64_t>(is);
    ensure(out.vocab_hash == expected_vocab_hash,
           "checkpoint was trained against a different vocabulary (hash mismatch)");
    out.epoch = static_cast<long>(detail::read_pod<std::int64_t>(is));
    out.step = static_cast<long>(detail::read_pod<std::int64_t>(is));
    auto vocab_size = detail::read_pod<std::uint64_t>(is);
    out.config = config_from_json(json::parse(detail::read_string(is)));

    // skeleton with the right shapes; every tensor is overwritten below
    TiganModel& model = out.model;
    model.vocab_size = vocab_size;
    model.topics = out.config.topics;
    model.z_dim = out.config.z_dim;
    {
        Rng rng(0);
        std::vector<std::size_t> g_hidden(static_cast<std::size_t>(out.config.g_layers),
                                          static_cast<std::size_t>(out.config.g_hidden));
        model.gen = make_mlp(static_cast<std::size_t>(out.config.topics + out.config.z_dim),
                             g_hidden, vocab_size, Activation::sigmoid, true, rng);
        std::vector<std::size_t> d_hidden(static_cast<std::size_t>(out.config.d_layers),
                                          static_cast<std::size_t>(out.config.d_hidden));
        model.critic = make_mlp(vocab_size, d_hidden, 1, Activation::linear, false, rng);
        model.noise_pred = make_mlp(vocab_size, {static_cast<std::size_t>(out.config.e_hidden)},
                                    static_cast<std::size_t>(out.config.z_dim), Activation::linear,
                                    false, rng);
        model.q.variant = out.config.q_variant;
        model.q.a_raw = Tensor::scalar(0.0);
        if (out.config.q_variant == QVariant::linear) {
            model.q.out = make_dense(vocab_size, static_cast<std::size_t>(out.config.topics), rng);
        } else {
            model.q.word_freq = Tensor::matrix(1, vocab_size, 0.0);
            model.q.train_embed = out.config.q_variant == QVariant::mlp_random_embed ||
                                  out.config.finetune_embeddings;
            model.q.embed = Tensor::matrix(vocab_size, 1, 0.0);  // resized by the stored tensor
            model.q.out = make_dense(1, static_cast<std::size_t>(out.config.topics), rng);
        }
    }

    auto count = detail::read_pod<std::uint32_t>(is);
    std::map<std::string, Tensor> stored;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = detail::read_string(is);
        auto rank = detail::read_pod<std::uint32_t>(is);
        Shape shape;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is)));
        }
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
        ensure(is.good(), "checkpoint truncated in tensor " + name);
        stored.emplace(std::move(name), std::move(t));
    }

    // q.embed / q.out shapes depend on the stored embedding width
    if (out.config.q_variant != QVariant::linear) {
        auto it = stored.find("q.embed");
        ensure(it != stored.end(), "checkpoint is missing q.embed");
        model.q.embed = Tensor(it->second.shape, 0.0);
        model.q.out.weight = Tensor::matrix(it->second.cols(),
                                            static_cast<std::size_t>(out.config.topics), 0.0);
    }

    std::size_t applied = 0;
    for_each_state_tensor(model, [&](const std::string& name, Tensor& t) {
        auto it = stored.find(name);
        ensure(it != stored.end(), "checkpoint is missing tensor " + name);
        ensure(it->second.shape == t.shape, "checkpoint tensor shape mismatch for " + name);
        t = it->second;
        ++applied;
    });
    ensure(applied == stored.size(), "checkpoint holds unexpected extra tensors");
    return out;
}

// ---- loss log (one JSON object per line) ----

class LossLog {
public:
    explicit LossLog(const std::string& path) : os_(path) {
        ensure(os_.good(), "cannot open " + path + " for writing");
    }

    void record(long step, const StepLosses& losses, bool autoencoder) {
        json adv{{"step", step},
                 {"phase", "infogan"},
                 {"d_loss", losses.d_loss},
                 {"gradient_penalty", losses.gp},
                 {"adversarial", losses.adv},
                 {"categorical", losses.q_loss}};
        os_ << adv.dump() << '\n';
        if (autoencoder) {
            json ae{{"step", step}, {"phase", "autoencoder"}, {"reconstruction", losses.recon}};
            os_ << ae.dump() << '\n';
        }
        os_.flush();
    }

private:
    std::ofstream os_;
};

// ---- evaluation report ----

inline json report_to_json(const EvalReport& report) {
    json j;
    j["schema_version"] = report.schema_version;
    j["config"] = report.config_echo.empty() ? json() : json::parse(report.config_echo);
    j["accuracy"] = report.accuracy ? json(*report.accuracy) : json();
    j["topic_to_label"] = report.topic_to_label;
    j["label_names"] = report.label_names;
    json topics = json::array();
    for (const auto& topic : report.topic_words) {
        json words = json::array();
        for (const auto& w : topic) {
            words.push_back({{"index", w.index}, {"word", w.word}, {"score", w.score}});
        }
        topics.push_back(words);
    }
    j["topic_words"] = topics;
    j["coherence"] = report.coherence ? json(*report.coherence) : json();
    j["coherence_skipped_pairs"] = report.coherence_skipped_pairs;
    if (report.disentanglement) {
        const auto& d = *report.disentanglement;
        j["disentanglement"] = {{"cross_code", {{"mean", d.cross_code.mean}, {"stddev", d.cross_code.stddev}}},
                                {"within_code", {{"mean", d.within_code.mean}, {"stddev", d.within_code.stddev}}},
                                {"top_m", d.top_m},
                                {"repetitions", d.repetitions},
                                {"noise_draws", d.noise_draws}};
    } else {
        j["disentanglement"] = json();
    }
    return j;
}

inline EvalReport report_from_json(const json& j) {
    EvalReport report;
    report.schema_version = j.at("schema_version").get<int>();
    report.config_echo = j.at("config").is_null() ? "" : j.at("config").dump();
    if (!j.at("accuracy").is_null()) report.accuracy = j.at("accuracy").get<double>();
    report.topic_to_label = j.at("topic_to_label").get<std::vector<int>>();
    report.label_names = j.at("label_names").get<std::vector<std::string>>();
    for (const auto& topic : j.at("topic_words")) {
        std::vector<ScoredWord> words;
        for (const auto& w : topic) {
            words.push_back({w.at("index").get<int>(), w.at("word").get<std::string>(),
                             w.at("score").get<double>()});
        }
        report.topic_words.push_back(std::move(words));
    }
    if (!j.at("coherence").is_null()) report.coherence = j.at("coherence").get<double>();
    report.coherence_skipped_pairs = j.at("coherence_skipped_pairs").get<std::size_t>();
    if (!j.at("disentanglement").is_null()) {
        const auto& d = j.at("disentanglement");
        DisentanglementReport dr;
        dr.cross_code.mean = d.at("cross_code").at("mean").get<double>();
        dr.cross_code.stddev = d.at("cross_code").at("stddev").get<double>();
        dr.within_code.mean = d.at("within_code").at("mean").get<double>();
        dr.within_code.stddev = d.at("within_code").at("stddev").get<double>();
        dr.top_m = d.at("top_m").get<int>();
        dr.repetitions = d.at("repetitions").get<int>();
        dr.noise_draws = d.at("noise_draws").get<int>();
        report.disentanglement = dr;
    }
    return report;
}

inline void save_report(const std::string& path, const EvalReport& report) {
    std::ofstream os(path);
    ensure(os.good(), "cannot open " + path + " for writing");
    os << report_to_json(report).dump(2) << '\n';
    ensure(os.good(), "write failed on " + path);
}

inline EvalReport load_report(const std::string& path) {
    std::ifstream is(path);
    ensure(is.good(), "cannot open " + path);
    json j;
    is >> j;
    return report_from_json(j);
}

// ---- training with persistence ----

struct TrainOptions {
    std::string checkpoint_dir;      // empty: no checkpoints
    int checkpoint_every_epochs = 1;
    std::string loss_log_path;       // empty: no log
};

inline std::string checkpoint_path(const std::string& dir, const std::string& stem) {
    return dir + "/" + stem + ".ckpt";
}

// train() plus checkpoint files at the configured cadence and a final
// checkpoint, and an optional JSONL loss log.
inline TrainResult train_and_persist(const TiganConfig& config, const BowDataset& dataset,
                                     const Vocabulary& vocab, const EmbeddingMatrix* embeddings,
                                     const TrainOptions& options) {
    std::optional<LossLog> log;
    if (!options.loss_log_path.empty()) log.emplace(options.loss_log_path);

    const std::uint64_t vocab_hash = vocab.hash();
    TrainCallbacks callbacks;
    callbacks.on_step = [&](long step, const StepLosses& losses) {
        if (log) log->record(step, losses, config.autoencoder);
    };
    callbacks.on_checkpoint = [&](int epoch, const TiganModel& model, const TrainState& state,
                                  bool final) {
        if (options.checkpoint_dir.empty()) return;
        if (final) {
            save_checkpoint(checkpoint_path(options.checkpoint_dir, "final"), model, config,
                            vocab_hash, epoch, state.step);
        } else if (options.checkpoint_every_epochs > 0 &&
                   (epoch + 1) % options.checkpoint_every_epochs == 0) {
            save_checkpoint(checkpoint_path(options.checkpoint_dir,
                                            "epoch" + std::to_string(epoch)),
                            model, config, vocab_hash, epoch, state.step);
        }
    };
    return train(config, dataset, vocab, embeddings, callbacks);
}

}  // namespace tigan
