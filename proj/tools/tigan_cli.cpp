// Command-line front end: preprocess -> embed -> train -> eval, plus the
// k-means baseline and the synthetic corpus generator. Every subcommand can
// read its options from an INI config file (--config) with one section per
// subcommand; command-line flags override file values.
//
// Subcommands validate all inputs before writing anything, so a bad
// configuration never leaves partial outputs behind.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tigan/tigan.hpp"

namespace {

using namespace tigan;

std::vector<std::vector<std::string>> tokenized_corpus(const std::vector<std::string>& lines,
                                                       const PreprocessConfig& config) {
    std::vector<std::vector<std::string>> docs;
    bool labeled = !lines.empty();
    for (const auto& line : lines) {
        if (!line.empty() && line.find('\t') == std::string::npos) labeled = false;
    }
    for (const auto& line : lines) {
        if (line.empty()) continue;
        const std::string text = labeled ? split_label_line(line).second : line;
        docs.push_back(tokenize(text, config));
    }
    return docs;
}

struct SynthArgs {
    SyntheticSpec spec;
    std::uint64_t seed = 7;
    std::string out;
    std::string planted_out;
};

int run_synth(const SynthArgs& args) {
    auto corpus = synthetic_corpus(args.spec, args.seed);
    {
        std::ofstream os(args.out);
        ensure(os.good(), "cannot open " + args.out + " for writing");
        for (const auto& line : corpus.lines) os << line << '\n';
        ensure(os.good(), "write failed on " + args.out);
    }
    if (!args.planted_out.empty()) {
        json j;
        j["topic_words"] = corpus.topic_words;
        j["shared_pool"] = corpus.shared_pool;
        std::ofstream os(args.planted_out);
        ensure(os.good(), "cannot open " + args.planted_out + " for writing");
        os << j.dump(2) << '\n';
    }
    std::cout << "wrote " << corpus.lines.size() << " documents to " << args.out << "\n";
    return 0;
}

struct PreprocessArgs {
    std::string corpus;
    std::string stopwords;
    std::string out_vocab;
    std::string out_bow;
    PreprocessConfig config;
};

int run_preprocess(PreprocessArgs& args) {
    auto lines = read_lines(args.corpus);
    if (!args.stopwords.empty()) {
        args.config.stopwords = load_stopwords(args.stopwords);
    }
    auto result = preprocess(lines, args.config);
    save_vocabulary(args.out_vocab, result.vocab, args.config);
    save_bow(args.out_bow, result.dataset);
    std::cout << "vocabulary: " << result.vocab.words.size() << " words, "
              << result.vocab.total_kept_tokens << " kept tokens\n"
              << "documents: " << result.dataset.size() << " (" << result.dropped
              << " dropped as empty)\n";
    return 0;
}

struct EmbedArgs {
    std::string corpus;
    std::string vocab;
    std::string import_path;
    std::string out;
    SgnsConfig config;
};

int run_embed(const EmbedArgs& args) {
    auto loaded = load_vocabulary(args.vocab);
    if (!args.import_path.empty()) {
        auto imported = load_embeddings(args.import_path, loaded.vocab, args.config.seed);
        save_embeddings(args.out, loaded.vocab, imported.matrix);
        std::cout << "imported " << loaded.vocab.words.size() - imported.missing << " vectors, "
                  << imported.missing << " vocabulary words seeded randomly\n";
        return 0;
    }
    ensure(!args.corpus.empty(), "embed: either --corpus (train) or --import is required");
    auto lines = read_lines(args.corpus);
    auto docs = tokenized_corpus(lines, loaded.config);
    auto emb = train_sgns(docs, loaded.vocab, args.config);
    save_embeddings(args.out, loaded.vocab, emb);
    std::cout << "trained " << loaded.vocab.words.size() << " x " << args.config.dim
              << " embeddings over " << docs.size() << " documents\n";
    return 0;
}

struct TrainArgs {
    std::string bow;
    std::string vocab;
    std::string embeddings;
    std::string out_dir;
    int checkpoint_every = 1;
    TiganConfig config;
};

int run_train(TrainArgs& args) {
    auto vocab = load_vocabulary(args.vocab);
    auto dataset = load_bow(args.bow);
    ensure(dataset.vocab_size == vocab.vocab.words.size(),
           "train: bow file and vocabulary disagree on the vocabulary size");

    if (args.config.topics == 0) {
        ensure(dataset.k_gold > 0,
               "train: --topics is required when the corpus carries no labels");
        args.config.topics = dataset.k_gold;
    }

    std::optional<EmbeddingMatrix> emb;
    if (args.config.q_variant == QVariant::sif) {
        ensure(!args.embeddings.empty(), "train: the sif variant needs --embeddings");
    }
    if (!args.embeddings.empty()) {
        auto loaded = load_embeddings(args.embeddings, vocab.vocab);
        if (loaded.missing > 0) {
            std::cerr << "note: " << loaded.missing
                      << " vocabulary words missing from the embedding file were seeded randomly\n";
        }
        emb = std::move(loaded.matrix);
    }
    args.config.validate();

    std::filesystem::create_directories(args.out_dir);
    TrainOptions options;
    options.checkpoint_dir = args.out_dir;
    options.checkpoint_every_epochs = args.checkpoint_every;
    options.loss_log_path = args.out_dir + "/losses.jsonl";

    auto result = train_and_persist(args.config, dataset, vocab.vocab,
                                    emb ? &*emb : nullptr, options);
    const auto& last = result.state.history.empty() ? StepLosses{} : result.state.history.back();
    std::cout << "trained " << result.state.step << " steps over " << args.config.epochs
              << " epochs\n"
              << "final losses: d=" << last.d_loss << " gp=" << last.gp << " adv=" << last.adv
              << " q=" << last.q_loss << " recon=" << last.recon << "\n"
              << "checkpoint: " << checkpoint_path(args.out_dir, "final") << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string bow;
    std::string vocab;
    std::string report;
    int top_n = 10;
    int coherence_top_n = 10;
    int disent_top_m = 50;
    int disent_reps = 10;
    int disent_noise_draws = 10;
    std::uint64_t disent_seed = 99;
};

int run_eval(const EvalArgs& args) {
    auto vocab = load_vocabulary(args.vocab);
    auto dataset = load_bow(args.bow);
    auto ckpt = load_checkpoint(args.checkpoint, vocab.vocab.hash());
    ensure(dataset.vocab_size == ckpt.model.vocab_size,
           "eval: bow file and checkpoint disagree on the vocabulary size");

    EvalReport report;
    report.config_echo = config_to_json(ckpt.config).dump();

    auto assignment = infer_topics(ckpt.model, dataset);
    if (dataset.labels) {
        VoteResult vote = vote_accuracy(assignment, *dataset.labels, ckpt.model.topics);
        report.accuracy = vote.accuracy;
        report.topic_to_label = vote.topic_to_label;
        report.label_names = dataset.label_names;
    }

    const int vocab_size = static_cast<int>(ckpt.model.vocab_size);
    auto table = extract_topical_words(ckpt.model, vocab.vocab, std::min(args.top_n, vocab_size));
    report.topic_words = table.topics;
    report.coherence = npmi_coherence(table, dataset, std::min(args.coherence_top_n, vocab_size),
                                      &report.coherence_skipped_pairs);

    Rng rng(args.disent_seed);
    report.disentanglement =
        disentanglement_report(ckpt.model, std::min(args.disent_top_m, vocab_size),
                               args.disent_reps, args.disent_noise_draws, rng);

    save_report(args.report, report);
    std::cout << "report: " << args.report << "\n";
    if (report.accuracy) std::cout << "accuracy: " << *report.accuracy << "\n";
    std::cout << "coherence (npmi): " << *report.coherence << "\n"
              << "overlap cross-code " << report.disentanglement->cross_code.mean
              << " vs within-code " << report.disentanglement->within_code.mean << "\n";
    return 0;
}

struct BaselineArgs {
    std::string bow;
    std::string vocab;
    std::string embeddings;
    std::string report;
    int topics = 0;
    std::uint64_t seed = 7;
    int restarts = 10;
    bool use_sif = false;
};

int run_baseline(const BaselineArgs& args) {
    auto vocab = load_vocabulary(args.vocab);
    auto dataset = load_bow(args.bow);
    ensure(dataset.labels.has_value(), "baseline: the corpus must carry gold labels");
    auto loaded = load_embeddings(args.embeddings, vocab.vocab);
    int topics = args.topics > 0 ? args.topics : dataset.k_gold;

    SifParams sif;
    EvalReport report = embedding_average_baseline(dataset, vocab.vocab, loaded.matrix,
                                                   args.use_sif ? &sif : nullptr, topics,
                                                   args.seed, args.restarts);
    save_report(args.report, report);
    std::cout << "report: " << args.report << "\n"
              << "accuracy: " << *report.accuracy << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TIGAN: topic discovery over bag-of-words text"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file with one section per subcommand");

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "emit a synthetic planted-topic corpus");
    cmd_synth->add_option("--out", synth.out, "corpus output path (label<TAB>text lines)")
        ->required();
    cmd_synth->add_option("--planted-out", synth.planted_out, "planted word sets (JSON)");
    cmd_synth->add_option("--topics", synth.spec.topics, "number of planted topics");
    cmd_synth->add_option("--words-per-topic", synth.spec.words_per_topic, "exclusive words per topic");
    cmd_synth->add_option("--shared-words", synth.spec.shared_words, "shared noise pool size");
    cmd_synth->add_option("--docs-per-topic", synth.spec.docs_per_topic, "documents per topic");
    cmd_synth->add_option("--doc-length", synth.spec.doc_length, "tokens per document");
    cmd_synth->add_option("--noise-rate", synth.spec.noise_rate, "shared-pool token fraction");
    cmd_synth->add_option("--seed", synth.seed, "generator seed");

    PreprocessArgs prep;
    auto* cmd_prep = app.add_subcommand("preprocess", "build vocabulary and bag-of-words files");
    cmd_prep->add_option("--corpus", prep.corpus, "input corpus (label<TAB>text or bare text)")
        ->required();
    cmd_prep->add_option("--stopwords", prep.stopwords, "stopword list, one word per line");
    cmd_prep->add_option("--vocab-cap", prep.config.vocab_cap, "keep the most frequent N words");
    cmd_prep->add_option("--min-token-length", prep.config.min_token_length,
                         "discard shorter tokens");
    cmd_prep->add_flag("!--no-lowercase", prep.config.lowercase, "keep the original case");
    cmd_prep->add_option("--out-vocab", prep.out_vocab, "vocabulary output path")->required();
    cmd_prep->add_option("--out-bow", prep.out_bow, "bag-of-words output path")->required();

    EmbedArgs embed;
    auto* cmd_embed = app.add_subcommand("embed", "train or import word embeddings");
    cmd_embed->add_option("--corpus", embed.corpus, "corpus to train on");
    cmd_embed->add_option("--vocab", embed.vocab, "vocabulary file")->required();
    cmd_embed->add_option("--import", embed.import_path, "import an existing word-vector file");
    cmd_embed->add_option("--out", embed.out, "word-vector output path")->required();
    cmd_embed->add_option("--dim", embed.config.dim, "embedding width");
    cmd_embed->add_option("--window", embed.config.window, "context window");
    cmd_embed->add_option("--negatives", embed.config.negatives, "negative samples per pair");
    cmd_embed->add_option("--epochs", embed.config.epochs, "training epochs");
    cmd_embed->add_option("--lr", embed.config.lr, "learning rate");
    cmd_embed->add_option("--seed", embed.config.seed, "trainer seed");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "train the model");
    cmd_train->add_option("--bow", train_args.bow, "bag-of-words file")->required();
    cmd_train->add_option("--vocab", train_args.vocab, "vocabulary file")->required();
    cmd_train->add_option("--embeddings", train_args.embeddings, "pretrained word vectors");
    cmd_train->add_option("--out-dir", train_args.out_dir,
                          "checkpoint directory (also receives losses.jsonl)")->required();
    cmd_train->add_option("--checkpoint-every", train_args.checkpoint_every,
                          "epochs between checkpoints");
    cmd_train->add_option("--topics", train_args.config.topics,
                          "latent topics (defaults to the gold category count)");
    cmd_train->add_option("--z-dim", train_args.config.z_dim, "noise width");
    cmd_train->add_option("--lambda-mi", train_args.config.lambda_mi, "categorical loss weight");
    cmd_train->add_option("--alpha-clip", train_args.config.alpha_clip, "categorical loss floor");
    cmd_train->add_option("--lambda-gp", train_args.config.lambda_gp, "gradient penalty weight");
    cmd_train->add_option("--critic-steps", train_args.config.critic_steps,
                          "critic updates per generator update");
    cmd_train->add_option("--batch-size", train_args.config.batch_size, "batch size");
    cmd_train->add_option("--epochs", train_args.config.epochs, "training epochs");
    cmd_train->add_option("--seed", train_args.config.seed, "training seed");
    cmd_train
        ->add_option_function<std::string>(
            "--q-variant",
            [&](const std::string& name) { train_args.config.q_variant = q_variant_from_name(name); },
            "topic classifier variant: sif | mlp_random_embed | linear")
        ->check(CLI::IsMember({"sif", "mlp_random_embed", "linear"}));
    cmd_train->add_flag("--finetune-embeddings", train_args.config.finetune_embeddings,
                        "update pretrained embeddings during training");
    cmd_train->add_flag("!--no-autoencoder", train_args.config.autoencoder,
                        "disable the auto-encoder phase");
    cmd_train->add_option("--g-hidden", train_args.config.g_hidden, "generator hidden width");
    cmd_train->add_option("--g-layers", train_args.config.g_layers, "generator hidden layers");
    cmd_train->add_option("--d-hidden", train_args.config.d_hidden, "critic hidden width");
    cmd_train->add_option("--d-layers", train_args.config.d_layers, "critic hidden layers");
    cmd_train->add_option("--e-hidden", train_args.config.e_hidden, "noise predictor hidden width");
    cmd_train->add_option("--embed-dim", train_args.config.embed_dim,
                          "embedding width for the mlp_random_embed variant");
    cmd_train->add_option("--lr", train_args.config.adam.lr, "Adam learning rate");
    cmd_train->add_option("--beta1", train_args.config.adam.beta1, "Adam beta1");
    cmd_train->add_option("--beta2", train_args.config.adam.beta2, "Adam beta2");

    EvalArgs eval_args;
    auto* cmd_eval = app.add_subcommand("eval", "score a checkpoint and write the report");
    cmd_eval->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
    cmd_eval->add_option("--bow", eval_args.bow, "bag-of-words file")->required();
    cmd_eval->add_option("--vocab", eval_args.vocab, "vocabulary file")->required();
    cmd_eval->add_option("--report", eval_args.report, "report output path (JSON)")->required();
    cmd_eval->add_option("--top-n", eval_args.top_n, "topical words per topic");
    cmd_eval->add_option("--coherence-top-n", eval_args.coherence_top_n,
                         "words per topic for NPMI");
    cmd_eval->add_option("--disent-top-m", eval_args.disent_top_m,
                         "generated words per sample for the overlap probes");
    cmd_eval->add_option("--disent-reps", eval_args.disent_reps, "probe repetitions");
    cmd_eval->add_option("--disent-noise-draws", eval_args.disent_noise_draws,
                         "noise draws per code");
    cmd_eval->add_option("--disent-seed", eval_args.disent_seed, "probe seed");

    BaselineArgs baseline;
    auto* cmd_baseline = app.add_subcommand("baseline", "embedding-average + k-means baseline");
    cmd_baseline->add_option("--bow", baseline.bow, "bag-of-words file")->required();
    cmd_baseline->add_option("--vocab", baseline.vocab, "vocabulary file")->required();
    cmd_baseline->add_option("--embeddings", baseline.embeddings, "word-vector file")->required();
    cmd_baseline->add_option("--report", baseline.report, "report output path (JSON)")->required();
    cmd_baseline->add_option("--topics", baseline.topics,
                             "cluster count (defaults to the gold category count)");
    cmd_baseline->add_option("--seed", baseline.seed, "k-means seed");
    cmd_baseline->add_option("--restarts", baseline.restarts, "k-means restarts");
    cmd_baseline->add_flag("--sif", baseline.use_sif, "SIF-weighted averaging");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_synth->parsed()) return run_synth(synth);
        if (cmd_prep->parsed()) return run_preprocess(prep);
        if (cmd_embed->parsed()) return run_embed(embed);
        if (cmd_train->parsed()) return run_train(train_args);
        if (cmd_eval->parsed()) return run_eval(eval_args);
        if (cmd_baseline->parsed()) return run_baseline(baseline);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
