// commrec command-line front end. Each subcommand reads and writes artifacts
// on disk so a pipeline can be rerun step by step.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "commrec/commrec.hpp"

namespace fs = std::filesystem;
using namespace commrec;

namespace {

struct Common {
  std::string data;
  std::string split;
  std::string similarity;
  std::string mf_model;
};

RatingMatrix training_matrix(const InteractionDataset& ds, const SplitSpec& split) {
  return build_rating_matrix(training_dataset(ds, split), split.negatives);
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    unsigned long long k = 0;
    try {
      k = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || k == 0) throw Error("--ks expects positive integers, got \"" + item + "\"");
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) throw Error("--ks is empty");
  return ks;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  auto out = detail::open_output(path);
  out << text;
}

SimilarityMatrix load_similarity_for(const InteractionDataset& ds, const std::string& path) {
  auto c = load_similarity(path);
  if (c.ids != ds.communities()) throw ContractError("similarity matrix communities do not match the dataset");
  return c;
}

MfModel load_model_for(const InteractionDataset& ds, const std::string& path) {
  auto m = load_model(path);
  if (m.num_users() != ds.num_users() || m.num_communities() != ds.num_communities())
    throw ContractError("MF model shape does not match the dataset");
  return m;
}

ScoreMatrix cbf_scores(const InteractionDataset& ds, const SplitSpec& split, const std::string& similarity) {
  if (similarity.empty()) throw Error("--similarity is required for CBF scores");
  auto p = predict_cbf(training_matrix(ds, split), load_similarity_for(ds, similarity));
  if (!p.fallback_cells.empty())
    std::cerr << "note: " << p.fallback_cells.size() << " CBF cells fell back to the user's mean rating\n";
  return std::move(p.scores);
}

ScoreMatrix mf_scores(const InteractionDataset& ds, const std::string& model) {
  if (model.empty()) throw Error("--mf-model is required for MF scores");
  return predict_mf(load_model_for(ds, model));
}

std::string model_label(const std::string& model, std::optional<double> beta) {
  if (model == "cbf") return "Content-Based Filtering";
  if (model == "mf") return "Matrix Factorization";
  if (model == "random") return "Random Predictor";
  std::ostringstream s;
  s << "Hybrid (beta=" << *beta << ")";
  return s.str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community recommender: content-based filtering, matrix factorization and their blend"};
  app.require_subcommand(1);

  // ingest
  struct {
    std::string posts, meta, out;
    std::size_t min_communities = 3;
  } ingest_opt;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate posts/meta, apply the activity filter, write a dataset dir");
  ingest_cmd->add_option("--posts", ingest_opt.posts, "posts.jsonl")->required();
  ingest_cmd->add_option("--meta", ingest_opt.meta, "meta.jsonl")->required();
  ingest_cmd->add_option("--min-communities", ingest_opt.min_communities, "Keep users with at least this many communities")
      ->capture_default_str();
  ingest_cmd->add_option("--out", ingest_opt.out, "Output dataset directory")->required();

  // split
  struct {
    std::string data, out;
    std::uint64_t seed = 0;
  } split_opt;
  auto* split_cmd = app.add_subcommand("split", "Leave-latest-community-out split with sampled negatives");
  split_cmd->add_option("--data", split_opt.data, "Dataset directory")->required();
  split_cmd->add_option("--seed", split_opt.seed, "Negative sampling seed")->capture_default_str();
  split_cmd->add_option("--out", split_opt.out, "split.json")->required();

  // featurize
  struct {
    std::string mode, data, split, embeddings, info = "description", out;
  } feat_opt;
  auto* feat_cmd = app.add_subcommand("featurize", "Build one embedding per community");
  feat_cmd->add_option("--mode", feat_opt.mode, "tfidf-desc, tfidf-posts or import")
      ->required()
      ->check(CLI::IsMember({"tfidf-desc", "tfidf-posts", "import"}));
  feat_cmd->add_option("--data", feat_opt.data, "Dataset directory")->required();
  feat_cmd->add_option("--split", feat_opt.split, "split.json; post-based modes then use training posts only");
  feat_cmd->add_option("--embeddings", feat_opt.embeddings, "embeddings.jsonl to import");
  feat_cmd->add_option("--info", feat_opt.info, "What imported vectors describe: description or posts")
      ->check(CLI::IsMember({"description", "posts"}))
      ->capture_default_str();
  feat_cmd->add_option("--out", feat_opt.out, "Community embeddings.jsonl")->required();

  // similarity
  struct {
    std::string embeddings, data, out;
  } sim_opt;
  auto* sim_cmd = app.add_subcommand("similarity", "Pairwise cosine similarity of community embeddings");
  sim_cmd->add_option("--embeddings", sim_opt.embeddings, "Community embeddings.jsonl")->required();
  sim_cmd->add_option("--data", sim_opt.data, "Dataset directory; requires an embedding for every community");
  sim_cmd->add_option("--out", sim_opt.out, "similarity.csv")->required();

  // train-mf
  struct {
    std::string data, split, out;
    MfConfig cfg;
    bool allow_negative = false;
  } mf_opt;
  auto* mf_cmd = app.add_subcommand("train-mf", "Train biased matrix factorization with SGD");
  mf_cmd->add_option("--data", mf_opt.data, "Dataset directory")->required();
  mf_cmd->add_option("--split", mf_opt.split, "split.json")->required();
  mf_cmd->add_option("--k", mf_opt.cfg.k, "Latent dimension")->capture_default_str();
  mf_cmd->add_option("--lambda", mf_opt.cfg.lambda, "L2 regularization")->capture_default_str();
  mf_cmd->add_option("--lr", mf_opt.cfg.learning_rate, "Learning rate")->capture_default_str();
  mf_cmd->add_option("--epochs", mf_opt.cfg.epochs, "Epochs")->capture_default_str();
  mf_cmd->add_option("--seed", mf_opt.cfg.seed, "Init and shuffle seed")->capture_default_str();
  mf_cmd->add_option("--init-scale", mf_opt.cfg.init_scale, "Factors start uniform on [0, scale]")
      ->capture_default_str();
  mf_cmd->add_flag("--allow-negative", mf_opt.allow_negative, "Do not clamp factors at zero");
  mf_cmd->add_option("--out", mf_opt.out, "Model checkpoint (JSON)")->required();

  // evaluate
  struct {
    Common io;
    std::string model, ks = "1,3,5,10", out;
    std::optional<double> beta;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
  } eval_opt;
  auto* eval_cmd = app.add_subcommand("evaluate", "MRR and Recall@K on the held-out communities");
  eval_cmd->add_option("--model", eval_opt.model, "cbf, mf, hybrid or random")
      ->required()
      ->check(CLI::IsMember({"cbf", "mf", "hybrid", "random"}));
  eval_cmd->add_option("--beta", eval_opt.beta, "Hybrid weight on CBF, in [0, 1]");
  eval_cmd->add_option("--ks", eval_opt.ks, "Comma-separated cutoffs")->capture_default_str();
  eval_cmd->add_option("--data", eval_opt.io.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", eval_opt.io.split, "split.json")->required();
  eval_cmd->add_option("--similarity", eval_opt.io.similarity, "similarity.csv (cbf, hybrid)");
  eval_cmd->add_option("--mf-model", eval_opt.io.mf_model, "MF checkpoint (mf, hybrid)");
  eval_cmd->add_option("--trials", eval_opt.trials, "Trials for the random baseline")->capture_default_str();
  eval_cmd->add_option("--seed", eval_opt.seed, "Seed for the random baseline")->capture_default_str();
  eval_cmd->add_option("--out", eval_opt.out, "Metrics JSON");

  // sweep-beta
  struct {
    Common io;
    double grid_step = 0.05;
    std::string ks = "1,3,5,10", out;
  } sweep_opt;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "Evaluate the hybrid over a grid of beta values");
  sweep_cmd->add_option("--grid-step", sweep_opt.grid_step, "Grid spacing; must divide 1")->capture_default_str();
  sweep_cmd->add_option("--ks", sweep_opt.ks, "Comma-separated cutoffs")->capture_default_str();
  sweep_cmd->add_option("--data", sweep_opt.io.data, "Dataset directory")->required();
  sweep_cmd->add_option("--split", sweep_opt.io.split, "split.json")->required();
  sweep_cmd->add_option("--similarity", sweep_opt.io.similarity, "similarity.csv")->required();
  sweep_cmd->add_option("--mf-model", sweep_opt.io.mf_model, "MF checkpoint")->required();
  sweep_cmd->add_option("--out", sweep_opt.out, "Curve CSV")->required();

  // explain
  struct {
    Common io;
    std::string user, community;
    std::size_t top = 0;
    bool item_bias = false;
    std::size_t top_k = 0;
    bool json = false;
  } explain_opt;
  auto* explain_cmd = app.add_subcommand("explain", "CBF score breakdown, item-bias report or top-k comparison");
  explain_cmd->add_option("--data", explain_opt.io.data, "Dataset directory")->required();
  explain_cmd->add_option("--split", explain_opt.io.split, "split.json");
  explain_cmd->add_option("--similarity", explain_opt.io.similarity, "similarity.csv");
  explain_cmd->add_option("--mf-model", explain_opt.io.mf_model, "MF checkpoint");
  explain_cmd->add_option("--user", explain_opt.user, "User id");
  explain_cmd->add_option("--community", explain_opt.community, "Community id");
  explain_cmd->add_option("--top", explain_opt.top, "Rows to show before summarizing the rest (0 = all)");
  explain_cmd->add_flag("--item-bias", explain_opt.item_bias, "Item bias vs. post count report");
  explain_cmd->add_option("--top-k", explain_opt.top_k, "Side-by-side top-k lists of CBF and MF for --user");
  explain_cmd->add_flag("--json", explain_opt.json, "Print JSON instead of text");

  // synth
  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-topic dataset");
  synth_cmd->add_option("--topics", synth_cfg.topics)->capture_default_str();
  synth_cmd->add_option("--communities-per-topic", synth_cfg.communities_per_topic)->capture_default_str();
  synth_cmd->add_option("--users", synth_cfg.users)->capture_default_str();
  synth_cmd->add_option("--posts-per-user", synth_cfg.posts_per_user)->capture_default_str();
  synth_cmd->add_option("--noise", synth_cfg.noise)->capture_default_str();
  synth_cmd->add_option("--vocab-per-topic", synth_cfg.vocab_per_topic)->capture_default_str();
  synth_cmd->add_option("--description-words", synth_cfg.description_words)->capture_default_str();
  synth_cmd->add_option("--post-words", synth_cfg.post_words)->capture_default_str();
  synth_cmd->add_option("--seed", synth_cfg.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*ingest_cmd) {
      auto ds = ingest(fs::path(ingest_opt.posts), fs::path(ingest_opt.meta));
      const auto before = ds.num_users();
      ds = filter_min_communities(ds, ingest_opt.min_communities);
      write_dataset(ds, ingest_opt.out);
      std::cout << "users " << ds.num_users() << " (of " << before << "), communities " << ds.num_communities()
                << ", posts " << ds.posts().size() << '\n';
    } else if (*split_cmd) {
      const auto ds = load_dataset(split_opt.data);
      const auto split = build_split(ds, split_opt.seed);
      ensure_parent(split_opt.out);
      save_split(split, ds, split_opt.out);
      std::cout << "test users " << split.test_examples.size() << ", without test " << split.users_without_test
                << ", negatives " << split.negatives.size() << '\n';
      if (!split.overflow_users.empty())
        std::cerr << "note: " << split.overflow_users.size()
                  << " users had fewer unposted communities than positives; negatives repeat for them\n";
    } else if (*feat_cmd) {
      const auto ds = load_dataset(feat_opt.data);
      std::optional<SplitSpec> split;
      if (!feat_opt.split.empty()) split = load_split(feat_opt.split, ds);
      const std::span<const Post> posts = split ? std::span<const Post>(split->train_posts)
                                                : std::span<const Post>(ds.posts());
      CommunityEmbeddings emb;
      if (feat_opt.mode == "tfidf-desc") {
        if (!feat_opt.embeddings.empty()) throw Error("--embeddings is only valid with --mode import");
        emb = community_embeddings_from_descriptions(ds);
      } else if (feat_opt.mode == "tfidf-posts") {
        if (!feat_opt.embeddings.empty()) throw Error("--embeddings is only valid with --mode import");
        emb = community_embeddings_from_posts_tfidf(ds, posts);
      } else {
        if (feat_opt.embeddings.empty()) throw Error("--mode import requires --embeddings");
        if (feat_opt.info == "posts")
          emb = community_embeddings_from_posts(ds, posts, import_embeddings(feat_opt.embeddings, EmbeddingInfo::posts));
        else
          emb = community_embeddings_from_descriptions(ds, import_embeddings(feat_opt.embeddings));
      }
      ensure_parent(feat_opt.out);
      export_embeddings(emb.table, feat_opt.out);
      std::cout << "communities " << emb.table.size() << ", dimension " << emb.table.dim() << '\n';
      if (!emb.fallback_ids.empty())
        std::cerr << "note: " << emb.fallback_ids.size() << " communities had no text and got the mean vector\n";
    } else if (*sim_cmd) {
      const auto table = import_embeddings(sim_opt.embeddings);
      std::vector<std::string> ids;
      if (!sim_opt.data.empty()) {
        ids = load_dataset(sim_opt.data).communities();
      } else {
        for (const auto& [id, v] : table.vectors()) ids.push_back(id);
      }
      const auto c = build_similarity(table, ids);
      ensure_parent(sim_opt.out);
      save_similarity(c, sim_opt.out);
      std::cout << "similarity " << c.size() << " x " << c.size() << '\n';
    } else if (*mf_cmd) {
      const auto ds = load_dataset(mf_opt.data);
      const auto split = load_split(mf_opt.split, ds);
      mf_opt.cfg.nonnegative = !mf_opt.allow_negative;
      double last = 0.0;
      const auto model = train(training_matrix(ds, split), mf_opt.cfg,
                               [&](std::size_t, double l, const MfModel&) { last = l; });
      ensure_parent(mf_opt.out);
      save_model(model, mf_opt.out);
      std::cout << "final loss " << last << '\n';
    } else if (*eval_cmd) {
      const auto ds = load_dataset(eval_opt.io.data);
      const auto split = load_split(eval_opt.io.split, ds);
      const auto ks = parse_ks(eval_opt.ks);
      const Evaluator ev(ds, split, ks);
      const auto& model = eval_opt.model;
      if (model == "hybrid" && !eval_opt.beta) throw Error("--model hybrid requires --beta");
      if (model != "hybrid" && eval_opt.beta) throw Error("--beta only applies to --model hybrid");

      EvalReport report;
      nlohmann::ordered_json seeds;
      seeds["split"] = split.rng_seed;
      if (model == "random") {
        report = ev.random_baseline(eval_opt.seed, eval_opt.trials);
        seeds["random"] = eval_opt.seed;
      } else if (model == "cbf") {
        report = ev.evaluate(cbf_scores(ds, split, eval_opt.io.similarity));
      } else if (model == "mf") {
        const auto m = load_model_for(ds, eval_opt.io.mf_model);
        seeds["mf"] = m.config.seed;
        report = ev.evaluate(predict_mf(m));
      } else {
        const auto m = load_model_for(ds, eval_opt.io.mf_model);
        seeds["mf"] = m.config.seed;
        report = ev.evaluate(blend(cbf_scores(ds, split, eval_opt.io.similarity), predict_mf(m), *eval_opt.beta));
      }

      nlohmann::ordered_json j;
      j["format"] = "commrec-metrics";
      j["version"] = 1;
      j["model"] = model;
      if (eval_opt.beta) j["beta"] = *eval_opt.beta;
      if (model == "random") j["trials"] = eval_opt.trials;
      j["seeds"] = seeds;
      j["metrics"] = report_to_json(report);
      if (!eval_opt.out.empty()) write_text(eval_opt.out, j.dump(2) + "\n");
      std::cout << format_report_table({{model_label(model, eval_opt.beta), report}});
      if (model == "random")
        std::cout << "closed form MRR " << ev.expected_random_mrr() << ", std error " << *report.mrr_std_error << '\n';
    } else if (*sweep_cmd) {
      const auto ds = load_dataset(sweep_opt.io.data);
      const auto split = load_split(sweep_opt.io.split, ds);
      const Evaluator ev(ds, split, parse_ks(sweep_opt.ks));
      const auto sweep = sweep_beta(cbf_scores(ds, split, sweep_opt.io.similarity), mf_scores(ds, sweep_opt.io.mf_model),
                                    ev, beta_grid(sweep_opt.grid_step));
      ensure_parent(sweep_opt.out);
      auto out = detail::open_output(sweep_opt.out);
      write_sweep_csv(out, sweep);
      const auto& best = sweep.best_row();
      std::cout << format_report_table({{"Content-Based Filtering", sweep.rows.back().report},
                                        {"Matrix Factorization", sweep.rows.front().report},
                                        {model_label("hybrid", best.beta), best.report}});
    } else if (*explain_cmd) {
      const auto ds = load_dataset(explain_opt.io.data);
      const int modes = (explain_opt.item_bias ? 1 : 0) + (explain_opt.top_k > 0 ? 1 : 0) +
                        (!explain_opt.community.empty() ? 1 : 0);
      if (modes != 1) throw Error("explain needs exactly one of --community, --item-bias or --top-k");
      auto user_index = [&]() {
        if (explain_opt.user.empty()) throw Error("--user is required");
        const auto i = ds.user_index(explain_opt.user);
        if (!i) throw ReferenceError("unknown user \"" + explain_opt.user + "\"");
        return *i;
      };
      auto need_split = [&]() {
        if (explain_opt.io.split.empty()) throw Error("--split is required");
        return load_split(explain_opt.io.split, ds);
      };

      if (explain_opt.item_bias) {
        if (explain_opt.io.mf_model.empty()) throw Error("--item-bias requires --mf-model");
        const auto r = item_bias_report(load_model_for(ds, explain_opt.io.mf_model), ds);
        std::cout << (explain_opt.json ? item_bias_to_json(r).dump(2) + "\n" : format_item_bias(r));
      } else if (explain_opt.top_k > 0) {
        const auto split = need_split();
        const auto i = user_index();
        const auto cbf = cbf_scores(ds, split, explain_opt.io.similarity);
        const auto mf = mf_scores(ds, explain_opt.io.mf_model);
        std::cout << format_side_by_side({{"CBF", top_k_table(cbf, split, ds, i, explain_opt.top_k)},
                                          {"MF", top_k_table(mf, split, ds, i, explain_opt.top_k)}});
      } else {
        const auto split = need_split();
        const auto i = user_index();
        const auto j = ds.community_index(explain_opt.community);
        if (!j) throw ReferenceError("unknown community \"" + explain_opt.community + "\"");
        if (explain_opt.io.similarity.empty()) throw Error("--community requires --similarity");
        const auto ex = explain_cbf(training_matrix(ds, split), load_similarity_for(ds, explain_opt.io.similarity), i,
                                    *j, explain_opt.top);
        std::cout << (explain_opt.json ? explanation_to_json(ex, ds).dump(2) + "\n" : format_explanation(ex, ds));
      }
    } else if (*synth_cmd) {
      const auto s = generate(synth_cfg);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      write_dataset(s.dataset, synth_out);
      std::cout << "users " << s.dataset.num_users() << ", communities " << s.dataset.num_communities() << ", posts "
                << s.dataset.posts().size() << '\n';
    }
  } catch (const commrec::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
