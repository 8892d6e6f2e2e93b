#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "hnal/annotation.hpp"
#include "hnal/eval.hpp"
#include "hnal/orchestrator.hpp"

using namespace hnal;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CorpusArgs {
  std::string embeddings;
  std::string pairs;

  void add(CLI::App* app) {
    app->add_option("--embeddings", embeddings, "embeddings JSON Lines file")->required();
    app->add_option("--pairs", pairs, "image_id,text_id CSV")->required();
  }
  Corpus load() const { return ingest_corpus(fs::path(embeddings), fs::path(pairs)); }
};

// Every ALRunConfig field as an optional flag; only flags given on the
// command line override the config file.
struct ConfigArgs {
  std::string file;
  std::optional<double> init_fraction, budget_fraction, test_fraction;
  std::optional<std::size_t> max_epochs;
  std::optional<std::string> strategy, direction;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::size_t>> eval_ks;
  std::optional<std::string> batch_mode, weight_mode;
  std::optional<std::size_t> zs_size, k;
  std::optional<std::size_t> n_local, codebook_k, kmeans_iters;
  std::optional<double> jitter;
  std::optional<double> alpha, lr;
  std::optional<std::size_t> train_epochs, batch_size, lr_decay_epoch, embed_dim;

  void add(CLI::App* app) {
    app->add_option("--config", file, "JSON config file; flags override it");
    app->add_option("--init-fraction", init_fraction);
    app->add_option("--budget-fraction", budget_fraction);
    app->add_option("--test-fraction", test_fraction);
    app->add_option("--max-epochs", max_epochs);
    app->add_option("--strategy", strategy, "hardneg | random | coreset-mean | coreset-bow");
    app->add_option("--direction", direction, "image_pool | text_pool");
    app->add_option("--seed", seed);
    app->add_option("--eval-ks", eval_ks)->delimiter(',');
    app->add_option("--batch-mode", batch_mode, "full | mini");
    app->add_option("--zs-size", zs_size, "0 scales with the corpus");
    app->add_option("--k", k, "threshold rank");
    app->add_option("--weight-mode", weight_mode, "surplus | count");
    app->add_option("--n-local", n_local);
    app->add_option("--jitter", jitter);
    app->add_option("--codebook-k", codebook_k);
    app->add_option("--kmeans-iters", kmeans_iters);
    app->add_option("--alpha", alpha, "hinge margin");
    app->add_option("--train-epochs", train_epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", lr);
    app->add_option("--lr-decay-epoch", lr_decay_epoch);
    app->add_option("--embed-dim", embed_dim);
  }

  ALRunConfig resolve() const {
    ALRunConfig c;
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + file);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, file + ": " + e.what());
      }
      c = config_from_json(j, c);
    }
    auto set = [](const auto& flag, auto& field) {
      if (flag) field = *flag;
    };
    set(init_fraction, c.init_fraction);
    set(budget_fraction, c.budget_fraction);
    set(test_fraction, c.test_fraction);
    set(max_epochs, c.max_epochs);
    set(seed, c.seed);
    set(eval_ks, c.eval_ks);
    if (strategy) c.strategy = parse_strategy(*strategy);
    if (direction) c.direction = parse_direction(*direction);
    if (batch_mode) c.hardneg.batch_mode = parse_batch_mode(*batch_mode);
    if (weight_mode) c.hardneg.weight_mode = parse_weight_mode(*weight_mode);
    set(zs_size, c.hardneg.zs_size);
    set(k, c.hardneg.k);
    set(n_local, c.coreset.n_local);
    set(jitter, c.coreset.jitter);
    set(codebook_k, c.coreset.codebook_k);
    set(kmeans_iters, c.coreset.kmeans_iters);
    set(alpha, c.train.alpha);
    set(train_epochs, c.train.epochs);
    set(batch_size, c.train.batch_size);
    set(lr, c.train.learning_rate);
    set(lr_decay_epoch, c.train.lr_decay_epoch);
    set(embed_dim, c.train.embed_dim);
    c.validate();
    return c;
  }
};

// Percentage points, as retrieval tables are usually read.
void print_metrics(const EpochMetrics& m) {
  std::printf("epoch %zu  paired %.1f%%", m.epoch, 100.0 * m.paired_fraction);
  for (const auto& [k, v] : m.r_at_k_text) std::printf("  text R@%zu %.1f", k, 100.0 * v);
  for (const auto& [k, v] : m.r_at_k_image) std::printf("  image R@%zu %.1f", k, 100.0 * v);
  std::printf("\n");
}

void print_sum(std::span<const EpochMetrics> history) {
  if (history.empty()) return;
  for (const auto& [k, _] : history.front().r_at_k_text) std::printf("R@%zu-sum %.1f\n", k, r_at_k_sum(history, k));
}

void write_outputs(const RunState& s, const std::string& metrics, const std::string& trace) {
  if (!metrics.empty()) export_metrics_csv(s, metrics);
  if (!trace.empty()) export_selection_trace(s, trace);
}

int cmd_synth(const SynthParams& p, const std::string& emb, const std::string& pairs) {
  Corpus c = synth_corpus(p);
  write_corpus(c, fs::path(emb), fs::path(pairs));
  std::printf("wrote %zu pairs (dim %zu) to %s, %s\n", c.size(), p.dim, emb.c_str(), pairs.c_str());
  return 0;
}

int cmd_ingest(const CorpusArgs& ca) {
  Corpus c = ca.load();
  json j{{"pairs", c.size()}, {"image_dim", c.dims().image_dim}, {"text_dim", c.dims().text_dim}};
  std::printf("%s\n", j.dump().c_str());
  return 0;
}

int cmd_run(const CorpusArgs& ca, const ConfigArgs& cfg, const std::string& metrics, const std::string& trace,
            const std::string& state, const std::string& resume, bool quiet) {
  Corpus corpus = ca.load();
  RunState s;
  if (!resume.empty()) {
    s = load_state(resume);  // the checkpoint carries its own config
  } else {
    s = start_run(cfg.resolve(), corpus);
    if (!state.empty()) save_state(s, state);
  }
  if (!quiet)
    for (const auto& m : s.history) print_metrics(m);
  s = continue_scenario(std::move(s), corpus, [&](const RunState& cur) {
    if (!state.empty()) save_state(cur, state);
    if (!quiet) print_metrics(cur.history.back());
  });
  if (!state.empty()) save_state(s, state);
  write_outputs(s, metrics, trace);
  if (!quiet) print_sum(s.history);
  return 0;
}

int cmd_eval(const CorpusArgs& ca, const std::string& state, std::vector<std::size_t> ks, const std::string& out) {
  Corpus corpus = ca.load();
  RunState s = load_state(state);
  if (ks.empty()) ks = s.config.eval_ks;
  const double frac = static_cast<double>(s.paired.size()) / static_cast<double>(s.corpus_pairs);
  EpochMetrics m = evaluate(s.model, corpus, s.test, ks, s.epoch, frac);
  print_metrics(m);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + out);
    std::vector<EpochMetrics> one{m};
    write_metrics_csv(one, f);
  }
  return 0;
}

int cmd_report(const std::string& metrics, const std::string& trace) {
  std::ifstream in(metrics);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + metrics);
  auto history = read_metrics_csv(in);
  for (const auto& m : history) print_metrics(m);
  print_sum(history);
  if (!trace.empty()) {
    std::ifstream t(trace);
    if (!t) throw Error(ErrorCode::IoError, "cannot open " + trace);
    std::string line;
    while (std::getline(t, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      std::printf("selection epoch %zu  %s  %zu items", j.at("epoch").get<std::size_t>(),
                  j.at("strategy").get<std::string>().c_str(), j.at("selected").size());
      if (!j.at("hard_negative_ratio").is_null())
        std::printf("  hard-negative ratio %.1f%%", 100.0 * j.at("hard_negative_ratio").get<double>());
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_serve(const CorpusArgs& ca, const ConfigArgs& cfg, const std::string& state, const std::string& host,
              int port, const std::string& static_dir) {
  Corpus corpus = ca.load();
  RunState s = fs::exists(state) ? load_state(state) : start_run(cfg.resolve(), corpus);
  AnnotationSession session(std::move(corpus), std::move(s), fs::path(state));
  httplib::Server server;
  std::optional<fs::path> mount;
  if (!static_dir.empty()) mount = static_dir;
  register_routes(server, session, mount);
  if (port == 0) {
    port = server.bind_to_any_port(host);
    if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    std::printf("listening on http://%s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    return server.listen_after_bind() ? 0 : 1;
  }
  std::printf("listening on http://%s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hard-negative active learning for image-text retrieval"};
  app.require_subcommand(1);

  SynthParams sp;
  std::string synth_emb, synth_pairs;
  auto* synth = app.add_subcommand("synth", "generate a clustered synthetic corpus");
  synth->add_option("--clusters", sp.n_clusters);
  synth->add_option("--per-cluster", sp.per_cluster);
  synth->add_option("--dim", sp.dim);
  synth->add_option("--noise", sp.noise_sigma, "per-dimension noise std");
  synth->add_option("--spread", sp.item_spread, "per-dimension item offset std");
  synth->add_option("--seed", sp.seed);
  synth->add_option("--embeddings", synth_emb)->required();
  synth->add_option("--pairs", synth_pairs)->required();

  CorpusArgs ingest_corpus_args;
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and print its shape");
  ingest_corpus_args.add(ingest);

  CorpusArgs run_corpus;
  ConfigArgs run_cfg;
  std::string run_metrics, run_trace, run_state, run_resume;
  bool quiet = false, print_config = false;
  auto* run = app.add_subcommand("run", "run an active learning scenario with the simulated annotator");
  run_corpus.add(run);
  run_cfg.add(run);
  run->add_option("--metrics", run_metrics, "metrics CSV output");
  run->add_option("--trace", run_trace, "selection trace JSON Lines output");
  run->add_option("--state", run_state, "checkpoint, rewritten after every epoch");
  run->add_option("--resume", run_resume, "continue from a checkpoint");
  run->add_flag("--quiet", quiet);
  run->add_flag("--print-config", print_config, "print the resolved config as JSON and exit");

  CorpusArgs eval_corpus;
  std::string eval_state, eval_out;
  std::vector<std::size_t> eval_ks;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint's model on its test split");
  eval_corpus.add(eval);
  eval->add_option("--state", eval_state)->required();
  eval->add_option("--ks", eval_ks)->delimiter(',');
  eval->add_option("--metrics", eval_out, "metrics CSV output");

  std::string report_metrics, report_trace;
  auto* report = app.add_subcommand("report", "summarize a metrics CSV and selection trace");
  report->add_option("--metrics", report_metrics)->required();
  report->add_option("--trace", report_trace);

  CorpusArgs serve_corpus;
  ConfigArgs serve_cfg;
  std::string serve_state, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "annotation HTTP service");
  serve_corpus.add(serve);
  serve_cfg.add(serve);
  serve->add_option("--state", serve_state, "checkpoint; resumed when it exists")->required();
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port, "0 picks a free port");
  serve->add_option("--static", serve_static, "directory served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(sp, synth_emb, synth_pairs);
    if (*ingest) return cmd_ingest(ingest_corpus_args);
    if (*run) {
      if (print_config) {
        std::printf("%s\n", to_json(run_cfg.resolve()).dump(2).c_str());
        return 0;
      }
      return cmd_run(run_corpus, run_cfg, run_metrics, run_trace, run_state, run_resume, quiet);
    }
    if (*eval) return cmd_eval(eval_corpus, eval_state, eval_ks, eval_out);
    if (*report) return cmd_report(report_metrics, report_trace);
    if (*serve) return cmd_serve(serve_corpus, serve_cfg, serve_state, serve_host, serve_port, serve_static);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
