// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "hnal/baselines.hpp"
#include "hnal/eval.hpp"
#include "hnal/hardneg.hpp"
#include "hnal/orchestrator.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hnal;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Instance {
  Corpus corpus;
  PairedSet paired;
  UnpairedPool pool;
  DualEncoderParams model;
};

// Random pairs, the first n_paired of them paired. Coarse instances use
// small integer vectors so exact similarity ties show up.
Instance make_instance(std::size_t n_paired, std::size_t n_pool, std::uint64_t seed, bool coarse = false) {
  std::mt19937_64 rng(seed);
  const std::size_t n = n_paired + n_pool;
  std::uniform_int_distribution<std::size_t> dim(3, 8);
  const std::size_t di = dim(rng), dt = dim(rng);
  Matrix img = hnal::test::random_matrix(n, di, rng), txt = hnal::test::random_matrix(n, dt, rng);
  if (coarse) {
    std::uniform_int_distribution<int> g(1, 3);  // positive, so no zero rows
    for (double& v : img.data) v = g(rng);
    for (double& v : txt.data) v = g(rng);
  }
  Instance in;
  in.corpus = hnal::test::corpus_from(img, txt);
  in.pool.modality = Modality::Image;
  for (std::size_t i = 0; i < n; ++i) {
    const Pair& p = in.corpus.oracle()[i];
    if (i < n_paired)
      in.paired.add(p);
    else
      in.pool.ids.push_back(p.image_id);
  }
  if (coarse)  // identity-like projections keep the integer structure
    in.model = DualEncoderParams{Matrix(di, 3, 0.0), Matrix(dt, 3, 0.0), 3};
  else
    in.model = init_params(in.corpus.dims(), 4, seed * 31 + 7);
  if (coarse)
    for (std::size_t r = 0; r < 3; ++r) in.model.w_img(r, r) = in.model.w_txt(r, r) = 1.0;
  return in;
}

std::set<std::string> hard_set(const ScoreReport& r) {
  std::set<std::string> s;
  for (const auto& [id, h] : r.per_item)
    if (h > 0) s.insert(id);
  return s;
}

Outcome threshold_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::size_t mismatches = 0, compared = 0;
  for (std::uint64_t c = 0; c < 50; ++c) {
    const std::size_t n_paired = std::uniform_int_distribution<std::size_t>(6, 100)(rng);
    Instance in = make_instance(n_paired, 20, 1000 + c, c % 5 == 0);
    for (std::size_t k : {1u, 2u, 5u}) {
      HardNegConfig cfg;
      cfg.k = k;
      auto xi = compute_thresholds(in.paired, in.model, in.corpus, cfg);
      auto want = oracle::thresholds(in.paired, in.model, in.corpus, k);
      mismatches += xi.per_text != want;
      compared += want.size();
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          fmt("%zu mismatching corpus/k cases, %zu thresholds compared, %.2f s (limit 10 s)", mismatches, compared, t)};
}

Outcome score_oracle() {
  double worst = 0;
  std::size_t families = 0;
  for (std::uint64_t c = 0; c < 8; ++c) {
    Instance in = make_instance(40 + 5 * c, 60 + 20 * c, 2000 + c);  // pool 60..200
    for (BatchMode bm : {BatchMode::FullBatch, BatchMode::MiniBatch})
      for (WeightMode wm : {WeightMode::Surplus, WeightMode::Count}) {
        HardNegConfig cfg;
        cfg.batch_mode = bm;
        cfg.weight_mode = wm;
        cfg.zs_size = 12;
        cfg.seed = c;
        auto xi = compute_thresholds(in.paired, in.model, in.corpus, cfg);
        auto rep = score_pool(in.pool, xi, in.model, in.corpus, cfg);
        auto want = oracle::scores(in.pool.ids, xi.scored, xi.per_text, in.model, in.corpus,
                                   wm == WeightMode::Surplus);
        for (const auto& [id, h] : want) worst = std::max(worst, std::abs(rep.per_item.at(id) - h));
        ++families;
      }
  }
  return {worst <= 1e-9, fmt("max |h - oracle| = %.3g over %zu instance/family runs (tol 1e-9)", worst, families)};
}

Outcome relaxation() {
  std::size_t violations = 0;
  for (std::uint64_t c = 0; c < 20; ++c) {
    Instance in = make_instance(30 + c, 80, 3000 + c, c % 4 == 0);
    std::set<std::string> prev;
    for (std::size_t k = 1; k <= 5; ++k) {
      HardNegConfig cfg;
      cfg.k = k;
      auto cur = hard_set(score_pool(in.pool, compute_thresholds(in.paired, in.model, in.corpus, cfg), in.model,
                                     in.corpus, cfg));
      violations += !std::includes(cur.begin(), cur.end(), prev.begin(), prev.end());
      prev = cur;
    }
    HardNegConfig full, mini;
    mini.batch_mode = BatchMode::MiniBatch;
    mini.zs_size = 9;
    mini.seed = c;
    auto xm = compute_thresholds(in.paired, in.model, in.corpus, mini);
    auto xf = compute_thresholds(in.paired, in.model, in.corpus, full);
    xf.scored = xm.scored;  // shared texts
    auto hm = hard_set(score_pool(in.pool, xm, in.model, in.corpus, mini));
    auto hf = hard_set(score_pool(in.pool, xf, in.model, in.corpus, full));
    violations += !std::includes(hm.begin(), hm.end(), hf.begin(), hf.end());
  }
  return {violations == 0, fmt("%zu violations over 20 instances", violations)};
}

Outcome gradient() {
  std::mt19937_64 rng(4);
  const double alpha = 0.2, h = 1e-5;
  double worst = 0;
  std::size_t accepted = 0, rejected = 0;
  while (accepted < 100) {
    Matrix img = hnal::test::random_matrix(4, 6, rng), txt = hnal::test::random_matrix(4, 5, rng);
    DualEncoderParams m{hnal::test::random_matrix(6, 4, rng), hnal::test::random_matrix(5, 4, rng), 4};
    Matrix s(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        s(i, j) = oracle::cos(oracle::project(m.w_img, {img.row(i).begin(), img.row(i).end()}),
                              oracle::project(m.w_txt, {txt.row(j).begin(), txt.row(j).end()}));
    // central differences straddle a kink when it sits closer than the step
    if (!hnal::test::away_from_kinks(s, alpha, 1e-3)) {
      ++rejected;
      continue;
    }
    ++accepted;

    auto gs = max_hinge_loss_grad(s, alpha);
    Matrix fd(4, 4);
    for (std::size_t i = 0; i < 16; ++i) {
      Matrix p = s, q = s;
      p.data[i] += h;
      q.data[i] -= h;
      fd.data[i] = (oracle::hinge_loss(p, alpha) - oracle::hinge_loss(q, alpha)) / (2 * h);
    }
    worst = std::max(worst, hnal::test::rel_err(gs.d_sim, fd));

    auto g = batch_loss_gradient(m, img, txt, alpha);
    for (Matrix DualEncoderParams::*w : {&DualEncoderParams::w_img, &DualEncoderParams::w_txt}) {
      Matrix fw((m.*w).rows, (m.*w).cols);
      for (std::size_t i = 0; i < fw.data.size(); ++i) {
        DualEncoderParams p = m, q = m;
        (p.*w).data[i] += h;
        (q.*w).data[i] -= h;
        fw.data[i] = (oracle::batch_loss(p.w_img, p.w_txt, img, txt, alpha) -
                      oracle::batch_loss(q.w_img, q.w_txt, img, txt, alpha)) /
                     (2 * h);
      }
      worst = std::max(worst, hnal::test::rel_err(w == &DualEncoderParams::w_img ? g.d_img : g.d_txt, fw));
    }
  }
  return {worst < 1e-4, fmt("worst relative error %.3g over 100 batches, %zu near-kink batches skipped (tol 1e-4)",
                            worst, rejected)};
}

std::vector<EmbeddingRecord> records(const Matrix& m, const char* prefix, Modality mod) {
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < m.rows; ++i)
    out.push_back({hnal::test::id(prefix, i), mod, {m.row(i).begin(), m.row(i).end()}});
  return out;
}

Outcome evaluator() {
  std::mt19937_64 rng(5);
  std::size_t mismatches = 0, order = 0, runs = 0;
  for (std::size_t n : {10u, 37u, 120u, 250u, 500u}) {
    for (int variant = 0; variant < 2; ++variant) {
      Matrix img = hnal::test::random_matrix(n, 5, rng), txt = hnal::test::random_matrix(n, 5, rng);
      if (variant == 1) {  // integer vectors give exact ties
        std::uniform_int_distribution<int> g(0, 2);
        for (double& v : img.data) v = g(rng) + 1;
        for (double& v : txt.data) v = g(rng) + 1;
      } else {
        for (std::size_t i = 0; i < img.data.size(); ++i) txt.data[i] = 0.7 * img.data[i] + 0.3 * txt.data[i];
      }
      DualEncoderParams m = init_params({5, 5}, 4, n + variant);
      if (variant == 1) m = {hnal::test::identity(5), hnal::test::identity(5), 5};
      auto q = records(img, "img", Modality::Image), g = records(txt, "txt", Modality::Text);
      std::map<std::string, std::string> truth_map;
      std::vector<std::vector<double>> qv, gv;
      std::vector<std::string> gid, truth;
      for (std::size_t i = 0; i < n; ++i) {
        truth_map[q[i].id] = g[i].id;
        qv.push_back(oracle::project(m.w_img, q[i].vector));
        gv.push_back(oracle::project(m.w_txt, g[i].vector));
        gid.push_back(g[i].id);
        truth.push_back(g[i].id);
      }
      double prev = 0;
      for (std::size_t k : {1u, 5u, 10u}) {
        double r = recall_at_k(m, q, g, truth_map, k);
        mismatches += r != oracle::recall(qv, gv, gid, truth, k);
        order += r < prev;
        prev = r;
      }
      ++runs;
    }
  }
  EpochMetrics e0;
  e0.r_at_k_text[1] = 0.402;
  e0.r_at_k_image[1] = 0.291;
  std::vector<EpochMetrics> h{e0};
  const double sum = r_at_k_sum(h, 1);
  const bool sum_ok = std::abs(sum - 69.3) < 1e-9;
  return {mismatches == 0 && order == 0 && sum_ok,
          fmt("%zu oracle mismatches, %zu ordering violations over %zu galleries (<= 500); R@1-sum(40.2, 29.1) = %.10g",
              mismatches, order, runs, sum)};
}

double r1_pair(const EpochMetrics& m) { return m.r_at_k_text.at(1) + m.r_at_k_image.at(1); }

Outcome end_to_end() {
  const auto t0 = Clock::now();
  SynthParams sp;
  sp.seed = 1;
  const Corpus corpus = synth_corpus(sp);
  double hn_first = 0, rnd_first = 0, hn_sum = 0, rnd_sum = 0;
  std::size_t seed_wins = 0;
  const std::size_t seeds = 10;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    ALRunConfig hn;
    hn.seed = seed;
    hn.strategy = Strategy::HardNeg;
    hn.hardneg.batch_mode = BatchMode::FullBatch;
    hn.hardneg.k = 1;
    hn.hardneg.weight_mode = WeightMode::Surplus;
    ALRunConfig rnd = hn;
    rnd.strategy = Strategy::Random;
    RunState a = run_scenario(hn, corpus), b = run_scenario(rnd, corpus);
    hn_first += r1_pair(a.history.at(1)) / seeds;
    rnd_first += r1_pair(b.history.at(1)) / seeds;
    hn_sum += r_at_k_sum(a.history, 1) / seeds;
    rnd_sum += r_at_k_sum(b.history, 1) / seeds;
    seed_wins += r1_pair(a.history.at(1)) >= r1_pair(b.history.at(1));
    std::printf("  seed %llu: epoch-1 R@1 text+image hardneg %.4f random %.4f; R@1-sum %.2f vs %.2f\n",
                static_cast<unsigned long long>(seed), r1_pair(a.history.at(1)), r1_pair(b.history.at(1)),
                r_at_k_sum(a.history, 1), r_at_k_sum(b.history, 1));
  }
  const double t = seconds_since(t0);
  return {hn_first >= rnd_first && hn_sum >= rnd_sum && t < 600.0,
          fmt("mean epoch-1 R@1 (text+image) hardneg %.4f vs random %.4f; mean R@1-sum %.3f vs %.3f; "
              "hardneg >= random on %zu/%zu seeds; %.0f s (limit 600 s)",
              hn_first, rnd_first, hn_sum, rnd_sum, seed_wins, seeds, t)};
}

Outcome coreset() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> grid(0, 5);
  std::size_t wrong = 0, picks = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 20 + 20 * rep;  // up to 200
    Matrix pf(n, 3), cf(4, 3);
    for (double& v : pf.data) v = rep % 2 ? grid(rng) : std::uniform_real_distribution<double>(0, 5)(rng);
    for (double& v : cf.data) v = grid(rng);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = hnal::test::id("p", (i * 53) % 1000);
    auto res = kcenter_greedy({ids, pf}, {{"c0", "c1", "c2", "c3"}, cf}, n / 4);
    std::vector<std::vector<double>> covered;
    for (std::size_t r = 0; r < 4; ++r) covered.emplace_back(cf.row(r).begin(), cf.row(r).end());
    std::vector<bool> taken(n, false);
    for (const auto& pick : res.selected) {
      double d;
      std::size_t want = oracle::farthest(ids, pf, taken, covered, &d);
      wrong += pick != ids[want] || res.scores.per_item.at(pick) != d;
      ++picks;
      taken[want] = true;
      covered.emplace_back(pf.row(want).begin(), pf.row(want).end());
    }
  }

  std::size_t bad_hist = 0;
  Matrix locals = hnal::test::random_matrix(400, 6, rng);
  Codebook cb = kmeans(locals, 30, 20, 3);
  for (std::size_t n : {0u, 1u, 4u, 57u, 400u}) {
    Matrix sub(n, 6);
    std::copy(locals.data.begin(), locals.data.begin() + n * 6, sub.data.begin());
    auto h = bow_feature(sub, cb);
    double total = 0;
    for (double v : h) total += v;
    bad_hist += total != static_cast<double>(n);
  }
  return {wrong == 0 && bad_hist == 0,
          fmt("%zu/%zu greedy picks differ from brute force; %zu histograms with wrong mass", wrong, picks, bad_hist)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

Outcome determinism() {
  SynthParams sp;
  sp.n_clusters = 12;
  sp.per_cluster = 25;
  sp.dim = 10;
  sp.seed = 8;
  const Corpus corpus = synth_corpus(sp);
  hnal::test::TempDir dir;
  std::size_t diffs = 0;
  for (Strategy st : {Strategy::HardNeg, Strategy::Random, Strategy::CoreSetMean, Strategy::CoreSetBoW}) {
    ALRunConfig cfg;
    cfg.strategy = st;
    cfg.seed = 42;
    cfg.train.epochs = 6;
    cfg.train.lr_decay_epoch = 4;
    const std::string tag(to_string(st));
    for (const char* run : {"a", "b"}) {
      RunState s = run_scenario(cfg, corpus);
      export_metrics_csv(s, dir / (tag + run + ".csv"));
      export_selection_trace(s, dir / (tag + run + ".jsonl"));
    }
    diffs += slurp(dir / (tag + "a.csv")) != slurp(dir / (tag + "b.csv"));
    diffs += slurp(dir / (tag + "a.jsonl")) != slurp(dir / (tag + "b.jsonl"));

    // interrupt after one epoch with a pending selection, resume from disk
    RunState s = start_run(cfg, corpus);
    auto sel = propose_selection(s, corpus);
    s = step_epoch(std::move(s), corpus, simulated_annotator(sel, corpus));
    propose_selection(s, corpus);
    save_state(s, dir / (tag + ".ckpt"));
    RunState resumed = continue_scenario(load_state(dir / (tag + ".ckpt")), corpus);
    export_metrics_csv(resumed, dir / (tag + "r.csv"));
    export_selection_trace(resumed, dir / (tag + "r.jsonl"));
    diffs += slurp(dir / (tag + "a.csv")) != slurp(dir / (tag + "r.csv"));
    diffs += slurp(dir / (tag + "a.jsonl")) != slurp(dir / (tag + "r.jsonl"));
    RunState full = run_scenario(cfg, corpus);
    save_state(full, dir / (tag + "full.json"));
    save_state(resumed, dir / (tag + "resumed.json"));
    diffs += slurp(dir / (tag + "full.json")) != slurp(dir / (tag + "resumed.json"));
  }
  return {diffs == 0, fmt("%zu differing files over 4 strategies (repeat and resume)", diffs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"threshold-oracle", threshold_oracle}, {"score-oracle", score_oracle}, {"relaxation-monotonicity", relaxation},
      {"gradient", gradient},                 {"evaluator", evaluator},       {"end-to-end-directional", end_to_end},
      {"coreset-greedy", coreset},            {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
