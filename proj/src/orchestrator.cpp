#include "hnal/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hnal/baselines.hpp"
#include "hnal/error.hpp"
#include "hnal/rng.hpp"

namespace hnal {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::HardNeg: return "hardneg";
    case Strategy::Random: return "random";
    case Strategy::CoreSetMean: return "coreset-mean";
    case Strategy::CoreSetBoW: return "coreset-bow";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "hardneg") return Strategy::HardNeg;
  if (s == "random") return Strategy::Random;
  if (s == "coreset-mean" || s == "coreset") return Strategy::CoreSetMean;
  if (s == "coreset-bow") return Strategy::CoreSetBoW;
  throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

// --- config ------------------------------------------------------------------

void ALRunConfig::validate() const {
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(init_fraction) || !in_unit(budget_fraction) || !in_unit(test_fraction))
    throw Error(ErrorCode::InvalidArgument, "fractions must lie in [0,1]");
  if (init_fraction + static_cast<double>(max_epochs) * budget_fraction > 1.0 + 1e-9)
    throw Error(ErrorCode::InvalidArgument, "init_fraction + max_epochs * budget_fraction exceeds 1");
  // the held-out split can still leave the pool short of the last budgets;
  // selection then saturates
  if (init_fraction + test_fraction > 1.0 + 1e-9)
    throw Error(ErrorCode::InvalidArgument, "init_fraction + test_fraction exceeds 1");
  if (max_epochs > 0 && budget_fraction <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "budget_fraction must be positive when max_epochs > 0");
  if (eval_ks.empty() || std::find(eval_ks.begin(), eval_ks.end(), 0) != eval_ks.end())
    throw Error(ErrorCode::InvalidArgument, "eval_ks must be nonempty and positive");
  if (train.batch_size < 2) throw Error(ErrorCode::InvalidArgument, "batch_size must be at least 2");
  if (train.embed_dim == 0) throw Error(ErrorCode::InvalidArgument, "embed_dim must be positive");
  if (!(train.alpha > 0) || !(train.learning_rate > 0))
    throw Error(ErrorCode::InvalidArgument, "alpha and learning_rate must be positive");
  if (hardneg.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
}

bool ALRunConfig::operator==(const ALRunConfig& o) const { return to_json(*this) == to_json(o); }

json to_json(const ALRunConfig& c) {
  return json{{"init_fraction", c.init_fraction},
              {"budget_fraction", c.budget_fraction},
              {"test_fraction", c.test_fraction},
              {"max_epochs", c.max_epochs},
              {"strategy", std::string(to_string(c.strategy))},
              {"direction", std::string(to_string(c.direction))},
              {"seed", c.seed},
              {"eval_ks", c.eval_ks},
              {"hardneg",
               {{"batch_mode", std::string(to_string(c.hardneg.batch_mode))},
                {"zs_size", c.hardneg.zs_size},
                {"k", c.hardneg.k},
                {"weight_mode", std::string(to_string(c.hardneg.weight_mode))}}},
              {"coreset",
               {{"n_local", c.coreset.n_local},
                {"jitter", c.coreset.jitter},
                {"codebook_k", c.coreset.codebook_k},
                {"kmeans_iters", c.coreset.kmeans_iters}}},
              {"train",
               {{"alpha", c.train.alpha},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"lr_decay_epoch", c.train.lr_decay_epoch},
                {"embed_dim", c.train.embed_dim}}}};
}

ALRunConfig config_from_json(const json& j, ALRunConfig c) {
  try {
    auto take = [](const json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    take(j, "init_fraction", c.init_fraction);
    take(j, "budget_fraction", c.budget_fraction);
    take(j, "test_fraction", c.test_fraction);
    take(j, "max_epochs", c.max_epochs);
    take(j, "seed", c.seed);
    take(j, "eval_ks", c.eval_ks);
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("direction")) c.direction = parse_direction(j.at("direction").get<std::string>());
    if (j.contains("hardneg")) {
      const auto& h = j.at("hardneg");
      if (h.contains("batch_mode")) c.hardneg.batch_mode = parse_batch_mode(h.at("batch_mode").get<std::string>());
      if (h.contains("weight_mode")) c.hardneg.weight_mode = parse_weight_mode(h.at("weight_mode").get<std::string>());
      take(h, "zs_size", c.hardneg.zs_size);
      take(h, "k", c.hardneg.k);
    }
    if (j.contains("coreset")) {
      const auto& s = j.at("coreset");
      take(s, "n_local", c.coreset.n_local);
      take(s, "jitter", c.coreset.jitter);
      take(s, "codebook_k", c.coreset.codebook_k);
      take(s, "kmeans_iters", c.coreset.kmeans_iters);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      take(t, "alpha", c.train.alpha);
      take(t, "epochs", c.train.epochs);
      take(t, "batch_size", c.train.batch_size);
      take(t, "learning_rate", c.train.learning_rate);
      take(t, "lr_decay_epoch", c.train.lr_decay_epoch);
      take(t, "embed_dim", c.train.embed_dim);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
  }
  return c;
}

// --- run ---------------------------------------------------------------------

DualEncoderParams initial_model(const ALRunConfig& config, const CorpusDims& dims) {
  return init_params(dims, config.train.embed_dim, derive_seed(config.seed, "init"));
}

std::uint64_t training_seed(const ALRunConfig& config, std::size_t epoch) {
  return derive_seed(config.seed, "train", epoch);
}

namespace {

DualEncoderParams retrain(const RunState& s, const Corpus& corpus) {
  TrainConfig tc = s.config.train;
  tc.seed = training_seed(s.config, s.epoch);
  return train(initial_model(s.config, corpus.dims()), s.paired, corpus, tc);
}

EpochMetrics evaluate_state(const RunState& s, const Corpus& corpus) {
  const double frac = static_cast<double>(s.paired.size()) / static_cast<double>(s.corpus_pairs);
  return evaluate(s.model, corpus, s.test, s.config.eval_ks, s.epoch, frac);
}

LabeledFeatures raw_features(const Corpus& corpus, Modality m, const std::vector<std::string>& ids) {
  LabeledFeatures f{ids, Matrix(ids.size(), corpus.dims().of(m))};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = corpus.at(m, ids[i]).vector;
    Matrix local(1, v.size());
    std::copy(v.begin(), v.end(), local.data.begin());
    const auto g = mean_feature(local);  // one global vector per item
    std::copy(g.begin(), g.end(), f.features.row(i).begin());
  }
  return f;
}

// Jittered copies stand in for per-region local features.
std::vector<Matrix> pseudo_locals(const LabeledFeatures& items, const CoreSetOptions& opt, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Matrix> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    Matrix m(opt.n_local, items.features.cols);
    for (std::size_t r = 0; r < opt.n_local; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = items.features(i, c) + opt.jitter * gauss(rng);
    out.push_back(std::move(m));
  }
  return out;
}

SelectionResult coreset_select(const RunState& s, const Corpus& corpus, std::size_t b) {
  const Modality qm = queried_modality(s.config.direction);
  LabeledFeatures pool = raw_features(corpus, qm, s.pool.ids);
  LabeledFeatures covered = raw_features(corpus, qm, s.paired.ids(qm));
  if (s.config.strategy == Strategy::CoreSetBoW) {
    const auto& opt = s.config.coreset;
    if (opt.n_local == 0) throw Error(ErrorCode::InvalidArgument, "n_local must be positive");
    Rng rng(derive_seed(s.config.seed, "coreset", s.epoch));
    auto pool_locals = pseudo_locals(pool, opt, rng);
    auto covered_locals = pseudo_locals(covered, opt, rng);
    const std::size_t dim = pool.features.cols;
    Matrix all((pool_locals.size() + covered_locals.size()) * opt.n_local, dim);
    std::size_t row = 0;
    for (const auto* group : {&pool_locals, &covered_locals})
      for (const auto& m : *group) {
        std::copy(m.data.begin(), m.data.end(), all.row(row).begin());
        row += m.rows;
      }
    const std::size_t k = std::min(opt.codebook_k, all.rows);
    const Codebook cb = kmeans(all, k, opt.kmeans_iters, derive_seed(s.config.seed, "kmeans", s.epoch));
    auto to_bow = [&](LabeledFeatures& f, const std::vector<Matrix>& locals) {
      f.features = Matrix(f.size(), k);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto h = bow_feature(locals[i], cb);
        std::copy(h.begin(), h.end(), f.features.row(i).begin());
      }
    };
    to_bow(pool, pool_locals);
    to_bow(covered, covered_locals);
  }
  return kcenter_greedy(pool, covered, b);
}

}  // namespace

RunState start_run(const ALRunConfig& config, const Corpus& corpus) {
  config.validate();
  RunState s;
  s.config = config;
  s.corpus_pairs = corpus.size();
  if (s.corpus_pairs == 0) throw Error(ErrorCode::InvalidArgument, "empty corpus");
  if (config.max_epochs > 0 && s.budget_count() == 0)
    throw Error(ErrorCode::InvalidArgument, "budget_fraction selects zero items per epoch");
  const std::size_t test_count = fraction_count(config.test_fraction, s.corpus_pairs);
  const std::size_t max_k = *std::max_element(config.eval_ks.begin(), config.eval_ks.end());
  if (test_count < max_k)
    throw Error(ErrorCode::InvalidArgument, "test split of " + std::to_string(test_count) +
                                                " pairs is smaller than the largest eval K");
  Split split = split_corpus(corpus, test_count, fraction_count(config.init_fraction, s.corpus_pairs),
                             config.direction, derive_seed(config.seed, "split"));
  s.test = std::move(split.test);
  s.paired = std::move(split.paired);
  s.pool = std::move(split.pool);
  s.model = retrain(s, corpus);
  s.history.push_back(evaluate_state(s, corpus));
  return s;
}

SelectionResult propose_selection(RunState& s, const Corpus& corpus) {
  if (s.pool.empty()) throw Error(ErrorCode::BudgetExhausted, "unpaired pool is empty");
  const std::size_t b = s.budget_count();
  SelectionResult sel;
  SelectionRecord rec;
  rec.epoch = s.epoch;
  rec.strategy = s.config.strategy;
  switch (s.config.strategy) {
    case Strategy::HardNeg: {
      HardNegConfig hc = s.config.hardneg;
      hc.direction = s.config.direction;
      hc.seed = derive_seed(s.config.seed, "minibatch", s.epoch);
      if (hc.zs_size == 0) hc.zs_size = scaled_zs_size(s.corpus_pairs, hc.k);
      sel = select_hard_negatives(s.pool, b, s.paired, s.model, corpus, hc);
      rec.hard_negative_ratio = sel.scores.hard_negative_ratio;
      break;
    }
    case Strategy::Random:
      sel = random_select(s.pool, b, derive_seed(s.config.seed, "random", s.epoch));
      break;
    case Strategy::CoreSetMean:
    case Strategy::CoreSetBoW:
      sel = coreset_select(s, corpus, b);
      break;
  }
  rec.selected = sel.selected;
  for (const auto& id : sel.selected)
    if (auto it = sel.scores.per_item.find(id); it != sel.scores.per_item.end()) rec.scores.emplace(id, it->second);
  s.pending = std::move(rec);
  return sel;
}

AnnotationBatch simulated_annotator(const SelectionResult& selection, const Corpus& corpus, Direction direction) {
  const Modality qm = queried_modality(direction);
  AnnotationBatch batch;
  for (const auto& id : selection.selected) {
    auto cp = corpus.counterpart(qm, id);
    if (!cp) throw Error(ErrorCode::UnknownId, std::string(to_string(qm)) + " id '" + id + "' has no oracle pair");
    batch.pairs.emplace_back(id, *cp);
  }
  return batch;
}

RunState step_epoch(RunState s, const Corpus& corpus, const AnnotationBatch& annotations) {
  if (!s.pending) {
    if (s.pool.empty()) throw Error(ErrorCode::BudgetExhausted, "unpaired pool is empty");
    throw Error(ErrorCode::AnnotationMismatch, "no selection is awaiting annotation");
  }
  const Modality qm = queried_modality(s.config.direction);
  const Modality cm = other(qm);
  const std::set<std::string> expected(s.pending->selected.begin(), s.pending->selected.end());
  std::set<std::string> seen;
  for (const auto& [queried, counterpart] : annotations.pairs) {
    if (!expected.contains(queried))
      throw Error(ErrorCode::AnnotationMismatch, "annotation for unselected id '" + queried + "'");
    if (!seen.insert(queried).second)
      throw Error(ErrorCode::AnnotationMismatch, "duplicate annotation for '" + queried + "'");
    corpus.at(cm, counterpart);
  }
  if (seen.size() != expected.size()) {
    std::string missing;
    for (const auto& id : expected)
      if (!seen.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::AnnotationMismatch, "selected ids without annotation: " + missing);
  }

  for (const auto& [queried, counterpart] : annotations.pairs) {
    if (s.paired.contains(cm, counterpart))
      throw Error(ErrorCode::AnnotationMismatch, "counterpart '" + counterpart + "' is already paired");
    s.paired.add(qm == Modality::Image ? Pair{queried, counterpart} : Pair{counterpart, queried});
  }
  std::erase_if(s.pool.ids, [&](const std::string& id) { return expected.contains(id); });

  s.trace.push_back(std::move(*s.pending));
  s.pending.reset();
  s.tasks.clear();
  ++s.epoch;
  s.model = retrain(s, corpus);
  s.history.push_back(evaluate_state(s, corpus));
  return s;
}

RunState continue_scenario(RunState s, const Corpus& corpus, const std::function<void(const RunState&)>& on_epoch) {
  while (!s.finished()) {
    const std::size_t epoch = s.epoch;
    try {
      SelectionResult sel;
      if (s.pending)
        sel.selected = s.pending->selected;
      else
        sel = propose_selection(s, corpus);
      s = step_epoch(std::move(s), corpus, simulated_annotator(sel, corpus, s.config.direction));
    } catch (const Error& e) {
      throw Error(e.code(), "epoch " + std::to_string(epoch) + ": " + e.detail());
    }
    if (on_epoch) on_epoch(s);
  }
  return s;
}

RunState run_scenario(const ALRunConfig& config, const Corpus& corpus) {
  return continue_scenario(start_run(config, corpus), corpus);
}

// --- persistence -------------------------------------------------------------

namespace {

json pairs_to_json(const std::vector<Pair>& pairs) {
  json a = json::array();
  for (const auto& p : pairs) a.push_back({p.image_id, p.text_id});
  return a;
}

std::vector<Pair> pairs_from_json(const json& a) {
  std::vector<Pair> out;
  for (const auto& p : a) out.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
  return out;
}

json metrics_to_json(const EpochMetrics& m) {
  auto series = [](const std::map<std::size_t, double>& s) {
    json a = json::array();
    for (const auto& [k, r] : s) a.push_back({k, r});
    return a;
  };
  return json{{"epoch", m.epoch},
              {"paired_fraction", m.paired_fraction},
              {"text_retrieval", series(m.r_at_k_text)},
              {"image_retrieval", series(m.r_at_k_image)}};
}

EpochMetrics metrics_from_json(const json& j) {
  EpochMetrics m;
  m.epoch = j.at("epoch").get<std::size_t>();
  m.paired_fraction = j.at("paired_fraction").get<double>();
  for (const auto& e : j.at("text_retrieval")) m.r_at_k_text[e.at(0).get<std::size_t>()] = e.at(1).get<double>();
  for (const auto& e : j.at("image_retrieval")) m.r_at_k_image[e.at(0).get<std::size_t>()] = e.at(1).get<double>();
  return m;
}

json record_to_json(const SelectionRecord& r) {
  json scores = json::object();
  for (const auto& [id, h] : r.scores) scores[id] = h;
  json j{{"epoch", r.epoch},
         {"strategy", std::string(to_string(r.strategy))},
         {"selected", r.selected},
         {"scores", std::move(scores)},
         {"hard_negative_ratio", nullptr}};
  if (r.hard_negative_ratio) j["hard_negative_ratio"] = *r.hard_negative_ratio;
  return j;
}

SelectionRecord record_from_json(const json& j) {
  SelectionRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.strategy = parse_strategy(j.at("strategy").get<std::string>());
  r.selected = j.at("selected").get<std::vector<std::string>>();
  for (const auto& [id, h] : j.at("scores").items()) r.scores.emplace(id, h.get<double>());
  if (!j.at("hard_negative_ratio").is_null()) r.hard_negative_ratio = j.at("hard_negative_ratio").get<double>();
  return r;
}

constexpr int kStateVersion = 1;

}  // namespace

json state_to_json(const RunState& s) {
  json history = json::array();
  for (const auto& m : s.history) history.push_back(metrics_to_json(m));
  json trace = json::array();
  for (const auto& r : s.trace) trace.push_back(record_to_json(r));
  json tasks = json::array();
  for (const auto& t : s.tasks) tasks.push_back(to_json(t));
  json extra = json::array();
  for (const auto& r : s.extra_records)
    extra.push_back({{"id", r.id}, {"modality", std::string(to_string(r.modality))}, {"vector", r.vector}});
  return json{{"format", "hnal-state"},
              {"version", kStateVersion},
              {"config", to_json(s.config)},
              {"seed_lineage",
               {{"master", s.config.seed},
                {"split", derive_seed(s.config.seed, "split")},
                {"init", derive_seed(s.config.seed, "init")},
                {"next_train", training_seed(s.config, s.epoch + 1)}}},
              {"corpus_pairs", s.corpus_pairs},
              {"epoch", s.epoch},
              {"paired", pairs_to_json(s.paired.pairs())},
              {"pool", {{"modality", std::string(to_string(s.pool.modality))}, {"ids", s.pool.ids}}},
              {"test", pairs_to_json(s.test)},
              {"model", model_to_json(s.model)},
              {"history", std::move(history)},
              {"trace", std::move(trace)},
              {"pending", s.pending ? record_to_json(*s.pending) : json(nullptr)},
              {"tasks", std::move(tasks)},
              {"extra_records", std::move(extra)}};
}

RunState state_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "hnal-state")
      throw Error(ErrorCode::VersionMismatch, "not a run-state checkpoint");
    if (j.at("version").get<int>() != kStateVersion)
      throw Error(ErrorCode::VersionMismatch, "unsupported checkpoint version " + j.at("version").dump());
    RunState s;
    s.config = config_from_json(j.at("config"));
    if (j.at("seed_lineage").at("master").get<std::uint64_t>() != s.config.seed)
      throw Error(ErrorCode::VersionMismatch, "seed lineage does not match config");
    s.corpus_pairs = j.at("corpus_pairs").get<std::size_t>();
    s.epoch = j.at("epoch").get<std::size_t>();
    s.paired = PairedSet(pairs_from_json(j.at("paired")));
    s.pool.modality = parse_modality(j.at("pool").at("modality").get<std::string>());
    s.pool.ids = j.at("pool").at("ids").get<std::vector<std::string>>();
    s.test = pairs_from_json(j.at("test"));
    s.model = model_from_json(j.at("model"));
    for (const auto& m : j.at("history")) s.history.push_back(metrics_from_json(m));
    for (const auto& r : j.at("trace")) s.trace.push_back(record_from_json(r));
    if (!j.at("pending").is_null()) s.pending = record_from_json(j.at("pending"));
    for (const auto& t : j.at("tasks")) s.tasks.push_back(task_from_json(t));
    for (const auto& r : j.at("extra_records"))
      s.extra_records.push_back({r.at("id").get<std::string>(), parse_modality(r.at("modality").get<std::string>()),
                                 r.at("vector").get<std::vector<double>>()});
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::VersionMismatch, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VersionMismatch) throw;
    throw Error(ErrorCode::VersionMismatch, "inconsistent checkpoint: " + e.detail());
  }
}

void save_state(const RunState& state, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << state_to_json(state).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move checkpoint into place: " + ec.message());
}

RunState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::VersionMismatch, "unreadable checkpoint " + path.string() + ": " + e.what());
  }
  return state_from_json(j);
}

void write_selection_trace(const RunState& state, std::ostream& out) {
  for (const auto& r : state.trace) out << record_to_json(r).dump() << '\n';
}

void export_selection_trace(const RunState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_selection_trace(state, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void export_metrics_csv(const RunState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_metrics_csv(state.history, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace hnal
