#include "hnal/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "httplib.h"

#include "hnal/error.hpp"
#include "hnal/kernels.hpp"

namespace hnal {

using nlohmann::json;

namespace {

std::string make_task_id(std::size_t epoch, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "e%zu-%04zu", epoch, index);
  return buf;
}

std::string caption_record_id(const AnnotationTask& t) { return t.task_id + "-caption"; }

}  // namespace

// --- queue -------------------------------------------------------------------

std::vector<AnnotationTask> AnnotationQueue::enqueue_selection(const SelectionResult& selection, std::size_t epoch) {
  std::lock_guard lock(mu_);
  std::vector<std::string> pending;
  for (const auto& t : tasks_)
    if (t.status == TaskStatus::Pending) pending.push_back(t.task_id);
  if (!pending.empty())
    throw Error(ErrorCode::EpochInProgress, std::to_string(pending.size()) + " task(s) still pending");
  std::set<std::string> seen;
  for (const auto& id : selection.selected)
    if (!seen.insert(id).second) throw Error(ErrorCode::InvalidArgument, "duplicate selected id '" + id + "'");
  tasks_.clear();
  for (std::size_t i = 0; i < selection.selected.size(); ++i)
    tasks_.push_back({make_task_id(epoch, i), selection.selected[i], epoch, TaskStatus::Pending, std::nullopt,
                      std::nullopt});
  return tasks_;
}

AnnotationTask AnnotationQueue::submit_annotation(const std::string& task_id, const AnnotationPayload& payload,
                                                  const Corpus& corpus, Modality counterpart) {
  if (payload.counterpart_id.has_value() == payload.caption.has_value())
    throw Error(ErrorCode::ParseError, "payload needs exactly one of a counterpart id or a caption");
  if (payload.counterpart_id) {
    if (!corpus.find(counterpart, *payload.counterpart_id))
      throw Error(ErrorCode::UnknownId, std::string(to_string(counterpart)) + " id '" + *payload.counterpart_id +
                                            "' not in corpus");
  } else {
    if (payload.vector.size() != corpus.dims().of(counterpart))
      throw Error(ErrorCode::BadVectorDim, "vector has " + std::to_string(payload.vector.size()) +
                                               " components, expected " +
                                               std::to_string(corpus.dims().of(counterpart)));
    for (double v : payload.vector)
      if (!std::isfinite(v)) throw Error(ErrorCode::BadVectorDim, "vector has a non-finite component");
  }

  std::lock_guard lock(mu_);
  auto it = std::find_if(tasks_.begin(), tasks_.end(), [&](const auto& t) { return t.task_id == task_id; });
  if (it == tasks_.end()) throw Error(ErrorCode::UnknownTask, "no task '" + task_id + "'");
  if (it->status == TaskStatus::Submitted) {
    if (it->payload == payload) return *it;
    throw Error(ErrorCode::AlreadySubmitted, "task '" + task_id + "' already has a different annotation");
  }
  it->payload = payload;
  it->status = TaskStatus::Submitted;
  return *it;
}

AnnotationBatch AnnotationQueue::collect_batch(std::size_t epoch, Corpus& corpus, Modality counterpart,
                                               std::vector<EmbeddingRecord>* registered) const {
  std::vector<AnnotationTask> snap;
  {
    std::lock_guard lock(mu_);
    for (const auto& t : tasks_)
      if (t.epoch == epoch) snap.push_back(t);
  }
  std::string pending;
  for (const auto& t : snap)
    if (t.status != TaskStatus::Submitted) pending += (pending.empty() ? "" : ",") + t.task_id;
  if (!pending.empty()) throw Error(ErrorCode::EpochIncomplete, "pending tasks: " + pending);

  AnnotationBatch batch;
  for (const auto& t : snap) {
    const auto& p = *t.payload;
    if (p.counterpart_id) {
      batch.pairs.emplace_back(t.queried_id, *p.counterpart_id);
      continue;
    }
    const std::string rid = caption_record_id(t);
    if (!corpus.find(counterpart, rid)) {
      corpus.add_record({rid, counterpart, p.vector});
      if (registered) registered->push_back({rid, counterpart, p.vector});
    }
    batch.pairs.emplace_back(t.queried_id, rid);
  }
  return batch;
}

std::vector<AnnotationTask> AnnotationQueue::tasks(std::optional<TaskStatus> status) const {
  std::lock_guard lock(mu_);
  std::vector<AnnotationTask> out;
  for (const auto& t : tasks_)
    if (!status || t.status == *status) out.push_back(t);
  return out;
}

std::optional<AnnotationTask> AnnotationQueue::find(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  for (const auto& t : tasks_)
    if (t.task_id == task_id) return t;
  return std::nullopt;
}

void AnnotationQueue::clear() {
  std::lock_guard lock(mu_);
  tasks_.clear();
}

// --- session -----------------------------------------------------------------

AnnotationSession::AnnotationSession(Corpus corpus, RunState state, std::optional<std::filesystem::path> checkpoint)
    : corpus_(std::move(corpus)), state_(std::move(state)), queue_(state_.tasks), checkpoint_(std::move(checkpoint)) {
  std::lock_guard lock(mu_);
  for (const auto& r : state_.extra_records)
    if (!corpus_.find(r.modality, r.id)) corpus_.add_record(r);
  if (state_.tasks.empty()) open_epoch();
}

void AnnotationSession::open_epoch() {
  if (state_.finished() || state_.pool.empty()) return;
  SelectionResult sel;
  if (state_.pending)
    sel.selected = state_.pending->selected;
  else
    sel = propose_selection(state_, corpus_);
  queue_.enqueue_selection(sel, state_.epoch);
  persist();
}

void AnnotationSession::persist() {
  state_.tasks = queue_.snapshot();
  if (checkpoint_) save_state(state_, *checkpoint_);
}

json metrics_to_api_json(const EpochMetrics& m) {
  auto series = [](const std::map<std::size_t, double>& s) {
    json o = json::object();
    for (const auto& [k, r] : s) o[std::to_string(k)] = r;
    return o;
  };
  return json{{"epoch", m.epoch},
              {"paired_fraction", m.paired_fraction},
              {"text_retrieval", series(m.r_at_k_text)},
              {"image_retrieval", series(m.r_at_k_image)}};
}

json AnnotationSession::state_json() const {
  std::lock_guard lock(mu_);
  const auto all = queue_.tasks();
  const auto submitted =
      std::count_if(all.begin(), all.end(), [](const auto& t) { return t.status == TaskStatus::Submitted; });
  json history = json::array();
  for (const auto& m : state_.history) history.push_back(metrics_to_api_json(m));
  return json{{"epoch", state_.epoch},
              {"max_epochs", state_.config.max_epochs},
              {"finished", state_.finished()},
              {"direction", std::string(to_string(state_.config.direction))},
              {"strategy", std::string(to_string(state_.config.strategy))},
              {"paired", state_.paired.size()},
              {"pool", state_.pool.size()},
              {"tasks_total", all.size()},
              {"tasks_submitted", submitted},
              {"history", std::move(history)}};
}

AnnotationTask AnnotationSession::task(const std::string& task_id) const {
  auto t = queue_.find(task_id);
  if (!t) throw Error(ErrorCode::UnknownTask, "no task '" + task_id + "'");
  return *t;
}

std::vector<std::string> AnnotationSession::candidates(const std::string& task_id, std::size_t n) const {
  const AnnotationTask t = task(task_id);
  std::lock_guard lock(mu_);
  const Modality qm = queried_modality(state_.config.direction);
  const Modality cm = other(qm);
  std::set<std::string> held_out;
  for (const auto& p : state_.test) held_out.insert(p.get(cm));
  std::vector<std::string> gallery;
  for (const auto& r : corpus_.records(cm))
    if (!state_.paired.contains(cm, r.id) && !held_out.contains(r.id)) gallery.push_back(r.id);
  if (gallery.empty()) return {};
  const std::vector<std::string> query{t.queried_id};
  const auto sim = similarity_matrix(encode_block(state_.model, corpus_, qm, query),
                                     encode_block(state_.model, corpus_, cm, gallery));
  std::vector<std::size_t> order(gallery.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  const std::size_t take = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sim(0, a) != sim(0, b)) return sim(0, a) > sim(0, b);
                      return gallery[a] < gallery[b];
                    });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(gallery[order[i]]);
  return out;
}

AnnotationTask AnnotationSession::submit(const std::string& task_id, const AnnotationPayload& payload) {
  std::lock_guard lock(mu_);
  auto t = queue_.submit_annotation(task_id, payload, corpus_, counterpart_modality(state_.config.direction));
  persist();
  return t;
}

EpochMetrics AnnotationSession::advance() {
  std::lock_guard lock(mu_);
  if (state_.finished()) throw Error(ErrorCode::BudgetExhausted, "run already reached max_epochs");
  const Modality cm = counterpart_modality(state_.config.direction);
  Corpus staged = corpus_;
  std::vector<EmbeddingRecord> registered;
  const AnnotationBatch batch = queue_.collect_batch(state_.epoch, staged, cm, &registered);
  RunState next = step_epoch(state_, staged, batch);
  next.extra_records.insert(next.extra_records.end(), registered.begin(), registered.end());
  corpus_ = std::move(staged);
  state_ = std::move(next);
  queue_.clear();
  open_epoch();
  persist();
  return state_.history.back();
}

RunState AnnotationSession::snapshot() const {
  std::lock_guard lock(mu_);
  RunState s = state_;
  s.tasks = queue_.snapshot();
  return s;
}

// --- HTTP --------------------------------------------------------------------

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownTask: return 404;
    case ErrorCode::AlreadySubmitted:
    case ErrorCode::EpochInProgress:
    case ErrorCode::BudgetExhausted: return 409;
    case ErrorCode::BadVectorDim:
    case ErrorCode::EpochIncomplete:
    case ErrorCode::UnknownId:
    case ErrorCode::AnnotationMismatch: return 422;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument: return 400;
    default: return 500;
  }
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply(res, http_status(e.code()), json{{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}});
  } catch (const std::exception& e) {
    reply(res, 500, json{{"error", "Internal"}, {"detail", e.what()}});
  }
}

AnnotationPayload parse_payload(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "body must be a JSON object");
  AnnotationPayload p;
  try {
    for (const char* key : {"text_id", "image_id", "counterpart_id"})
      if (j.contains(key)) {
        if (p.counterpart_id) throw Error(ErrorCode::ParseError, "more than one counterpart id given");
        p.counterpart_id = j.at(key).get<std::string>();
      }
    if (j.contains("caption")) {
      p.caption = j.at("caption").get<std::string>();
      if (!j.contains("vector")) throw Error(ErrorCode::ParseError, "caption requires a vector");
      p.vector = j.at("vector").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return p;
}

}  // namespace

void register_routes(httplib::Server& server, AnnotationSession& session,
                     const std::optional<std::filesystem::path>& static_dir) {
  server.Get("/api/state", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, session.state_json()); });
  });

  server.Get("/api/tasks", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<TaskStatus> status;
      if (req.has_param("status")) {
        const auto s = req.get_param_value("status");
        if (s == "pending")
          status = TaskStatus::Pending;
        else if (s == "submitted")
          status = TaskStatus::Submitted;
        else
          throw Error(ErrorCode::InvalidArgument, "status must be 'pending' or 'submitted'");
      }
      json tasks = json::array();
      for (const auto& t : session.tasks(status)) tasks.push_back(to_json(t));
      reply(res, 200, json{{"tasks", std::move(tasks)}});
    });
  });

  server.Get(R"(/api/tasks/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      json j = to_json(session.task(id));
      j["candidates"] = session.candidates(id);
      reply(res, 200, j);
    });
  });

  server.Post(R"(/api/tasks/([^/]+)/annotation)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      reply(res, 200, to_json(session.submit(id, parse_payload(req.body))));
    });
  });

  server.Post("/api/epoch/advance", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const EpochMetrics m = session.advance();
      json j = session.state_json();
      j["metrics"] = metrics_to_api_json(m);
      reply(res, 200, j);
    });
  });

  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace hnal
