#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hnal/annotation_task.hpp"
#include "hnal/error.hpp"
#include "hnal/corpus.hpp"
#include "hnal/hardneg.hpp"
#include "hnal/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace hnal {

// Task queue for one run. All mutations are serialized; readers get copies.
class AnnotationQueue {
 public:
  AnnotationQueue() = default;
  explicit AnnotationQueue(std::vector<AnnotationTask> restored) : tasks_(std::move(restored)) {}

  // One Pending task per selected id, in selection order. Throws
  // EpochInProgress while any task is still Pending.
  std::vector<AnnotationTask> enqueue_selection(const SelectionResult& selection, std::size_t epoch);

  // Pending -> Submitted. Identical resubmission is a no-op; a different
  // payload raises AlreadySubmitted. Throws UnknownTask, BadVectorDim,
  // UnknownId (counterpart id not in corpus).
  AnnotationTask submit_annotation(const std::string& task_id, const AnnotationPayload& payload,
                                   const Corpus& corpus, Modality counterpart);

  // All tasks of `epoch` as an annotation batch. Free-text payloads are
  // first registered in `corpus` as new counterpart records. Throws
  // EpochIncomplete listing the pending task ids.
  AnnotationBatch collect_batch(std::size_t epoch, Corpus& corpus, Modality counterpart,
                                std::vector<EmbeddingRecord>* registered = nullptr) const;

  std::vector<AnnotationTask> tasks(std::optional<TaskStatus> status = std::nullopt) const;
  std::optional<AnnotationTask> find(const std::string& task_id) const;
  std::vector<AnnotationTask> snapshot() const { return tasks(); }
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<AnnotationTask> tasks_;
};

// A live run: corpus, run state and the queue for the open epoch.
class AnnotationSession {
 public:
  // Resumes the open epoch if `state` carries tasks; otherwise proposes and
  // enqueues the next selection (unless the run is finished).
  AnnotationSession(Corpus corpus, RunState state, std::optional<std::filesystem::path> checkpoint = std::nullopt);

  nlohmann::json state_json() const;
  std::vector<AnnotationTask> tasks(std::optional<TaskStatus> status) const { return queue_.tasks(status); }
  // Throws UnknownTask.
  AnnotationTask task(const std::string& task_id) const;
  // Top-n counterpart ids for the task's queried item under the current
  // model, drawn from counterparts that are neither paired nor held out.
  std::vector<std::string> candidates(const std::string& task_id, std::size_t n = 10) const;
  AnnotationTask submit(const std::string& task_id, const AnnotationPayload& payload);
  // collect_batch + step_epoch, then enqueues the next selection.
  EpochMetrics advance();

  RunState snapshot() const;

 private:
  void open_epoch();
  void persist();

  mutable std::mutex mu_;  // guards corpus_ and state_
  Corpus corpus_;
  RunState state_;
  AnnotationQueue queue_;
  std::optional<std::filesystem::path> checkpoint_;
};

// HTTP status for an error code (404/409/422/400/500).
int http_status(ErrorCode code);

// Registers the /api routes; mounts `static_dir` at / when given.
void register_routes(httplib::Server& server, AnnotationSession& session,
                     const std::optional<std::filesystem::path>& static_dir = std::nullopt);

nlohmann::json metrics_to_api_json(const EpochMetrics& m);

}  // namespace hnal
