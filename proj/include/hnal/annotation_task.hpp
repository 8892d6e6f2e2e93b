#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace hnal {

enum class TaskStatus { Pending, Submitted };

// What an annotator supplied for a queried item: an existing counterpart
// id, or a free-text caption with a caller-computed embedding.
struct AnnotationPayload {
  std::optional<std::string> counterpart_id;
  std::optional<std::string> caption;
  std::vector<double> vector;

  bool operator==(const AnnotationPayload&) const = default;
};

struct AnnotationTask {
  std::string task_id;
  std::string queried_id;
  std::size_t epoch = 0;
  TaskStatus status = TaskStatus::Pending;
  std::optional<AnnotationPayload> payload;
  std::optional<std::string> display_uri;

  bool operator==(const AnnotationTask&) const = default;
};

nlohmann::json to_json(const AnnotationTask& task);
AnnotationTask task_from_json(const nlohmann::json& j);

}  // namespace hnal
