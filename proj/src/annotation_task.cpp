#include "hnal/annotation_task.hpp"

#include "hnal/error.hpp"

namespace hnal {

using nlohmann::json;

json to_json(const AnnotationTask& t) {
  json j{{"task_id", t.task_id},
         {"queried_id", t.queried_id},
         {"epoch", t.epoch},
         {"status", t.status == TaskStatus::Pending ? "pending" : "submitted"},
         {"payload", nullptr},
         {"display_uri", nullptr}};
  if (t.payload) {
    json p = json::object();
    if (t.payload->counterpart_id) p["counterpart_id"] = *t.payload->counterpart_id;
    if (t.payload->caption) {
      p["caption"] = *t.payload->caption;
      p["vector"] = t.payload->vector;
    }
    j["payload"] = std::move(p);
  }
  if (t.display_uri) j["display_uri"] = *t.display_uri;
  return j;
}

AnnotationTask task_from_json(const json& j) {
  AnnotationTask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.queried_id = j.at("queried_id").get<std::string>();
  t.epoch = j.at("epoch").get<std::size_t>();
  const auto status = j.at("status").get<std::string>();
  if (status == "pending")
    t.status = TaskStatus::Pending;
  else if (status == "submitted")
    t.status = TaskStatus::Submitted;
  else
    throw Error(ErrorCode::VersionMismatch, "unknown task status '" + status + "'");
  if (const auto& p = j.at("payload"); !p.is_null()) {
    AnnotationPayload payload;
    if (p.contains("counterpart_id")) payload.counterpart_id = p.at("counterpart_id").get<std::string>();
    if (p.contains("caption")) {
      payload.caption = p.at("caption").get<std::string>();
      payload.vector = p.at("vector").get<std::vector<double>>();
    }
    t.payload = std::move(payload);
  }
  if (const auto& d = j.at("display_uri"); !d.is_null()) t.display_uri = d.get<std::string>();
  return t;
}

}  // namespace hnal
