#pragma once
// Judge/generation backend that forwards requests to an external bridge process.

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "waterjudge/judge.hpp"
#include "waterjudge/transport.hpp"
#include "waterjudge/wire.hpp"

namespace waterjudge {

struct EndpointDescriptor {
  enum class Kind { http, stream };

  Kind kind = Kind::http;
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string command;  // stream: shell command to launch
  std::chrono::milliseconds timeout{30000};
  int retries = 2;  // extra attempts after the first, transport failures only
  std::size_t max_in_flight = 1;
  std::vector<TaskTag> tasks{TaskTag::summary, TaskTag::translation, TaskTag::generic};
  std::string id_prefix = "req";

  static EndpointDescriptor from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class ExternalJudgeClient final : public JudgeBackend {
 public:
  ExternalJudgeClient(std::unique_ptr<Transport> transport, EndpointDescriptor desc);

  JudgeCapabilities capabilities() const override;
  // Transport errors are retried with the same request id; protocol errors are not.
  double raw_preference(const ComparisonRequest& request) const override;

  wire::GenerateResponse generate(const std::string& prompt, const std::optional<wire::WatermarkSpec>& wm,
                                  std::uint32_t max_tokens) const;

 private:
  std::string next_id() const;
  template <typename Fn>
  auto with_retries(const std::string& id, Fn&& attempt) const;

  std::unique_ptr<Transport> transport_;
  EndpointDescriptor desc_;
  mutable std::atomic<std::uint64_t> counter_{0};
};

std::unique_ptr<ExternalJudgeClient> external_judge_client(const EndpointDescriptor& desc);

}  // namespace waterjudge
