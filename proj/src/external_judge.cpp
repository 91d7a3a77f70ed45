#include "waterjudge/external_judge.hpp"

#include <algorithm>
#include <cstdio>

#include "waterjudge/errors.hpp"
#include "waterjudge/log.hpp"

namespace waterjudge {

EndpointDescriptor EndpointDescriptor::from_json(const nlohmann::json& j) {
  EndpointDescriptor d;
  try {
    const auto kind = j.value("kind", std::string("http"));
    if (kind == "http") {
      d.kind = Kind::http;
    } else if (kind == "stream") {
      d.kind = Kind::stream;
    } else {
      throw ConfigError("endpoint kind must be 'http' or 'stream', got '" + kind + "'");
    }
    d.host = j.value("host", d.host);
    d.port = j.value("port", d.port);
    d.command = j.value("command", d.command);
    d.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long>(d.timeout.count())));
    d.retries = j.value("retries", d.retries);
    d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    d.id_prefix = j.value("id_prefix", d.id_prefix);
    if (j.contains("tasks")) {
      d.tasks.clear();
      for (const auto& t : j.at("tasks")) d.tasks.push_back(parse_task_tag(t.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed endpoint descriptor: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (d.retries < 0) throw ConfigError("endpoint retries must be >= 0");
  if (d.kind == Kind::stream && d.command.empty()) throw ConfigError("stream endpoint needs a command");
  return d;
}

nlohmann::json EndpointDescriptor::to_json() const {
  nlohmann::json tags = nlohmann::json::array();
  for (auto t : tasks) tags.push_back(std::string(to_string(t)));
  return {{"kind", kind == Kind::http ? "http" : "stream"},
          {"host", host},
          {"port", port},
          {"command", command},
          {"timeout_ms", timeout.count()},
          {"retries", retries},
          {"max_in_flight", max_in_flight},
          {"id_prefix", id_prefix},
          {"tasks", tags}};
}

ExternalJudgeClient::ExternalJudgeClient(std::unique_ptr<Transport> transport, EndpointDescriptor desc)
    : transport_(std::move(transport)), desc_(std::move(desc)) {
  if (!transport_) throw DomainError("external judge client needs a transport");
}

JudgeCapabilities ExternalJudgeClient::capabilities() const {
  JudgeCapabilities caps;
  caps.tasks = desc_.tasks;
  caps.max_in_flight = std::max<std::size_t>(1, std::min(desc_.max_in_flight, transport_->max_in_flight()));
  return caps;
}

std::string ExternalJudgeClient::next_id() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(++counter_));
  return desc_.id_prefix + "-" + buf;
}

template <typename Fn>
auto ExternalJudgeClient::with_retries(const std::string& id, Fn&& attempt) const {
  for (int n = 0;; ++n) {
    try {
      return attempt();
    } catch (const ProtocolError&) {
      throw;
    } catch (const TransportError& e) {
      if (n >= desc_.retries) {
        throw TransportError(std::string(e.what()) + " (gave up after " + std::to_string(n + 1) + " attempts)", id);
      }
      logger()->warn("retrying request {} after transport error: {}", id, e.what());
    }
  }
}

double ExternalJudgeClient::raw_preference(const ComparisonRequest& request) const {
  wire::JudgeRequest msg{next_id(), request.task, request.context, request.candidate_a, request.candidate_b};
  const std::string body = wire::encode(msg);
  return with_retries(msg.id, [&] {
    const auto line = transport_->exchange("/judge", body, msg.id);
    return wire::decode_judge_response(line, msg.id).p_a;
  });
}

wire::GenerateResponse ExternalJudgeClient::generate(const std::string& prompt,
                                                     const std::optional<wire::WatermarkSpec>& wm,
                                                     std::uint32_t max_tokens) const {
  wire::GenerateRequest msg{next_id(), prompt, wm, max_tokens};
  const std::string body = wire::encode(msg);
  return with_retries(msg.id, [&] {
    const auto line = transport_->exchange("/generate", body, msg.id);
    return wire::decode_generate_response(line, msg.id);
  });
}

std::unique_ptr<ExternalJudgeClient> external_judge_client(const EndpointDescriptor& desc) {
  if (desc.kind == EndpointDescriptor::Kind::http) {
    return std::make_unique<ExternalJudgeClient>(
        std::make_unique<HttpTransport>(desc.host, desc.port, desc.timeout, desc.max_in_flight), desc);
  }
  auto stream = StreamTransport::spawn(desc.command, desc.timeout);
  auto effective = desc;
  if (auto hello = stream->read_hello(std::chrono::milliseconds(std::min<long>(desc.timeout.count(), 5000)))) {
    effective.max_in_flight = std::max<std::size_t>(1, hello->max_in_flight);
  }
  return std::make_unique<ExternalJudgeClient>(std::move(stream), effective);
}

}  // namespace waterjudge
