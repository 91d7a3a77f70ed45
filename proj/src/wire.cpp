#include "waterjudge/wire.hpp"

#include <cmath>

#include <json.hpp>

#include "waterjudge/errors.hpp"

namespace waterjudge::wire {

using nlohmann::json;

namespace {

json parse(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("malformed message: not a JSON object");
  return j;
}

template <typename T>
T field(const json& j, const char* name, std::string_view id = {}) {
  const auto it = j.find(name);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + name + "'", std::string(id));
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ProtocolError(std::string("field '") + name + "' has the wrong type", std::string(id));
  }
}

std::string dump(const json& j) {
  try {
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::type_error&) {
    throw DomainError("wire message text is not valid UTF-8");
  }
}

void check_response_envelope(const json& j, std::string_view expected_id) {
  const auto id = field<std::string>(j, "id", expected_id);
  if (id != expected_id) {
    throw ProtocolError("response id '" + id + "' does not match request", std::string(expected_id));
  }
  if (const auto it = j.find("error"); it != j.end()) {
    throw TransportError("backend error: " + (it->is_string() ? it->get<std::string>() : it->dump()), id);
  }
}

}  // namespace

std::string encode(const JudgeRequest& m) {
  return dump(json{{"id", m.id},
                   {"type", "judge"},
                   {"task", std::string(to_string(m.task))},
                   {"context", m.context},
                   {"a", m.a},
                   {"b", m.b}});
}

std::string encode(const JudgeResponse& m) { return dump(json{{"id", m.id}, {"p_a", m.p_a}}); }

std::string encode(const GenerateRequest& m) {
  json wm = nullptr;
  if (m.wm) wm = json{{"seed", std::to_string(m.wm->seed)}, {"g", m.wm->g}, {"delta", m.wm->delta}};
  return dump(json{{"id", m.id}, {"type", "generate"}, {"prompt", m.prompt}, {"wm", wm}, {"max_tokens", m.max_tokens}});
}

std::string encode(const GenerateResponse& m) {
  return dump(json{{"id", m.id}, {"token_ids", m.token_ids}, {"text", m.text}});
}

std::string encode(const Hello& m) {
  return dump(json{{"type", "hello"}, {"capabilities", m.capabilities}, {"max_in_flight", m.max_in_flight}});
}

std::string encode_error(std::string_view id, std::string_view message) {
  return dump(json{{"id", id}, {"error", message}});
}

JudgeRequest decode_judge_request(std::string_view line) {
  const json j = parse(line);
  if (field<std::string>(j, "type") != "judge") throw ProtocolError("not a judge request");
  JudgeRequest m;
  m.id = field<std::string>(j, "id");
  try {
    m.task = parse_task_tag(field<std::string>(j, "task", m.id));
  } catch (const DomainError& e) {
    throw ProtocolError(e.what(), m.id);
  }
  m.context = field<std::string>(j, "context", m.id);
  m.a = field<std::string>(j, "a", m.id);
  m.b = field<std::string>(j, "b", m.id);
  return m;
}

GenerateRequest decode_generate_request(std::string_view line) {
  const json j = parse(line);
  if (field<std::string>(j, "type") != "generate") throw ProtocolError("not a generate request");
  GenerateRequest m;
  m.id = field<std::string>(j, "id");
  m.prompt = field<std::string>(j, "prompt", m.id);
  m.max_tokens = field<std::uint32_t>(j, "max_tokens", m.id);
  const auto it = j.find("wm");
  if (it != j.end() && !it->is_null()) {
    WatermarkSpec wm;
    try {
      wm.seed = parse_u64_string(field<std::string>(*it, "seed", m.id));
    } catch (const DomainError& e) {
      throw ProtocolError(e.what(), m.id);
    }
    wm.g = field<double>(*it, "g", m.id);
    wm.delta = field<double>(*it, "delta", m.id);
    m.wm = wm;
  }
  return m;
}

Hello decode_hello(std::string_view line) {
  const json j = parse(line);
  if (field<std::string>(j, "type") != "hello") throw ProtocolError("not a hello message");
  Hello h;
  h.capabilities = field<std::vector<std::string>>(j, "capabilities");
  h.max_in_flight = field<std::size_t>(j, "max_in_flight");
  return h;
}

JudgeResponse decode_judge_response(std::string_view line, std::string_view expected_id) {
  json j;
  try {
    j = parse(line);
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what(), std::string(expected_id));
  }
  check_response_envelope(j, expected_id);
  JudgeResponse r;
  r.id = std::string(expected_id);
  r.p_a = field<double>(j, "p_a", expected_id);
  if (!(r.p_a >= 0.0 && r.p_a <= 1.0)) {
    throw ProtocolError("p_a outside [0, 1]: " + j.at("p_a").dump(), r.id);
  }
  return r;
}

GenerateResponse decode_generate_response(std::string_view line, std::string_view expected_id) {
  json j;
  try {
    j = parse(line);
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what(), std::string(expected_id));
  }
  check_response_envelope(j, expected_id);
  GenerateResponse r;
  r.id = std::string(expected_id);
  r.token_ids = field<std::vector<TokenId>>(j, "token_ids", expected_id);
  r.text = field<std::string>(j, "text", expected_id);
  return r;
}

std::string message_type(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return {};
  const auto it = j.find("type");
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

std::string message_id(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return {};
  const auto it = j.find("id");
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

}  // namespace waterjudge::wire
