#pragma once
// Newline-delimited JSON messages shared with external generation/judge bridges.
//
//   judge:    {"id","type":"judge","task","context","a","b"}           -> {"id","p_a"}
//   generate: {"id","type":"generate","prompt","wm":{seed,g,delta}|null,"max_tokens"}
//                                                                      -> {"id","token_ids","text"}
//   error:    {"id","error"}
//   hello:    {"type":"hello","capabilities":[...],"max_in_flight"}
//
// Encoders emit one line of compact JSON with sorted keys and no trailing newline.
// Decoders ignore unknown fields.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "waterjudge/judge.hpp"
#include "waterjudge/wm_core.hpp"

namespace waterjudge::wire {

struct JudgeRequest {
  std::string id;
  TaskTag task = TaskTag::generic;
  std::string context;
  std::string a;
  std::string b;
};

struct JudgeResponse {
  std::string id;
  double p_a = 0.5;
};

struct WatermarkSpec {
  std::uint64_t seed = 0;
  double g = 0.5;
  double delta = 0.0;
};

struct GenerateRequest {
  std::string id;
  std::string prompt;
  std::optional<WatermarkSpec> wm;
  std::uint32_t max_tokens = 60;
};

struct GenerateResponse {
  std::string id;
  std::vector<TokenId> token_ids;
  std::string text;
};

struct Hello {
  std::vector<std::string> capabilities;
  std::size_t max_in_flight = 1;
};

std::string encode(const JudgeRequest& m);
std::string encode(const JudgeResponse& m);
std::string encode(const GenerateRequest& m);
std::string encode(const GenerateResponse& m);
std::string encode(const Hello& m);
std::string encode_error(std::string_view id, std::string_view message);

// Request-side decoders (for stubs and bridges). Throw ProtocolError.
JudgeRequest decode_judge_request(std::string_view line);
GenerateRequest decode_generate_request(std::string_view line);
Hello decode_hello(std::string_view line);

// Response-side decoders. An {"error"} response raises TransportError; an id other than
// expected_id, a missing field, or p_a outside [0, 1] raises ProtocolError.
JudgeResponse decode_judge_response(std::string_view line, std::string_view expected_id);
GenerateResponse decode_generate_response(std::string_view line, std::string_view expected_id);

// "type" field of a message, empty when absent or the line is not JSON.
std::string message_type(std::string_view line);
// "id" field of a message, empty when absent or the line is not JSON.
std::string message_id(std::string_view line);

}  // namespace waterjudge::wire
