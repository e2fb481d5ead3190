#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mollia/annotator.hpp"

namespace mollia {

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 16;
  bool logprobs = false;
  int top_logprobs = 0;
  std::uint64_t seed = 0;
};

struct ChatCompletion {
  std::string content;
  // Alternatives for the first generated token, as (token, log-prob).
  std::vector<std::pair<std::string, double>> first_token_logprobs;
};

nlohmann::json make_chat_request(const ChatRequest& request);
// Throws Protocol errors on malformed bodies.
ChatCompletion parse_chat_response(const nlohmann::json& body);

// Maps each class to the log-prob of its best-matching leading token: the
// longest candidate whose trimmed, lower-cased text is a prefix of the class
// name (ties: higher log-prob). Classes without a match are omitted.
std::map<ClassIndex, double> match_label_logprobs(const std::vector<std::pair<std::string, double>>& candidates,
                                                  const LabelSpace& labels);

// Blocking HTTP client for one endpoint with bounded retries and exponential
// backoff on transport failures, 429 and 5xx.
class ChatClient {
 public:
  ChatClient(std::string annotator_name, RemoteAnnotator config);

  ChatCompletion complete(const ChatRequest& request) const;

 private:
  std::string name_;
  RemoteAnnotator config_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace mollia
