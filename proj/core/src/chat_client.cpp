#include "mollia/chat_client.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include <httplib.h>

namespace mollia {

using json = nlohmann::json;

json make_chat_request(const ChatRequest& request) {
  json body = {
      {"model", request.model},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"seed", request.seed & 0x7fffffffffffffffULL},
  };
  if (request.logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = request.top_logprobs;
  }
  return body;
}

ChatCompletion parse_chat_response(const json& body) {
  auto protocol = [](const std::string& what) { fail(ErrorKind::Protocol, "malformed chat response: " + what); };
  if (!body.is_object()) protocol("body is not an object");
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) protocol("no choices");
  const auto& choice = body["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) protocol("no message");

  ChatCompletion out;
  const auto& content = choice["message"].value("content", json());
  if (content.is_string()) {
    out.content = content.get<std::string>();
  } else if (!content.is_null()) {
    protocol("message.content is not a string");
  }

  if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
    const auto& tokens = choice["logprobs"].value("content", json());
    if (tokens.is_array() && !tokens.empty()) {
      const auto& first = tokens[0];
      if (!first.is_object()) protocol("logprobs.content[0] is not an object");
      auto push = [&](const json& entry) {
        if (!entry.contains("token") || !entry.contains("logprob") || !entry["logprob"].is_number()) {
          protocol("logprob entry lacks token/logprob");
        }
        out.first_token_logprobs.emplace_back(entry["token"].get<std::string>(), entry["logprob"].get<double>());
      };
      if (first.contains("top_logprobs") && first["top_logprobs"].is_array() && !first["top_logprobs"].empty()) {
        for (const auto& alt : first["top_logprobs"]) push(alt);
      } else {
        push(first);
      }
    }
  }
  return out;
}

std::map<ClassIndex, double> match_label_logprobs(const std::vector<std::pair<std::string, double>>& candidates,
                                                  const LabelSpace& labels) {
  auto normalize = [](std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    std::size_t e = s.size();
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  std::map<ClassIndex, double> out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto name = normalize(labels.name(k));
    std::size_t best_len = 0;
    double best_lp = 0.0;
    for (const auto& [token, lp] : candidates) {
      const auto t = normalize(token);
      if (t.empty() || t.size() > name.size() || name.compare(0, t.size(), t) != 0) continue;
      if (t.size() > best_len || (t.size() == best_len && lp > best_lp)) {
        best_len = t.size();
        best_lp = lp;
      }
    }
    if (best_len > 0) out[k] = best_lp;
  }
  return out;
}

ChatClient::ChatClient(std::string annotator_name, RemoteAnnotator config)
    : name_(std::move(annotator_name)), config_(std::move(config)) {
  const auto& url = config_.base_url;
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  host_ = path_start == std::string::npos ? url : url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ChatCompletion ChatClient::complete(const ChatRequest& request) const {
  httplib::Client cli(host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const std::string payload = make_chat_request(request).dump();
  const std::string path = path_prefix_ + "/chat/completions";
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorKind::Protocol, "annotator '" + name_ + "' returned HTTP " + std::to_string(res->status) + ": " +
                                    res->body.substr(0, 200));
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::parse_error&) {
      fail(ErrorKind::Protocol, "annotator '" + name_ + "' returned a non-JSON body");
    }
    return parse_chat_response(body);
  }
  throw AnnotatorUnavailable(name_, last_error + " after " + std::to_string(config_.retries + 1) + " attempts");
}

}  // namespace mollia
