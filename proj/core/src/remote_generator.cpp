#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "hnm/log.hpp"
#include "hnm/mirrorgen.hpp"

namespace hnm::mirrorgen {

void validate(const GeneratorSpec& spec) {
  if (spec.name.empty()) throw std::invalid_argument("generator name is empty");
  if (spec.offline()) {
    if (!spec.seed) throw std::invalid_argument("offline generator '" + spec.name + "' needs a seed");
    if (spec.simulacrum.length_jitter < 0 || spec.simulacrum.length_jitter >= 0.10) {
      throw std::invalid_argument("simulacrum length_jitter must be in [0, 0.10)");
    }
    if (spec.simulacrum.tell_rate < 0) throw std::invalid_argument("tell_rate must be >= 0");
    if (spec.simulacrum.synonym_rate < 0 || spec.simulacrum.synonym_rate > 1) {
      throw std::invalid_argument("synonym_rate must be in [0, 1]");
    }
    return;
  }
  if (spec.endpoint.rfind("http://", 0) != 0 && spec.endpoint.rfind("https://", 0) != 0) {
    throw std::invalid_argument("generator endpoint must be \"offline\" or an http(s) URL");
  }
  if (spec.api_key_env.empty()) throw std::invalid_argument("remote generator needs api_key_env");
  if (spec.max_in_flight == 0) throw std::invalid_argument("max_in_flight must be >= 1");
  if (spec.retry_budget < 0) throw std::invalid_argument("retry_budget must be >= 0");
  if (spec.adapter != "openai" && spec.adapter != "text") {
    throw std::invalid_argument("adapter must be \"openai\" or \"text\"");
  }
}

std::unique_ptr<Generator> make_generator(const GeneratorSpec& spec) {
  validate(spec);
  if (spec.offline()) return std::make_unique<SimulacrumGenerator>(spec.name, spec.simulacrum);
  if (std::getenv(spec.api_key_env.c_str()) == nullptr) {
    throw std::invalid_argument("generator '" + spec.name + "': credential variable " +
                                spec.api_key_env + " is not set");
  }
  return std::make_unique<RemoteChatGenerator>(spec);
}

struct RemoteChatGenerator::State {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight = 0;
  std::size_t peak = 0;
  std::mutex audit_mu;
  std::ofstream audit;
  std::string api_key;
};

RemoteChatGenerator::RemoteChatGenerator(GeneratorSpec spec)
    : spec_(std::move(spec)), state_(std::make_unique<State>()) {
  if (const char* key = std::getenv(spec_.api_key_env.c_str())) state_->api_key = key;
  if (spec_.audit_log) {
    if (spec_.audit_log->has_parent_path()) {
      std::filesystem::create_directories(spec_.audit_log->parent_path());
    }
    state_->audit.open(*spec_.audit_log, std::ios::app);
  }
}

RemoteChatGenerator::~RemoteChatGenerator() = default;

std::size_t RemoteChatGenerator::peak_in_flight() const {
  std::lock_guard lock(state_->mu);
  return state_->peak;
}

std::string RemoteChatGenerator::complete(const MirrorPrompt& prompt, const std::vector<Turn>& turns,
                                          std::uint64_t seed) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& t : turns) {
    messages.push_back({{"role", t.role == Role::prompt ? "user" : "assistant"}, {"content", t.text}});
  }
  const nlohmann::json request = {{"model", spec_.model.empty() ? spec_.name : spec_.model},
                                  {"messages", messages},
                                  {"temperature", spec_.temperature},
                                  {"max_tokens", spec_.max_tokens},
                                  {"seed", seed}};
  const std::string body = request.dump();

  // Bounded in-flight requests across all callers of this generator.
  {
    std::unique_lock lock(state_->mu);
    state_->cv.wait(lock, [&] { return state_->in_flight < spec_.max_in_flight; });
    ++state_->in_flight;
    state_->peak = std::max(state_->peak, state_->in_flight);
  }
  struct Release {
    State& s;
    ~Release() {
      {
        std::lock_guard lock(s.mu);
        --s.in_flight;
      }
      s.cv.notify_one();
    }
  } release{*state_};

  auto audit = [&](int attempt, int status, const std::string& outcome) {
    if (!state_->audit.is_open()) return;
    const nlohmann::json line = {{"generator", spec_.name},  {"source_id", prompt.source_id},
                                 {"attempt", attempt},       {"status", status},
                                 {"request", request},       {"response", outcome}};
    std::lock_guard lock(state_->audit_mu);
    state_->audit << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n'
                  << std::flush;
  };

  std::string last_error;
  int delay_ms = spec_.backoff_ms;
  for (int attempt = 0; attempt <= spec_.retry_budget; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    httplib::Client client(spec_.endpoint);
    client.set_connection_timeout(spec_.timeout_s, 0);
    client.set_read_timeout(spec_.timeout_s, 0);
    httplib::Headers headers;
    if (!state_->api_key.empty()) headers.emplace("Authorization", "Bearer " + state_->api_key);
    auto res = client.Post(spec_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      audit(attempt, 0, last_error);
      log::warn("generator.retry", {{"generator", spec_.name}, {"attempt", attempt}, {"error", last_error}});
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      audit(attempt, res->status, res->body);
      log::warn("generator.retry", {{"generator", spec_.name}, {"attempt", attempt}, {"error", last_error}});
      continue;
    }
    audit(attempt, res->status, res->body);
    if (res->status != 200) {
      throw GeneratorError("generator " + spec_.name + ": HTTP " + std::to_string(res->status));
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      if (spec_.adapter == "text") return j.at("text").get<std::string>();
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw GeneratorError("generator " + spec_.name + ": malformed response: " + e.what());
    }
  }
  throw GeneratorError("generator " + spec_.name + " failed after " +
                       std::to_string(spec_.retry_budget + 1) + " attempts: " + last_error);
}

}  // namespace hnm::mirrorgen
