#include "cascade/backends.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"

namespace cascade {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

constexpr std::uint64_t kLabelSalt = 0x6C6162656C73ULL;

}  // namespace

bool outputs_equivalent(std::string_view lhs, std::string_view rhs) {
  lhs = trim(lhs);
  rhs = trim(rhs);
  return std::ranges::equal(lhs, rhs, [](char a, char b) { return fold(a) == fold(b); });
}

std::string simulated_reference_label(std::uint64_t item_id, std::uint32_t label_count) {
  const std::uint64_t classes = label_count == 0 ? 1 : label_count;
  return "class_" + std::to_string(simd::splitmix64(item_id ^ kLabelSalt) % classes);
}

// ---------------------------------------------------------------------------

SimulatedBackend::SimulatedBackend(SimModelSpec spec, std::uint32_t label_count)
    : spec_(std::move(spec)), label_count_(label_count) {
  if (!(spec_.true_accuracy >= 0.0 && spec_.true_accuracy <= 1.0)) {
    throw DomainError("simulated accuracy must lie in [0, 1] for model " + spec_.model.name);
  }
  if (spec_.model.price_per_1k_tokens < 0.0) {
    throw DomainError("negative price for model " + spec_.model.name);
  }
  threshold_ = simd::probability_threshold(spec_.true_accuracy);
}

Invocation SimulatedBackend::invoke(std::string_view /*question*/, const TaskItem& item) {
  Invocation out;
  out.cost = billed_cost(item.token_count, spec_.model.price_per_1k_tokens);
  if (simd::agrees(spec_.seed_namespace, item.item_id, threshold_)) {
    out.output = simulated_reference_label(item.item_id, label_count_);
  } else {
    out.output = std::string(kDisagreeLabel);
  }
  return out;
}

// ---------------------------------------------------------------------------

ReplayFixture ReplayFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open replay fixture " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

ReplayFixture ReplayFixture::parse(std::string_view jsonl) {
  ReplayFixture fixture;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const std::size_t end = std::min(jsonl.find('\n', pos), jsonl.size());
    const std::string_view line = trim(jsonl.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      fixture.add(j.at("model").get<std::string>(), j.at("item_id").get<std::uint64_t>(),
                  Record{j.at("output").get<std::string>(), j.at("cost").get<double>()});
    } catch (const json::exception& ex) {
      throw std::runtime_error("replay fixture line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return fixture;
}

void ReplayFixture::add(const std::string& model, std::uint64_t item_id, Record record) {
  records_[{model, item_id}] = std::move(record);
}

const ReplayFixture::Record& ReplayFixture::lookup(const std::string& model,
                                                   std::uint64_t item_id) const {
  const auto it = records_.find({model, item_id});
  if (it == records_.end()) {
    throw ReplayMissError("no recorded output for model " + model + " item " +
                          std::to_string(item_id));
  }
  return it->second;
}

ReplayBackend::ReplayBackend(ModelId model, std::shared_ptr<const ReplayFixture> fixture)
    : model_(std::move(model)), fixture_(std::move(fixture)) {}

Invocation ReplayBackend::invoke(std::string_view /*question*/, const TaskItem& item) {
  const auto& rec = fixture_->lookup(model_.name, item.item_id);
  return Invocation{rec.output, rec.cost};
}

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> inner,
                                   std::shared_ptr<std::ostream> sink)
    : inner_(std::move(inner)), sink_(std::move(sink)) {}

Invocation RecordingBackend::invoke(std::string_view question, const TaskItem& item) {
  Invocation out = inner_->invoke(question, item);
  const json line = {{"model", inner_->model().name},
                     {"item_id", item.item_id},
                     {"output", out.output},
                     {"cost", out.cost}};
  std::lock_guard lock(mu_);
  *sink_ << line.dump() << '\n';
  return out;
}

// ---------------------------------------------------------------------------

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

RemoteBackend::RemoteBackend(ModelId model, RemoteConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("remote backend needs an endpoint");
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

std::string RemoteBackend::request_body(std::string_view question, const TaskItem& item) const {
  std::string user = config_.prompt_template;
  const std::string key = "{text}";
  for (std::size_t at = user.find(key); at != std::string::npos;
       at = user.find(key, at + item.payload.size())) {
    user.replace(at, key.size(), item.payload);
  }
  const json body = {
      {"model", model_.name},
      {"messages",
       json::array({{{"role", "system"}, {"content", std::string(question)}},
                    {{"role", "user"}, {"content", user}}})},
      {"temperature", 0}};
  return body.dump();
}

namespace {

struct LimiterGuard {
  explicit LimiterGuard(InFlightLimiter* l) : limiter(l) {
    if (limiter) limiter->acquire();
  }
  ~LimiterGuard() {
    if (limiter) limiter->release();
  }
  LimiterGuard(const LimiterGuard&) = delete;
  LimiterGuard& operator=(const LimiterGuard&) = delete;
  InFlightLimiter* limiter;
};

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

Invocation RemoteBackend::invoke(std::string_view question, const TaskItem& item) {
  const std::string body = request_body(question, item);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  bool last_was_timeout = false;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      LimiterGuard guard(config_.limiter.get());
      httplib::Client client(config_.endpoint);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs =
          std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      res = client.Post(config_.path, headers, body, "application/json");
    }

    if (!res) {
      last_was_timeout = res.error() == httplib::Error::Read ||
                         res.error() == httplib::Error::ConnectionTimeout;
      last_error = "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::exception& ex) {
        throw MalformedResponseError(std::string("response is not JSON: ") + ex.what());
      }
      const json* content = nullptr;
      if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const json& first = reply["choices"][0];
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string()) {
          content = &first["message"]["content"];
        }
      }
      if (content == nullptr) {
        throw MalformedResponseError("response lacks choices[0].message.content");
      }
      std::uint64_t tokens = item.token_count;
      if (reply.contains("usage") && reply["usage"].contains("prompt_tokens") &&
          reply["usage"]["prompt_tokens"].is_number_unsigned()) {
        tokens = reply["usage"]["prompt_tokens"].get<std::uint64_t>();
      }
      return Invocation{content->get<std::string>(),
                        billed_cost(tokens, model_.price_per_1k_tokens)};
    } else if (retryable_status(res->status)) {
      last_was_timeout = false;
      last_error = "HTTP " + std::to_string(res->status) + " from " + config_.endpoint;
    } else {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
    }

    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config_.max_backoff);
    }
  }
  const std::string msg = last_error + " after " + std::to_string(config_.max_attempts) + " attempts";
  if (last_was_timeout) throw TimeoutError(msg);
  throw TransportError(msg);
}

// ---------------------------------------------------------------------------

CostLedger::CostLedger(const std::vector<std::string>& models) {
  for (const auto& m : models) entries_.push_back(Entry{m, 0, 0.0});
}

void CostLedger::charge(const std::string& model, double cost) {
  auto it = std::ranges::find(entries_, model, &Entry::model);
  if (it == entries_.end()) {
    entries_.push_back(Entry{model, 0, 0.0});
    it = std::prev(entries_.end());
  }
  it->items += 1;
  it->cost += cost;
}

double CostLedger::total() const {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.cost;
  return sum;
}

const CostLedger::Entry* CostLedger::find(const std::string& model) const {
  const auto it = std::ranges::find(entries_, model, &Entry::model);
  return it == entries_.end() ? nullptr : &*it;
}

}  // namespace cascade
