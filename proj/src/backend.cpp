#include "amulet/backend.hpp"

#include <sstream>

#include "amulet/digest.hpp"

namespace amulet {

using nlohmann::json;

std::string TranscriptKey::str() const {
  std::string s = instance_id;
  s += '|';
  s += to_string(kind);
  s += '|';
  s += to_string(order);
  s += '|';
  s += model;
  s += '|';
  s += template_hash;
  s += '|';
  s += std::to_string(attempt);
  return s;
}

json TranscriptKey::to_json() const {
  return {{"instance_id", instance_id},     {"kind", to_string(kind)}, {"order", to_string(order)},
          {"model", model},                 {"template_hash", template_hash}, {"attempt", attempt}};
}

TranscriptKey TranscriptKey::from_json(const json& j) {
  TranscriptKey k;
  k.instance_id = j.at("instance_id").get<std::string>();
  k.kind = parse_prompt_kind(j.at("kind").get<std::string>());
  k.order = parse_response_order(j.at("order").get<std::string>());
  k.model = j.at("model").get<std::string>();
  k.template_hash = j.at("template_hash").get<std::string>();
  k.attempt = j.at("attempt").get<std::size_t>();
  return k;
}

// ---------------------------------------------------------------------------

std::string AppendLog::checksum(const std::string& key, const json& payload) {
  return sha256_hex(json{{"key", key}, {"payload", payload}}.dump());
}

AppendLog::AppendLog() = default;

AppendLog::AppendLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  if (std::filesystem::exists(*path_)) {
    std::string content;
    {
      std::ifstream in(*path_, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      content = buf.str();
    }
    std::size_t complete = content.rfind('\n');
    complete = complete == std::string::npos ? 0 : complete + 1;
    if (complete < content.size()) std::filesystem::resize_file(*path_, complete);

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < complete) {
      std::size_t nl = content.find('\n', pos);
      std::string line = content.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error&) {
        throw CorruptLog(path_->string() + ":" + std::to_string(line_no) + ": malformed record");
      }
      if (!rec.is_object() || !rec.contains("key") || !rec.contains("payload") || !rec.contains("checksum") ||
          !rec["key"].is_string()) {
        throw CorruptLog(path_->string() + ":" + std::to_string(line_no) + ": incomplete record");
      }
      const auto key = rec["key"].get<std::string>();
      if (checksum(key, rec["payload"]) != rec["checksum"]) {
        throw CorruptLog(path_->string() + ":" + std::to_string(line_no) + ": checksum mismatch");
      }
      if (!index_.emplace(key, rec["payload"]).second) {
        throw CorruptLog(path_->string() + ":" + std::to_string(line_no) + ": duplicate key " + key);
      }
    }
  }
  out_.open(*path_, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path_->string() + " for append");
}

std::optional<json> AppendLog::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool AppendLog::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return index_.count(key) > 0;
}

void AppendLog::put(const std::string& key, const json& payload) {
  std::lock_guard lock(mu_);
  if (index_.count(key)) throw CacheConflict("refusing to overwrite existing key " + key);
  if (path_) {
    json rec{{"key", key}, {"payload", payload}, {"checksum", checksum(key, payload)}};
    out_ << rec.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write failed on " + path_->string());
  }
  index_.emplace(key, payload);
}

std::size_t AppendLog::size() const {
  std::lock_guard lock(mu_);
  return index_.size();
}

std::vector<std::string> AppendLog::keys() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(index_.size());
  for (const auto& [k, _] : index_) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

TranscriptRecord record_from(const json& p) {
  TranscriptRecord r;
  r.key = TranscriptKey::from_json(p.at("key"));
  r.prompt_digest = p.at("prompt_sha256").get<std::string>();
  r.response.text = p.at("completion").get<std::string>();
  r.response.refused = p.value("refused", false);
  r.response.latency_ms = p.value("latency_ms", 0.0);
  r.response.metadata = p.value("metadata", json::object());
  return r;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::optional<TranscriptRecord> TranscriptStore::get(const TranscriptKey& key) const {
  auto p = log_.get(key.str());
  if (!p) return std::nullopt;
  return record_from(*p);
}

void TranscriptStore::put(const TranscriptRecord& r) {
  json p{{"key", r.key.to_json()},
         {"prompt_sha256", r.prompt_digest},
         {"completion", r.response.text},
         {"refused", r.response.refused},
         {"latency_ms", r.response.latency_ms},
         {"metadata", r.response.metadata},
         {"timestamp", utc_timestamp()}};
  log_.put(r.key.str(), p);
}

std::vector<TranscriptRecord> TranscriptStore::records() const {
  std::vector<TranscriptRecord> out;
  for (const auto& k : log_.keys()) out.push_back(record_from(*log_.get(k)));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BackendMode m) { return m == BackendMode::Live ? "live" : "replay"; }

CachedBackend::CachedBackend(TranscriptStore& store, BackendMode mode, ChatBackend* live)
    : store_(store), mode_(mode), live_(live) {
  if (mode_ == BackendMode::Live && live_ == nullptr) throw std::invalid_argument("live mode requires a backend");
}

ChatResponse CachedBackend::complete(const ChatRequest& req) {
  const std::string key = req.key.str();
  const std::string digest = sha256_hex(req.prompt);
  auto from_cache = [&](const TranscriptRecord& rec) {
    if (rec.prompt_digest != digest) {
      throw CacheConflict("cached prompt differs from the current rendering for key " + key);
    }
    return rec.response;
  };

  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_.count(key) == 0; });
    if (auto rec = store_.get(req.key)) {
      ++hits_;
      return from_cache(*rec);
    }
    if (mode_ == BackendMode::Replay) throw ReplayMiss(key);
    in_flight_.insert(key);
    ++live_calls_;
  }

  struct Release {
    CachedBackend* self;
    const std::string& key;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        self->in_flight_.erase(key);
      }
      self->cv_.notify_all();
    }
  } release{this, key};

  ChatResponse resp = live_->complete(req);
  resp.metadata["message_layout"] = "single_user_message";
  store_.put(TranscriptRecord{req.key, digest, resp});
  return resp;
}

std::size_t CachedBackend::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachedBackend::live_calls() const {
  std::lock_guard lock(mu_);
  return live_calls_;
}

// ---------------------------------------------------------------------------

std::variant<Accepted, InstanceFailure> complete_with_format_retries(ChatBackend& backend, ChatRequest req,
                                                                     const Validator& validator,
                                                                     std::size_t max_attempts) {
  max_attempts = std::min(max_attempts, kMaxAttempts);
  InstanceFailure failure;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    req.key.attempt = attempt;
    ChatResponse resp = backend.complete(req);
    std::optional<std::string> error;
    if (resp.refused) {
      error = "refused";
    } else {
      error = validator(resp.text);
    }
    if (!error) return Accepted{std::move(resp), attempt};
    failure.raw_texts.push_back(resp.text);
    failure.errors.push_back(*error);
  }
  return failure;
}

}  // namespace amulet
