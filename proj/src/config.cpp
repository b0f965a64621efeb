#include "cascade/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cascade/errors.hpp"

namespace cascade {

using nlohmann::json;
using nlohmann::ordered_json;

const ModelConfig& CascadeConfig::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.model.name == name) return m;
  }
  throw UnknownModelError("model " + name + " is not configured");
}

bool CascadeConfig::all_simulated() const {
  return std::ranges::all_of(models, [](const ModelConfig& m) { return m.backend.kind == "simulated"; });
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Walks a parsed document, tracking the JSON pointer for diagnostics. Lines
// are located by the first occurrence of the quoted key in the source.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& pointer, std::string_view key,
                         const std::string& msg) const {
    std::string where;
    if (!key.empty()) {
      const std::string quoted = "\"" + std::string(key) + "\"";
      const auto at = text_.find(quoted);
      if (at != std::string_view::npos) where = "line " + std::to_string(line_of_offset(text_, at)) + ": ";
    }
    throw ConfigError(where + "field " + (pointer.empty() ? "/" : pointer) + ": " + msg);
  }

  void only(const json& obj, const std::string& pointer,
            std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(pointer, last_key(pointer), "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (std::ranges::find(allowed, key) == allowed.end()) {
        fail(pointer + "/" + key, key, "unknown field '" + key + "'");
      }
    }
  }

  double number(const json& v, const std::string& pointer) const {
    if (!v.is_number()) fail(pointer, last_key(pointer), "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(const json& v, const std::string& pointer) const {
    if (!v.is_number_unsigned()) fail(pointer, last_key(pointer), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const json& v, const std::string& pointer) const {
    if (!v.is_string()) fail(pointer, last_key(pointer), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const json& v, const std::string& pointer) const {
    if (!v.is_boolean()) fail(pointer, last_key(pointer), "expected true or false");
    return v.get<bool>();
  }

  const json& array(const json& v, const std::string& pointer) const {
    if (!v.is_array()) fail(pointer, last_key(pointer), "expected an array");
    return v;
  }

  static std::string_view last_key(std::string_view pointer) {
    const auto slash = pointer.rfind('/');
    return slash == std::string_view::npos ? pointer : pointer.substr(slash + 1);
  }

 private:
  std::string_view text_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    const std::size_t line = line_of_offset(text, ex.byte == 0 ? 0 : ex.byte - 1);
    throw ConfigError("line " + std::to_string(line) + ": malformed JSON: " + ex.what());
  }
}

BackendConfig read_backend(const Reader& r, const json& j, const std::string& ptr) {
  r.only(j, ptr,
         {"kind", "accuracy", "endpoint", "path", "prompt_template", "fixture", "max_in_flight",
          "max_attempts", "timeout_ms"});
  BackendConfig b;
  if (j.contains("kind")) b.kind = r.string(j["kind"], ptr + "/kind");
  if (b.kind != "simulated" && b.kind != "remote" && b.kind != "replay") {
    r.fail(ptr + "/kind", "kind", "expected simulated, remote or replay, got '" + b.kind + "'");
  }
  if (j.contains("accuracy")) b.accuracy = r.number(j["accuracy"], ptr + "/accuracy");
  if (j.contains("endpoint")) b.endpoint = r.string(j["endpoint"], ptr + "/endpoint");
  if (j.contains("path")) b.path = r.string(j["path"], ptr + "/path");
  if (j.contains("prompt_template")) {
    b.prompt_template = r.string(j["prompt_template"], ptr + "/prompt_template");
  }
  if (j.contains("fixture")) b.fixture = r.string(j["fixture"], ptr + "/fixture");
  if (j.contains("max_in_flight")) {
    b.max_in_flight = r.unsigned_int(j["max_in_flight"], ptr + "/max_in_flight");
  }
  if (j.contains("max_attempts")) {
    b.max_attempts = static_cast<int>(r.unsigned_int(j["max_attempts"], ptr + "/max_attempts"));
  }
  if (j.contains("timeout_ms")) {
    b.timeout_ms = static_cast<int>(r.unsigned_int(j["timeout_ms"], ptr + "/timeout_ms"));
  }
  return b;
}

BenchmarkConfig read_benchmark(const Reader& r, const json& j, const std::string& ptr) {
  if (j.is_string()) {
    return BenchmarkConfig{presets::benchmark(r.string(j, ptr)), {}};
  }
  r.only(j, ptr,
         {"preset", "scale_divisor", "name", "instance_count", "mean_tokens", "label_count",
          "token_dispersion", "accuracies"});
  BenchmarkConfig b;
  std::uint64_t divisor = 1;
  if (j.contains("scale_divisor")) {
    divisor = r.unsigned_int(j["scale_divisor"], ptr + "/scale_divisor");
    if (divisor < 1) r.fail(ptr + "/scale_divisor", "scale_divisor", "must be at least 1");
  }
  if (j.contains("preset")) {
    try {
      b.spec = presets::benchmark(r.string(j["preset"], ptr + "/preset"), divisor);
    } catch (const ConfigError& ex) {
      r.fail(ptr + "/preset", "preset", ex.what());
    }
  } else if (j.contains("scale_divisor")) {
    r.fail(ptr + "/scale_divisor", "scale_divisor", "only applies together with a preset");
  }
  if (j.contains("name")) b.spec.name = r.string(j["name"], ptr + "/name");
  if (j.contains("instance_count")) {
    b.spec.instance_count = r.unsigned_int(j["instance_count"], ptr + "/instance_count");
  }
  if (j.contains("mean_tokens")) b.spec.mean_tokens = r.number(j["mean_tokens"], ptr + "/mean_tokens");
  if (j.contains("label_count")) {
    b.spec.label_count = static_cast<std::uint32_t>(r.unsigned_int(j["label_count"], ptr + "/label_count"));
  }
  if (j.contains("token_dispersion")) {
    b.spec.token_dispersion = r.number(j["token_dispersion"], ptr + "/token_dispersion");
  }
  if (j.contains("accuracies")) {
    const json& acc = j["accuracies"];
    if (!acc.is_object()) r.fail(ptr + "/accuracies", "accuracies", "expected an object");
    for (const auto& [name, v] : acc.items()) {
      b.accuracies[name] = r.number(v, ptr + "/accuracies/" + name);
    }
  }
  if (b.spec.name.empty()) r.fail(ptr + "/name", "name", "benchmark needs a name or a preset");
  return b;
}

template <typename T, typename F>
std::vector<T> scalar_or_list(const Reader& r, const json& doc, const std::string& one,
                              const std::string& many, F&& read) {
  if (doc.contains(one) && doc.contains(many)) {
    r.fail("/" + many, many, "give either '" + one + "' or '" + many + "', not both");
  }
  std::vector<T> out;
  if (doc.contains(one)) {
    out.push_back(read(doc[one], "/" + one));
  } else if (doc.contains(many)) {
    const json& arr = r.array(doc[many], "/" + many);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(read(arr[i], "/" + many + "/" + std::to_string(i)));
    }
  }
  return out;
}

}  // namespace

CascadeConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text);
  const Reader r(text);
  r.only(doc, "",
         {"models", "reference", "delta", "deltas", "gamma", "variant", "variants", "seed", "seeds",
          "benchmark", "benchmarks", "question", "grid_step", "parallel", "items", "ci_trace"});

  CascadeConfig cfg;
  cfg.base_dir = base_dir;
  if (!doc.contains("models")) r.fail("/models", "", "missing required field");
  const json& models = r.array(doc["models"], "/models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string ptr = "/models/" + std::to_string(i);
    r.only(models[i], ptr, {"name", "price_per_1k_tokens", "backend"});
    ModelConfig m;
    if (!models[i].contains("name")) r.fail(ptr + "/name", "", "missing required field");
    if (!models[i].contains("price_per_1k_tokens")) {
      r.fail(ptr + "/price_per_1k_tokens", "", "missing required field");
    }
    m.model.name = r.string(models[i]["name"], ptr + "/name");
    m.model.price_per_1k_tokens =
        r.number(models[i]["price_per_1k_tokens"], ptr + "/price_per_1k_tokens");
    if (models[i].contains("backend")) m.backend = read_backend(r, models[i]["backend"], ptr + "/backend");
    cfg.models.push_back(std::move(m));
  }
  if (!doc.contains("reference")) r.fail("/reference", "", "missing required field");
  cfg.reference = r.string(doc["reference"], "/reference");

  auto deltas = scalar_or_list<double>(r, doc, "delta", "deltas",
                                       [&](const json& v, const std::string& p) { return r.number(v, p); });
  if (!deltas.empty()) cfg.deltas = std::move(deltas);
  if (doc.contains("gamma")) cfg.gamma = r.number(doc["gamma"], "/gamma");
  auto variants = scalar_or_list<Variant>(r, doc, "variant", "variants",
                                          [&](const json& v, const std::string& p) {
                                            const std::string name = r.string(v, p);
                                            try {
                                              return parse_variant(name);
                                            } catch (const ConfigError& ex) {
                                              r.fail(p, Reader::last_key(p), ex.what());
                                            }
                                          });
  if (!variants.empty()) cfg.variants = std::move(variants);
  auto seeds = scalar_or_list<std::uint64_t>(
      r, doc, "seed", "seeds", [&](const json& v, const std::string& p) { return r.unsigned_int(v, p); });
  if (!seeds.empty()) cfg.seeds = std::move(seeds);
  cfg.benchmarks = scalar_or_list<BenchmarkConfig>(
      r, doc, "benchmark", "benchmarks",
      [&](const json& v, const std::string& p) { return read_benchmark(r, v, p); });
  if (doc.contains("question")) cfg.question = r.string(doc["question"], "/question");
  if (doc.contains("grid_step")) cfg.grid_step = r.number(doc["grid_step"], "/grid_step");
  if (doc.contains("parallel")) cfg.parallel = r.unsigned_int(doc["parallel"], "/parallel");
  if (doc.contains("items")) cfg.items = r.string(doc["items"], "/items");
  if (doc.contains("ci_trace")) cfg.ci_trace = r.boolean(doc["ci_trace"], "/ci_trace");

  try {
    validate_config(cfg);
  } catch (const ConfigError& ex) {
    // Attach a line when the message names a top-level field.
    const std::string msg = ex.what();
    const auto start = msg.find("field /");
    if (start == 0) {
      const auto end = msg.find_first_of("/:", 7);
      const std::string key = msg.substr(7, end == std::string::npos ? std::string::npos : end - 7);
      const auto at = text.find("\"" + key + "\"");
      if (at != std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line_of_offset(text, at)) + ": " + msg);
      }
    }
    throw;
  }
  return cfg;
}

CascadeConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path), path.parent_path());
  } catch (const ConfigError& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

void validate_config(const CascadeConfig& cfg) {
  const auto bad = [](const std::string& field, const std::string& msg) {
    throw ConfigError("field /" + field + ": " + msg);
  };
  if (cfg.models.empty()) bad("models", "at least one model is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const auto& m = cfg.models[i];
    const std::string f = "models/" + std::to_string(i);
    if (m.model.name.empty()) bad(f + "/name", "must not be empty");
    if (!names.insert(m.model.name).second) bad(f + "/name", "duplicate model '" + m.model.name + "'");
    if (!(m.model.price_per_1k_tokens >= 0.0)) bad(f + "/price_per_1k_tokens", "must be non-negative");
    const auto& b = m.backend;
    if (b.accuracy && !(*b.accuracy >= 0.0 && *b.accuracy <= 1.0)) {
      bad(f + "/backend/accuracy", "must lie in [0, 1]");
    }
    if (b.kind == "simulated" && m.model.name == cfg.reference && b.accuracy && *b.accuracy != 1.0) {
      bad(f + "/backend/accuracy", "the reference agrees with itself; accuracy must be 1");
    }
    if (b.kind == "remote" && b.endpoint.empty()) bad(f + "/backend/endpoint", "required for remote backends");
    if (b.kind == "replay" && b.fixture.empty()) bad(f + "/backend/fixture", "required for replay backends");
    if (b.max_attempts < 1) bad(f + "/backend/max_attempts", "must be at least 1");
  }
  if (cfg.reference.empty()) bad("reference", "must name a model");
  if (!names.contains(cfg.reference)) bad("reference", "'" + cfg.reference + "' is not among the models");
  if (cfg.deltas.empty()) bad("delta", "at least one value is required");
  for (double d : cfg.deltas) {
    if (!(d > 0.0 && d < 1.0)) bad("delta", "must lie in (0, 1), got " + format_number(d));
  }
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) bad("gamma", "must lie in (0, 1), got " + format_number(cfg.gamma));
  if (!(cfg.grid_step > 0.0 && cfg.grid_step < 1.0)) bad("grid_step", "must lie in (0, 1)");
  if (cfg.variants.empty()) bad("variant", "at least one variant is required");
  if (cfg.seeds.empty()) bad("seed", "at least one seed is required");
  for (std::size_t i = 0; i < cfg.benchmarks.size(); ++i) {
    const auto& b = cfg.benchmarks[i];
    try {
      b.spec.validate();
    } catch (const DomainError& ex) {
      bad("benchmarks/" + std::to_string(i), ex.what());
    }
    for (const auto& [name, acc] : b.accuracies) {
      if (!names.contains(name)) bad("benchmarks/" + std::to_string(i) + "/accuracies/" + name, "unknown model");
      if (!(acc >= 0.0 && acc <= 1.0)) {
        bad("benchmarks/" + std::to_string(i) + "/accuracies/" + name, "must lie in [0, 1]");
      }
      if (name == cfg.reference && acc != 1.0) {
        bad("benchmarks/" + std::to_string(i) + "/accuracies/" + name, "reference accuracy must be 1");
      }
    }
  }
  for (const auto& m : cfg.models) {
    if (m.backend.kind != "simulated" || m.model.name == cfg.reference) continue;
    const bool everywhere =
        m.backend.accuracy ||
        (!cfg.benchmarks.empty() && std::ranges::all_of(cfg.benchmarks, [&](const BenchmarkConfig& b) {
          return b.accuracies.contains(m.model.name);
        }));
    if (!everywhere) bad("models/" + m.model.name + "/backend/accuracy", "simulated candidates need an accuracy");
  }
}

ordered_json config_to_json(const CascadeConfig& cfg) {
  ordered_json j;
  ordered_json models = ordered_json::array();
  for (const auto& m : cfg.models) {
    ordered_json b{{"kind", m.backend.kind}};
    if (m.backend.accuracy) b["accuracy"] = *m.backend.accuracy;
    if (m.backend.kind == "remote") {
      b["endpoint"] = m.backend.endpoint;
      b["path"] = m.backend.path;
    }
    if (m.backend.kind == "replay") b["fixture"] = m.backend.fixture;
    models.push_back({{"name", m.model.name}, {"price_per_1k_tokens", m.model.price_per_1k_tokens}, {"backend", b}});
  }
  j["models"] = std::move(models);
  j["reference"] = cfg.reference;
  j["deltas"] = cfg.deltas;
  j["gamma"] = cfg.gamma;
  ordered_json variants = ordered_json::array();
  for (Variant v : cfg.variants) variants.push_back(std::string(to_string(v)));
  j["variants"] = std::move(variants);
  j["seeds"] = cfg.seeds;
  ordered_json benches = ordered_json::array();
  for (const auto& b : cfg.benchmarks) {
    ordered_json acc = ordered_json::object();
    for (const auto& [name, a] : b.accuracies) acc[name] = a;
    benches.push_back({{"name", b.spec.name},
                       {"instance_count", b.spec.instance_count},
                       {"mean_tokens", b.spec.mean_tokens},
                       {"label_count", b.spec.label_count},
                       {"token_dispersion", b.spec.token_dispersion},
                       {"accuracies", acc}});
  }
  j["benchmarks"] = std::move(benches);
  j["question"] = cfg.question;
  j["grid_step"] = cfg.grid_step;
  if (!cfg.items.empty()) j["items"] = cfg.items;
  return j;
}

ScenarioSpec scenario_for(const CascadeConfig& cfg, std::size_t index) {
  if (!cfg.all_simulated()) throw ConfigError("sweeps need simulated backends for every model");
  if (index >= cfg.benchmarks.size()) throw ConfigError("config has no benchmark #" + std::to_string(index));
  const BenchmarkConfig& bench = cfg.benchmarks[index];
  ScenarioSpec s;
  s.name = bench.spec.name;
  s.benchmark = bench.spec;
  s.reference = cfg.model(cfg.reference).model;
  for (const auto& m : cfg.models) {
    if (m.model.name == cfg.reference) continue;
    const auto it = bench.accuracies.find(m.model.name);
    const double acc = it != bench.accuracies.end() ? it->second : m.backend.accuracy.value_or(1.0);
    s.candidates.push_back(CandidateSetup{m.model, acc});
  }
  s.variants = cfg.variants;
  s.deltas = cfg.deltas;
  s.gamma = cfg.gamma;
  s.seeds = cfg.seeds;
  s.grid_step = cfg.grid_step;
  s.question = cfg.question;
  return s;
}

ModelPool build_pool(const CascadeConfig& cfg, std::uint64_t seed, const std::string& api_key) {
  const std::string bench_name = cfg.benchmarks.empty() ? "items" : cfg.benchmarks.front().spec.name;
  const std::uint32_t labels = cfg.benchmarks.empty() ? 2 : cfg.benchmarks.front().spec.label_count;
  std::map<std::string, std::shared_ptr<InFlightLimiter>> limiters;
  std::map<std::string, std::shared_ptr<const ReplayFixture>> fixtures;

  const auto make = [&](const ModelConfig& m) -> std::shared_ptr<ModelBackend> {
    const auto& b = m.backend;
    if (b.kind == "simulated") {
      double acc = m.model.name == cfg.reference ? 1.0 : b.accuracy.value_or(1.0);
      if (!cfg.benchmarks.empty()) {
        const auto& overrides = cfg.benchmarks.front().accuracies;
        if (const auto it = overrides.find(m.model.name); it != overrides.end()) acc = it->second;
      }
      return std::make_shared<SimulatedBackend>(
          SimModelSpec{m.model, acc, simulation_namespace(bench_name, seed, m.model.name)}, labels);
    }
    if (b.kind == "replay") {
      const std::filesystem::path path = cfg.base_dir / b.fixture;
      auto& fx = fixtures[path.string()];
      if (!fx) fx = std::make_shared<const ReplayFixture>(ReplayFixture::load(path));
      return std::make_shared<ReplayBackend>(m.model, fx);
    }
    RemoteConfig rc;
    rc.endpoint = b.endpoint;
    rc.path = b.path;
    rc.api_key = api_key;
    rc.prompt_template = b.prompt_template;
    rc.max_attempts = b.max_attempts;
    rc.timeout = std::chrono::milliseconds(b.timeout_ms);
    auto& limiter = limiters[b.endpoint];
    if (!limiter) limiter = std::make_shared<InFlightLimiter>(b.max_in_flight);
    rc.limiter = limiter;
    return std::make_shared<RemoteBackend>(m.model, rc);
  };

  ModelPool pool;
  pool.reference = make(cfg.model(cfg.reference));
  for (const auto& m : cfg.models) {
    if (m.model.name != cfg.reference) pool.candidates.push_back(make(m));
  }
  return pool;
}

std::vector<TaskItem> load_items(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<TaskItem> items;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      TaskItem it;
      it.item_id = j.at("item_id").get<std::uint64_t>();
      it.token_count = j.value("token_count", std::uint64_t{1});
      it.payload = j.value("payload", std::string{});
      items.push_back(std::move(it));
    } catch (const json::exception& ex) {
      throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (items.empty()) throw ConfigError(path.string() + ": no items");
  return items;
}

// ---------------------------------------------------------------------------

ordered_json snapshot_to_json(const ProfileSnapshot& s) {
  ordered_json j;
  j["delta"] = s.spec.delta;
  j["gamma"] = s.spec.gamma;
  j["profiled_ratio"] = s.profiled_ratio;
  j["n_remaining"] = s.n_remaining;
  j["grid_step"] = s.grid_step;
  ordered_json profiles = ordered_json::array();
  for (const auto& p : s.profiles) {
    profiles.push_back({{"model", p.model.name},
                        {"price_per_1k_tokens", p.model.price_per_1k_tokens},
                        {"reference", p.is_reference},
                        {"n", p.n},
                        {"e", p.e},
                        {"unit_cost", p.c},
                        {"status", std::string(to_string(p.status))}});
  }
  j["profiles"] = std::move(profiles);
  return j;
}

ProfileSnapshot parse_snapshot(std::string_view text) {
  const json doc = parse_json(text);
  const Reader r(text);
  r.only(doc, "", {"delta", "gamma", "profiled_ratio", "n_remaining", "grid_step", "profiles"});
  ProfileSnapshot s;
  if (doc.contains("delta")) s.spec.delta = r.number(doc["delta"], "/delta");
  if (doc.contains("gamma")) s.spec.gamma = r.number(doc["gamma"], "/gamma");
  if (doc.contains("profiled_ratio")) s.profiled_ratio = r.number(doc["profiled_ratio"], "/profiled_ratio");
  if (doc.contains("n_remaining")) {
    s.n_remaining = static_cast<std::int64_t>(r.unsigned_int(doc["n_remaining"], "/n_remaining"));
  }
  if (doc.contains("grid_step")) s.grid_step = r.number(doc["grid_step"], "/grid_step");
  if (!doc.contains("profiles")) r.fail("/profiles", "", "missing required field");
  const json& arr = r.array(doc["profiles"], "/profiles");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ptr = "/profiles/" + std::to_string(i);
    r.only(arr[i], ptr, {"model", "price_per_1k_tokens", "reference", "n", "e", "unit_cost", "status"});
    ModelProfile p;
    p.model.name = r.string(arr[i].value("model", json()), ptr + "/model");
    if (arr[i].contains("price_per_1k_tokens")) {
      p.model.price_per_1k_tokens = r.number(arr[i]["price_per_1k_tokens"], ptr + "/price_per_1k_tokens");
    }
    if (arr[i].contains("reference")) p.is_reference = r.boolean(arr[i]["reference"], ptr + "/reference");
    p.n = static_cast<std::int64_t>(r.unsigned_int(arr[i].value("n", json()), ptr + "/n"));
    p.e = static_cast<std::int64_t>(r.unsigned_int(arr[i].value("e", json()), ptr + "/e"));
    if (p.e > p.n) r.fail(ptr + "/e", "e", "cannot exceed n");
    p.c = r.number(arr[i].value("unit_cost", json()), ptr + "/unit_cost");
    const std::string status = arr[i].contains("status") ? r.string(arr[i]["status"], ptr + "/status") : "Unknown";
    if (status == "Valid") {
      p.status = ModelStatus::Valid;
    } else if (status == "Invalid") {
      p.status = ModelStatus::Invalid;
    } else if (status == "Unknown") {
      p.status = ModelStatus::Unknown;
    } else {
      r.fail(ptr + "/status", "status", "expected Unknown, Valid or Invalid");
    }
    if (p.is_reference) p.status = ModelStatus::Valid;
    s.profiles.push_back(std::move(p));
  }
  if (std::ranges::count_if(s.profiles, &ModelProfile::is_reference) != 1) {
    r.fail("/profiles", "profiles", "exactly one profile must be the reference");
  }
  try {
    s.spec.validate();
  } catch (const DomainError& ex) {
    throw ConfigError(std::string("snapshot: ") + ex.what());
  }
  if (!(s.profiled_ratio >= 0.0 && s.profiled_ratio < 1.0)) {
    r.fail("/profiled_ratio", "profiled_ratio", "must lie in [0, 1)");
  }
  return s;
}

ProfileSnapshot load_snapshot(const std::filesystem::path& path) {
  try {
    return parse_snapshot(read_file(path));
  } catch (const ConfigError& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

}  // namespace cascade
