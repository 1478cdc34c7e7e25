#include "spotlight/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "spotlight/error.hpp"
#include "spotlight/http_backends.hpp"
#include "spotlight/mock_backends.hpp"
#include "spotlight/synthetic_backend.hpp"

namespace spotlight {

using nlohmann::json;

std::optional<std::string> process_env(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config key " + where + "." + key);
    }
}

template <class T>
void take(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + where + "." + key + " has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return (base / p).lexically_normal();
}

std::string token_from(const std::string& auth_env, const EnvLookup& env) {
    if (auth_env.empty()) return {};
    auto v = env(auth_env);
    if (!v) throw ConfigError("environment variable " + auth_env + " (auth token) is not set");
    return *v;
}

json mllm_spec(const MllmConfig& c, const std::filesystem::path& base) {
    if (!c.spec_file.empty()) {
        std::ifstream in(resolve(base, c.spec_file));
        if (!in) throw ConfigError("cannot read mllm spec file " + resolve(base, c.spec_file).string());
        try {
            return json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("mllm spec file is not valid JSON: " + std::string(e.what()));
        }
    }
    if (c.spec.is_null()) throw ConfigError("mllm kind '" + c.kind + "' needs \"spec\" or \"spec_file\"");
    return c.spec;
}

}  // namespace

AppConfig parse_app_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(doc, {"embedding", "mllm", "run", "cache_dir"}, "$");
    AppConfig c;
    c.base_dir = base_dir;
    if (doc.contains("embedding")) {
        const auto& e = doc["embedding"];
        if (!e.is_object()) throw ConfigError("$.embedding must be an object");
        reject_unknown(e, {"kind", "url", "backend_id", "dim", "auth_env", "batch", "timeout_s"}, "$.embedding");
        take(e, "kind", c.embedding.kind, "$.embedding");
        take(e, "url", c.embedding.url, "$.embedding");
        take(e, "backend_id", c.embedding.backend_id, "$.embedding");
        take(e, "dim", c.embedding.dim, "$.embedding");
        take(e, "auth_env", c.embedding.auth_env, "$.embedding");
        take(e, "batch", c.embedding.batch, "$.embedding");
        take(e, "timeout_s", c.embedding.timeout_s, "$.embedding");
    }
    if (doc.contains("mllm")) {
        const auto& m = doc["mllm"];
        if (!m.is_object()) throw ConfigError("$.mllm must be an object");
        reject_unknown(m, {"kind", "url", "path", "provider", "model_id", "auth_env", "max_concurrent", "timeout_s",
                           "supports_logits", "spec", "spec_file"},
                       "$.mllm");
        take(m, "kind", c.mllm.kind, "$.mllm");
        take(m, "url", c.mllm.url, "$.mllm");
        take(m, "path", c.mllm.path, "$.mllm");
        take(m, "provider", c.mllm.provider, "$.mllm");
        take(m, "model_id", c.mllm.model_id, "$.mllm");
        take(m, "auth_env", c.mllm.auth_env, "$.mllm");
        take(m, "max_concurrent", c.mllm.max_concurrent, "$.mllm");
        take(m, "timeout_s", c.mllm.timeout_s, "$.mllm");
        take(m, "supports_logits", c.mllm.supports_logits, "$.mllm");
        if (m.contains("spec")) c.mllm.spec = m["spec"];
        std::string spec_file;
        take(m, "spec_file", spec_file, "$.mllm");
        c.mllm.spec_file = resolve(base_dir, spec_file);
    }
    if (doc.contains("run")) c.run = run_config_from_json(doc["run"], c.run);
    if (doc.contains("cache_dir")) {
        std::string dir;
        take(doc, "cache_dir", dir, "$");
        c.cache_dir = resolve(base_dir, dir);
    }
    static const std::set<std::string> kEmbeddingKinds{"synthetic", "http"};
    static const std::set<std::string> kMllmKinds{"none", "mock", "http", "uplift_oracle", "region_mock"};
    if (!kEmbeddingKinds.count(c.embedding.kind)) throw ConfigError("unknown embedding kind '" + c.embedding.kind + "'");
    if (!kMllmKinds.count(c.mllm.kind)) throw ConfigError("unknown mllm kind '" + c.mllm.kind + "'");
    return c;
}

AppConfig load_app_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    return parse_app_config(doc, file.has_parent_path() ? file.parent_path() : std::filesystem::path("."));
}

AppConfig resolve_app_config(const std::optional<std::filesystem::path>& explicit_path, const EnvLookup& env) {
    AppConfig c;
    c.base_dir = ".";
    if (explicit_path) {
        c = load_app_config(*explicit_path);
    } else if (auto p = env("SPOTLIGHT_CONFIG")) {
        c = load_app_config(*p);
    }
    if (auto dir = env("SPOTLIGHT_CACHE_DIR")) c.cache_dir = *dir;
    if (auto seed = env("SPOTLIGHT_SEED")) {
        try {
            std::size_t used = 0;
            c.run.seed = std::stoull(*seed, &used);
            if (used != seed->size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("SPOTLIGHT_SEED must be an unsigned integer, got '" + *seed + "'");
        }
    }
    return c;
}

json to_json(const AppConfig& c) {
    json e = {{"kind", c.embedding.kind}};
    if (c.embedding.kind == "http") {
        e.update({{"url", c.embedding.url}, {"backend_id", c.embedding.backend_id}, {"dim", c.embedding.dim},
                  {"auth_env", c.embedding.auth_env}, {"batch", c.embedding.batch}, {"timeout_s", c.embedding.timeout_s}});
    }
    json m = {{"kind", c.mllm.kind}};
    if (c.mllm.kind == "http") {
        m.update({{"url", c.mllm.url}, {"path", c.mllm.path}, {"provider", c.mllm.provider},
                  {"model_id", c.mllm.model_id}, {"auth_env", c.mllm.auth_env},
                  {"max_concurrent", c.mllm.max_concurrent}, {"timeout_s", c.mllm.timeout_s},
                  {"supports_logits", c.mllm.supports_logits}});
    } else if (c.mllm.kind != "none") {
        if (!c.mllm.spec_file.empty()) m["spec_file"] = c.mllm.spec_file.generic_string();
        if (!c.mllm.spec.is_null()) m["spec"] = c.mllm.spec;
    }
    return {{"embedding", std::move(e)}, {"mllm", std::move(m)}, {"run", to_json(c.run)}};
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingConfig& c, const EnvLookup& env) {
    if (c.kind == "synthetic") return std::make_unique<SyntheticEmbeddingBackend>();
    if (c.kind == "http") {
        if (c.url.empty()) throw ConfigError("http embedding backend needs \"url\"");
        if (c.dim == 0) throw ConfigError("http embedding backend needs \"dim\"");
        HttpEmbeddingOptions o;
        o.url = c.url;
        o.backend_id = c.backend_id.empty() ? "http:" + c.url : c.backend_id;
        o.dim = c.dim;
        o.auth_token = token_from(c.auth_env, env);
        o.batch = c.batch;
        o.timeout = std::chrono::seconds(c.timeout_s);
        return std::make_unique<HttpEmbeddingBackend>(std::move(o));
    }
    throw ConfigError("unknown embedding kind '" + c.kind + "'");
}

std::unique_ptr<MllmBackend> make_mllm_backend(const MllmConfig& c, const std::filesystem::path& base_dir,
                                               const EnvLookup& env) {
    if (c.kind == "none") return nullptr;
    if (c.kind == "http") {
        if (c.url.empty()) throw ConfigError("http mllm backend needs \"url\"");
        if (c.model_id.empty()) throw ConfigError("http mllm backend needs \"model_id\"");
        HttpMllmOptions o;
        o.url = c.url;
        o.path = c.path;
        o.provider = parse_provider(c.provider);
        o.model_id = c.model_id;
        o.auth_token = token_from(c.auth_env, env);
        o.max_concurrent = c.max_concurrent;
        o.timeout = std::chrono::seconds(c.timeout_s);
        o.supports_logits = c.supports_logits;
        return std::make_unique<HttpMllmBackend>(std::move(o));
    }
    const json spec = mllm_spec(c, base_dir);
    const auto spec_base = c.spec_file.empty() ? base_dir : resolve(base_dir, c.spec_file).parent_path();
    if (c.kind == "mock") return std::make_unique<MockMllmBackend>(spec, c.model_id.empty() ? "mock" : c.model_id);
    if (c.kind == "uplift_oracle") return std::make_unique<UpliftOracleMllm>(UpliftOracleMllm::from_json(spec, spec_base));
    if (c.kind == "region_mock") {
        try {
            const auto r = spec.at("region").get<std::vector<int>>();
            if (r.size() != 4) throw ConfigError("region_mock \"region\" must be [x0,y0,x1,y1]");
            PatchRect rect{0, 0, r[0], r[1], r[2], r[3]};
            std::filesystem::path ref = spec.at("reference").get<std::string>();
            if (ref.is_relative()) ref = spec_base / ref;
            return std::make_unique<RegionSensitiveMllm>(load_image(ref), rect, spec.at("answer").get<std::string>(),
                                                         spec.value("base", 0.9), spec.value("drop", 0.5));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid region_mock spec: ") + e.what());
        } catch (const InputError& e) {
            throw ConfigError(std::string("region_mock reference: ") + e.what());
        }
    }
    throw ConfigError("unknown mllm kind '" + c.kind + "'");
}

}  // namespace spotlight
