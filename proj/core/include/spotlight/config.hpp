#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "spotlight/harness.hpp"

namespace spotlight {

struct EmbeddingConfig {
    std::string kind = "synthetic";  // synthetic | http
    std::string url;
    std::string backend_id;
    std::size_t dim = 0;
    std::string auth_env;  // name of the environment variable holding the bearer token
    std::size_t batch = 16;
    int timeout_s = 60;
};

struct MllmConfig {
    std::string kind = "none";  // none | mock | http | uplift_oracle | region_mock
    // http
    std::string url;
    std::string path;
    std::string provider = "openai_chat";
    std::string model_id;
    std::string auth_env;
    int max_concurrent = 4;
    int timeout_s = 120;
    bool supports_logits = false;
    // mock / uplift_oracle / region_mock: inline spec or a file holding it
    nlohmann::json spec;
    std::filesystem::path spec_file;
};

struct AppConfig {
    EmbeddingConfig embedding;
    MllmConfig mllm;
    RunConfig run;
    std::filesystem::path cache_dir;  // empty: caching disabled
    std::filesystem::path base_dir;   // relative paths in the file resolve against this
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// {"embedding": {...}, "mllm": {...}, "run": {...}, "cache_dir": "..."}. Unknown keys are
/// rejected with ConfigError.
AppConfig parse_app_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& file);

/// Config file named by `explicit_path`, else $SPOTLIGHT_CONFIG, else defaults; then
/// SPOTLIGHT_CACHE_DIR and SPOTLIGHT_SEED override the file. Flags are applied by the caller.
AppConfig resolve_app_config(const std::optional<std::filesystem::path>& explicit_path, const EnvLookup& env = process_env);

nlohmann::json to_json(const AppConfig& c);

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingConfig& c, const EnvLookup& env = process_env);

/// nullptr when kind is "none".
std::unique_ptr<MllmBackend> make_mllm_backend(const MllmConfig& c, const std::filesystem::path& base_dir,
                                               const EnvLookup& env = process_env);

}  // namespace spotlight
