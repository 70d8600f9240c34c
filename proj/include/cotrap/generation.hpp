#pragma once

#include "cotrap/prompt_forge.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

enum class BackendKind { Replay, HttpCompletion, Null };
const char* backend_kind_name(BackendKind kind);
std::optional<BackendKind> backend_kind_from_name(std::string_view name);

struct BackendDescriptor {
    std::string id;
    BackendKind kind = BackendKind::Null;
    // http-completion
    std::string endpoint;
    std::string model;
    std::string wire_template =
        R"({"model": "{model}", "prompt": "{prefix}", "suffix": "{suffix}"})";
    std::string response_path = "/choices/0/text"; // JSON pointer to the completion
    int max_attempts = 3;
    double backoff_seconds = 1.0; // doubled per retry
    // replay
    std::filesystem::path replay_dir;

    int max_concurrency = 4;
    double request_timeout = 30;

    void validate() const;
};

/// Fill-in-the-middle split of a prompt at its completion point. The prefix
/// ends right before that line; prefix + suffix is the prompt, byte-exact.
struct GenerationRequest {
    std::string sample_id;
    VariantKind kind = VariantKind::Blank;
    std::optional<int> offset;
    std::string prefix;
    std::string suffix;
    std::string variant_text;
    int completion_point_in_prompt = 0;
};

GenerationRequest assemble_fim(const PromptVariant& variant);

/// Key used for replay stores and generated-file names.
std::string request_key(const GenerationRequest& request);
std::string variant_key(const std::string& sample_id, VariantKind kind,
                        const std::optional<int>& offset);

struct SpliceResult {
    std::string text;
    std::optional<LineSpan> span; // absent for an empty completion
};

/// Inserts the completion's lines at the completion point. Deleting the
/// spliced span restores the prompt byte-exactly.
SpliceResult splice(const std::string& variant_text, int completion_point_in_prompt,
                    const std::string& completion);

enum class GenStatus { Ok, BackendError, Empty };
const char* gen_status_name(GenStatus status);

struct GenerationResult {
    std::string sample_id;
    VariantKind kind = VariantKind::Blank;
    std::optional<int> offset;
    std::string backend_id;
    GenStatus status = GenStatus::Empty;
    std::string completion;
    std::string spliced;
    std::optional<LineSpan> spliced_span;
    std::string diagnostics;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual const BackendDescriptor& descriptor() const = 0;
};

/// Reads completions from replay_dir/<sample>__<kind>__<offset>.txt.
/// Captured external outputs flow through the pipeline unchanged.
std::unique_ptr<Backend> make_replay_backend(BackendDescriptor descriptor);
/// Always returns an empty completion.
std::unique_ptr<Backend> make_null_backend(BackendDescriptor descriptor);
/// POSTs the wire template with {prefix}/{suffix}/{model} filled in; retries
/// transient failures with exponential backoff. COTRAP_API_KEY, when set,
/// becomes a bearer token and is never logged.
std::unique_ptr<Backend> make_http_backend(BackendDescriptor descriptor);
std::unique_ptr<Backend> make_backend(BackendDescriptor descriptor);

/// Runs all requests through the backend with at most max_concurrency in
/// flight. Results come back in input order regardless of completion order.
std::vector<GenerationResult> run_generation(std::span<const GenerationRequest> requests,
                                             Backend& backend);

} // namespace cotrap
