#include "cotrap/generation.hpp"

#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;

namespace cotrap {

const char* backend_kind_name(BackendKind kind) {
    switch (kind) {
    case BackendKind::Replay: return "replay";
    case BackendKind::HttpCompletion: return "http-completion";
    case BackendKind::Null: return "null";
    }
    return "null";
}

std::optional<BackendKind> backend_kind_from_name(std::string_view name) {
    if (name == "replay") return BackendKind::Replay;
    if (name == "http-completion") return BackendKind::HttpCompletion;
    if (name == "null") return BackendKind::Null;
    return std::nullopt;
}

void BackendDescriptor::validate() const {
    if (id.empty())
        throw Error("backend id must be non-empty");
    if (max_concurrency < 1)
        throw Error("backend max_concurrency must be positive");
    if (kind == BackendKind::HttpCompletion && (endpoint.empty() || model.empty()))
        throw Error("http-completion backend '" + id + "' needs endpoint and model");
    if (kind == BackendKind::Replay && replay_dir.empty())
        throw Error("replay backend '" + id + "' needs a completions directory");
}

GenerationRequest assemble_fim(const PromptVariant& variant) {
    GenerationRequest request;
    request.sample_id = variant.sample_id;
    request.kind = variant.kind;
    request.offset = variant.offset;
    request.variant_text = variant.text;
    request.completion_point_in_prompt = variant.completion_point_in_prompt;

    // The prefix ends after the (completion_point - 1)-th newline.
    const std::string& text = variant.text;
    int newlines_needed = variant.completion_point_in_prompt - 1;
    std::size_t boundary = 0;
    if (newlines_needed > 0) {
        int seen = 0;
        std::size_t pos = 0;
        while (pos < text.size() && seen < newlines_needed) {
            if (text[pos] == '\n')
                ++seen;
            ++pos;
        }
        boundary = pos; // text end when fewer newlines exist
    }
    request.prefix = text.substr(0, boundary);
    request.suffix = text.substr(boundary);
    return request;
}

std::string variant_key(const std::string& sample_id, VariantKind kind,
                        const std::optional<int>& offset) {
    std::string key = sample_id;
    key += "__";
    key += variant_kind_name(kind);
    key += "__";
    key += offset ? offset_label(*offset) : "blank";
    return key;
}

std::string request_key(const GenerationRequest& request) {
    return variant_key(request.sample_id, request.kind, request.offset);
}

SpliceResult splice(const std::string& variant_text, int completion_point_in_prompt,
                    const std::string& completion) {
    SpliceResult result;
    if (completion.empty()) {
        result.text = variant_text;
        return result;
    }
    Lines prompt = split_lines(variant_text);
    Lines generated = split_lines(completion);
    int at = completion_point_in_prompt;
    int count = static_cast<int>(generated.lines.size());

    Lines out;
    out.trailing_newline = prompt.trailing_newline;
    int n = static_cast<int>(prompt.lines.size());
    for (int i = 1; i <= n + 1; ++i) {
        if (i == at)
            for (const std::string& g : generated.lines)
                out.lines.push_back(g);
        if (i <= n)
            out.lines.push_back(prompt.lines[static_cast<std::size_t>(i - 1)]);
    }
    if (at > n + 1)
        for (const std::string& g : generated.lines)
            out.lines.push_back(g);
    result.text = join_lines(out);
    result.span = LineSpan{at, at + count - 1};
    return result;
}

const char* gen_status_name(GenStatus status) {
    switch (status) {
    case GenStatus::Ok: return "ok";
    case GenStatus::BackendError: return "backend_error";
    case GenStatus::Empty: return "empty";
    }
    return "empty";
}

namespace {

GenerationResult base_result(const GenerationRequest& request, const BackendDescriptor& desc) {
    GenerationResult result;
    result.sample_id = request.sample_id;
    result.kind = request.kind;
    result.offset = request.offset;
    result.backend_id = desc.id;
    return result;
}

void finish_with_completion(GenerationResult& result, const GenerationRequest& request,
                            std::string completion) {
    result.completion = std::move(completion);
    if (result.completion.empty()) {
        result.status = GenStatus::Empty;
        result.spliced = request.variant_text;
        return;
    }
    SpliceResult spliced =
        splice(request.variant_text, request.completion_point_in_prompt, result.completion);
    result.status = GenStatus::Ok;
    result.spliced = std::move(spliced.text);
    result.spliced_span = spliced.span;
}

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(BackendDescriptor desc) : desc_(std::move(desc)) {}

    GenerationResult generate(const GenerationRequest& request) override {
        GenerationResult result = base_result(request, desc_);
        fs::path path = desc_.replay_dir / (request_key(request) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            result.status = GenStatus::BackendError;
            result.diagnostics = "no replay entry: " + path.string();
            result.spliced = request.variant_text;
            return result;
        }
        std::string completion((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        finish_with_completion(result, request, std::move(completion));
        return result;
    }

    const BackendDescriptor& descriptor() const override { return desc_; }

private:
    BackendDescriptor desc_;
};

class NullBackend final : public Backend {
public:
    explicit NullBackend(BackendDescriptor desc) : desc_(std::move(desc)) {}

    GenerationResult generate(const GenerationRequest& request) override {
        GenerationResult result = base_result(request, desc_);
        result.status = GenStatus::Empty;
        result.spliced = request.variant_text;
        return result;
    }

    const BackendDescriptor& descriptor() const override { return desc_; }

private:
    BackendDescriptor desc_;
};

std::string json_escape(const std::string& text) {
    std::string dumped = nlohmann::json(text).dump();
    return dumped.substr(1, dumped.size() - 2); // strip the quotes
}

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendDescriptor desc) : desc_(std::move(desc)) {
        const char* key = std::getenv("COTRAP_API_KEY");
        if (key)
            api_key_ = key;
    }

    GenerationResult generate(const GenerationRequest& request) override {
        GenerationResult result = base_result(request, desc_);
        std::string body = desc_.wire_template;
        auto substitute = [&](std::string_view placeholder, const std::string& value) {
            std::size_t pos;
            while ((pos = body.find(placeholder)) != std::string::npos)
                body.replace(pos, placeholder.size(), value);
        };
        substitute("{model}", json_escape(desc_.model));
        substitute("{prefix}", json_escape(request.prefix));
        substitute("{suffix}", json_escape(request.suffix));

        std::string diagnostics;
        double backoff = desc_.backoff_seconds;
        for (int attempt = 1; attempt <= desc_.max_attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2;
            }
            auto outcome = post_once(body);
            if (outcome.completion) {
                finish_with_completion(result, request, std::move(*outcome.completion));
                return result;
            }
            diagnostics = outcome.error;
            if (!outcome.transient)
                break;
        }
        result.status = GenStatus::BackendError;
        result.diagnostics = diagnostics;
        result.spliced = request.variant_text;
        return result;
    }

    const BackendDescriptor& descriptor() const override { return desc_; }

private:
    struct PostOutcome {
        std::optional<std::string> completion;
        std::string error;
        bool transient = false;
    };

    PostOutcome post_once(const std::string& body) {
        // endpoint = scheme://host[:port]/path
        std::string url = desc_.endpoint;
        std::string scheme_host = url;
        std::string path = "/";
        std::size_t scheme = url.find("://");
        std::size_t slash = scheme == std::string::npos ? url.find('/')
                                                        : url.find('/', scheme + 3);
        if (slash != std::string::npos) {
            scheme_host = url.substr(0, slash);
            path = url.substr(slash);
        }
        httplib::Client client(scheme_host);
        client.set_connection_timeout(std::chrono::duration<double>(desc_.request_timeout));
        client.set_read_timeout(std::chrono::duration<double>(desc_.request_timeout));
        httplib::Headers headers;
        if (!api_key_.empty())
            headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            PostOutcome out;
            out.error = "connection failed: " + httplib::to_string(res.error());
            out.transient = true;
            return out;
        }
        if (res->status == 429 || res->status >= 500) {
            PostOutcome out;
            out.error = "HTTP " + std::to_string(res->status);
            out.transient = true;
            return out;
        }
        if (res->status != 200) {
            PostOutcome out;
            out.error = "HTTP " + std::to_string(res->status);
            return out;
        }
        try {
            nlohmann::json response = nlohmann::json::parse(res->body);
            nlohmann::json value = response.at(nlohmann::json::json_pointer(desc_.response_path));
            if (!value.is_string()) {
                PostOutcome out;
                out.error = "completion at " + desc_.response_path + " is not a string";
                return out;
            }
            PostOutcome out;
            out.completion = value.get<std::string>();
            return out;
        } catch (const nlohmann::json::exception& e) {
            PostOutcome out;
            out.error = std::string("cannot extract completion: ") + e.what();
            return out;
        }
    }

    BackendDescriptor desc_;
    std::string api_key_;
};

} // namespace

std::unique_ptr<Backend> make_replay_backend(BackendDescriptor descriptor) {
    descriptor.kind = BackendKind::Replay;
    descriptor.validate();
    return std::make_unique<ReplayBackend>(std::move(descriptor));
}

std::unique_ptr<Backend> make_null_backend(BackendDescriptor descriptor) {
    descriptor.kind = BackendKind::Null;
    descriptor.validate();
    return std::make_unique<NullBackend>(std::move(descriptor));
}

std::unique_ptr<Backend> make_http_backend(BackendDescriptor descriptor) {
    descriptor.kind = BackendKind::HttpCompletion;
    descriptor.validate();
    return std::make_unique<HttpBackend>(std::move(descriptor));
}

std::unique_ptr<Backend> make_backend(BackendDescriptor descriptor) {
    switch (descriptor.kind) {
    case BackendKind::Replay:
        return make_replay_backend(std::move(descriptor));
    case BackendKind::HttpCompletion:
        return make_http_backend(std::move(descriptor));
    case BackendKind::Null:
        return make_null_backend(std::move(descriptor));
    }
    throw Error("unknown backend kind");
}

std::vector<GenerationResult> run_generation(std::span<const GenerationRequest> requests,
                                             Backend& backend) {
    std::size_t workers = static_cast<std::size_t>(
        std::max(1, std::min(backend.descriptor().max_concurrency,
                             static_cast<int>(requests.size()))));
    std::vector<GenerationResult> results(requests.size());
    if (requests.empty())
        return results;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t index = next.fetch_add(1);
            if (index >= requests.size())
                return;
            results[index] = backend.generate(requests[index]);
        }
    };
    // Index-ordered result slots keep emission deterministic regardless of
    // which worker finishes first.
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i)
        pool.emplace_back(worker);
    for (std::thread& t : pool)
        t.join();
    return results;
}

} // namespace cotrap
