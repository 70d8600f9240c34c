#include "cotrap/config.hpp"

#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace cotrap {

namespace toml {

namespace {

[[noreturn]] void bad(int line, const std::string& message) {
    throw Error("config line " + std::to_string(line) + ": " + message);
}

std::string parse_basic_string(std::string_view raw, int line) {
    // raw includes the surrounding quotes
    if (raw.size() < 2)
        bad(line, "unterminated string");
    char quote = raw.front();
    std::string out;
    for (std::size_t i = 1; i + 1 <= raw.size() - 1; ++i) {
        char c = raw[i];
        if (quote == '"' && c == '\\') {
            if (i + 1 >= raw.size() - 1)
                bad(line, "dangling escape in string");
            char esc = raw[++i];
            switch (esc) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '\\': out += '\\'; break;
            case '"': out += '"'; break;
            default: bad(line, std::string("unsupported escape \\") + esc);
            }
        } else {
            out += c;
        }
    }
    return out;
}

// Splits a value list "a, b, c" at top level (no nested arrays supported).
std::vector<std::string> split_array_items(std::string_view body, int line) {
    std::vector<std::string> items;
    std::string current;
    bool in_string = false;
    char quote = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (in_string) {
            current += c;
            if (c == '\\' && quote == '"' && i + 1 < body.size())
                current += body[++i];
            else if (c == quote)
                in_string = false;
            continue;
        }
        if (c == '"' || c == '\'') {
            in_string = true;
            quote = c;
            current += c;
            continue;
        }
        if (c == '[')
            bad(line, "nested arrays are not supported");
        if (c == ',') {
            items.push_back(current);
            current.clear();
            continue;
        }
        current += c;
    }
    if (in_string)
        bad(line, "unterminated string in array");
    if (!trim(current).empty() || !items.empty())
        items.push_back(current);
    // drop a trailing empty item from a trailing comma
    while (!items.empty() && trim(items.back()).empty())
        items.pop_back();
    return items;
}

Value parse_scalar(std::string_view raw, int line) {
    std::string_view v = trim(raw);
    if (v.empty())
        bad(line, "missing value");
    if (v.front() == '"' || v.front() == '\'') {
        if (v.size() < 2 || v.back() != v.front())
            bad(line, "unterminated string");
        return parse_basic_string(v, line);
    }
    if (v == "true")
        return true;
    if (v == "false")
        return false;
    std::string s(v);
    if (v.find_first_of(".eE") != std::string_view::npos &&
        v.find_first_not_of("+-0123456789.eE_") == std::string_view::npos) {
        try {
            return std::stod(s);
        } catch (...) {
            bad(line, "malformed float: " + s);
        }
    }
    if (v.find_first_not_of("+-0123456789_") == std::string_view::npos) {
        try {
            return static_cast<std::int64_t>(std::stoll(s));
        } catch (...) {
            bad(line, "malformed integer: " + s);
        }
    }
    bad(line, "unrecognized value: " + s);
}

} // namespace

std::map<std::string, Value> parse(std::string_view text) {
    std::map<std::string, Value> out;
    std::string section;
    Lines lines = split_lines(text);
    for (std::size_t i = 0; i < lines.lines.size(); ++i) {
        int line_no = static_cast<int>(i) + 1;
        std::string_view line = lines.lines[i];
        // strip comments outside strings
        std::string stripped;
        bool in_string = false;
        char quote = 0;
        for (std::size_t j = 0; j < line.size(); ++j) {
            char c = line[j];
            if (in_string) {
                stripped += c;
                if (c == '\\' && quote == '"' && j + 1 < line.size())
                    stripped += line[++j];
                else if (c == quote)
                    in_string = false;
                continue;
            }
            if (c == '#')
                break;
            if (c == '"' || c == '\'') {
                in_string = true;
                quote = c;
            }
            stripped += c;
        }
        std::string_view body = trim(stripped);
        if (body.empty())
            continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                bad(line_no, "malformed table header");
            std::string_view name = trim(body.substr(1, body.size() - 2));
            if (name.empty())
                bad(line_no, "empty table name");
            section = std::string(name);
            continue;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string_view::npos)
            bad(line_no, "expected key = value");
        std::string key(trim(body.substr(0, eq)));
        std::string_view value = trim(body.substr(eq + 1));
        if (key.empty())
            bad(line_no, "empty key");
        std::string full_key = section.empty() ? key : section + "." + key;
        if (out.count(full_key))
            bad(line_no, "duplicate key: " + full_key);

        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                bad(line_no, "arrays must close on the same line");
            std::vector<std::string> items =
                split_array_items(value.substr(1, value.size() - 2), line_no);
            std::vector<std::string> strings;
            std::vector<std::int64_t> ints;
            bool all_strings = true, all_ints = true;
            for (const std::string& item : items) {
                Value v = parse_scalar(item, line_no);
                if (std::holds_alternative<std::string>(v))
                    strings.push_back(std::get<std::string>(v));
                else
                    all_strings = false;
                if (std::holds_alternative<std::int64_t>(v))
                    ints.push_back(std::get<std::int64_t>(v));
                else
                    all_ints = false;
            }
            if (all_strings)
                out[full_key] = strings;
            else if (all_ints)
                out[full_key] = ints;
            else
                bad(line_no, "arrays must hold strings or integers uniformly");
            continue;
        }
        out[full_key] = parse_scalar(value, line_no);
    }
    return out;
}

} // namespace toml

namespace {

class ConfigReader {
public:
    ConfigReader(std::map<std::string, toml::Value> values, fs::path base)
        : values_(std::move(values)), base_(std::move(base)) {}

    std::optional<std::string> string_at(const std::string& key) {
        auto v = take(key);
        if (!v)
            return std::nullopt;
        if (auto* s = std::get_if<std::string>(&*v))
            return *s;
        throw Error("config key '" + key + "' must be a string");
    }

    std::optional<std::int64_t> int_at(const std::string& key) {
        auto v = take(key);
        if (!v)
            return std::nullopt;
        if (auto* i = std::get_if<std::int64_t>(&*v))
            return *i;
        throw Error("config key '" + key + "' must be an integer");
    }

    std::optional<double> double_at(const std::string& key) {
        auto v = take(key);
        if (!v)
            return std::nullopt;
        if (auto* d = std::get_if<double>(&*v))
            return *d;
        if (auto* i = std::get_if<std::int64_t>(&*v))
            return static_cast<double>(*i);
        throw Error("config key '" + key + "' must be a number");
    }

    std::optional<std::vector<std::string>> strings_at(const std::string& key) {
        auto v = take(key);
        if (!v)
            return std::nullopt;
        if (auto* a = std::get_if<std::vector<std::string>>(&*v))
            return *a;
        throw Error("config key '" + key + "' must be an array of strings");
    }

    fs::path resolve(const std::string& raw) const {
        fs::path p(raw);
        return p.is_absolute() ? p : base_ / p;
    }

    std::vector<std::string> backend_ids() const {
        std::set<std::string> ids;
        for (const auto& [key, value] : values_) {
            if (starts_with(key, "backend.")) {
                std::string rest = key.substr(8);
                std::size_t dot = rest.find('.');
                if (dot == std::string::npos)
                    throw Error("config key '" + key + "' is not inside a backend table");
                ids.insert(rest.substr(0, dot));
            }
        }
        return {ids.begin(), ids.end()};
    }

    void reject_unknown() const {
        if (values_.empty())
            return;
        std::string keys;
        for (const auto& [key, value] : values_)
            keys += (keys.empty() ? "" : ", ") + key;
        throw Error("unknown config keys: " + keys);
    }

private:
    std::optional<toml::Value> take(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end())
            return std::nullopt;
        toml::Value v = std::move(it->second);
        values_.erase(it);
        return v;
    }

    std::map<std::string, toml::Value> values_;
    fs::path base_;
};

} // namespace

ToolkitConfig ToolkitConfig::from_text(std::string_view text, const fs::path& base_dir) {
    ConfigReader reader(toml::parse(text), base_dir);
    ToolkitConfig config;

    if (auto v = reader.int_at("seed"))
        config.seed = static_cast<std::uint64_t>(*v);
    if (auto v = reader.string_at("output_root"))
        config.output_root = reader.resolve(*v);

    if (auto v = reader.string_at("corpus.root"))
        config.corpus_root = reader.resolve(*v);
    if (auto v = reader.strings_at("corpus.include"))
        config.corpus_filter.include_globs = *v;
    if (auto v = reader.strings_at("corpus.exclude"))
        config.corpus_filter.exclude_globs = *v;
    if (auto v = reader.int_at("corpus.min_bytes"))
        config.corpus_filter.min_bytes = static_cast<std::uint64_t>(*v);
    if (auto v = reader.int_at("corpus.max_bytes"))
        config.corpus_filter.max_bytes = static_cast<std::uint64_t>(*v);

    if (auto v = reader.string_at("scanner.command_template"))
        config.scanner.command_template = *v;
    if (auto v = reader.string_at("scanner.ruleset_id"))
        config.scanner.ruleset_id = *v;
    if (auto v = reader.double_at("scanner.timeout_seconds"))
        config.scanner.timeout_seconds = *v;

    if (auto v = reader.int_at("dataset.sample_count"))
        config.sample_count = static_cast<std::size_t>(*v);
    if (auto v = reader.int_at("dataset.max_findings_per_file"))
        config.clean.max_findings_per_file = static_cast<int>(*v);

    if (auto v = reader.strings_at("forge.kinds")) {
        config.kinds.clear();
        for (const std::string& name : *v) {
            auto kind = variant_kind_from_name(name);
            if (!kind)
                throw Error("unknown variant kind in config: " + name);
            config.kinds.push_back(*kind);
        }
    }
    if (auto v = reader.strings_at("forge.offsets")) {
        config.forge.offsets.clear();
        for (const std::string& label : *v) {
            auto offset = offset_from_label(label);
            if (!offset)
                throw Error("unknown offset label in config: " + label);
            config.forge.offsets.push_back(*offset);
        }
    }
    if (auto v = reader.strings_at("forge.instructed_offsets")) {
        config.forge.instructed_offsets.clear();
        for (const std::string& label : *v) {
            auto offset = offset_from_label(label);
            if (!offset)
                throw Error("unknown offset label in config: " + label);
            config.forge.instructed_offsets.push_back(*offset);
        }
    }
    if (auto v = reader.double_at("forge.truncate_fraction"))
        config.forge.truncate_fraction = *v;
    if (auto v = reader.string_at("forge.tag"))
        config.forge.tag = *v;
    if (auto v = reader.string_at("forge.instruction"))
        config.forge.instruction = *v;
    if (auto v = reader.string_at("forge.instruction_placement")) {
        if (*v == "top")
            config.forge.placement = InstructionPlacement::Top;
        else if (*v == "above-block")
            config.forge.placement = InstructionPlacement::AboveBlock;
        else
            throw Error("instruction_placement must be 'top' or 'above-block'");
    }
    if (auto v = reader.string_at("forge.pool"))
        config.pool_path = reader.resolve(*v);

    if (auto v = reader.double_at("match.similarity_threshold"))
        config.position_stats.similarity_threshold = *v;
    if (auto v = reader.int_at("match.empty_splice_window"))
        config.reintroduction.empty_splice_window = static_cast<int>(*v);

    for (const std::string& id : reader.backend_ids()) {
        BackendDescriptor backend;
        backend.id = id;
        std::string prefix = "backend." + id + ".";
        auto kind_name = reader.string_at(prefix + "kind");
        if (!kind_name)
            throw Error("backend '" + id + "' needs a kind");
        auto kind = backend_kind_from_name(*kind_name);
        if (!kind)
            throw Error("backend '" + id + "' has unknown kind: " + *kind_name);
        backend.kind = *kind;
        if (auto v = reader.string_at(prefix + "endpoint"))
            backend.endpoint = *v;
        if (auto v = reader.string_at(prefix + "model"))
            backend.model = *v;
        if (auto v = reader.string_at(prefix + "wire_template"))
            backend.wire_template = *v;
        if (auto v = reader.string_at(prefix + "response_path"))
            backend.response_path = *v;
        if (auto v = reader.int_at(prefix + "max_attempts"))
            backend.max_attempts = static_cast<int>(*v);
        if (auto v = reader.double_at(prefix + "backoff_seconds"))
            backend.backoff_seconds = *v;
        if (auto v = reader.string_at(prefix + "replay_dir"))
            backend.replay_dir = reader.resolve(*v);
        if (auto v = reader.int_at(prefix + "max_concurrency"))
            backend.max_concurrency = static_cast<int>(*v);
        if (auto v = reader.double_at(prefix + "request_timeout"))
            backend.request_timeout = *v;
        backend.validate();
        config.backends.push_back(std::move(backend));
    }

    reader.reject_unknown();
    if (!config.scanner.command_template.empty())
        config.scanner.validate();
    return config;
}

ToolkitConfig ToolkitConfig::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str(), path.parent_path().empty() ? fs::path(".")
                                                           : path.parent_path());
}

} // namespace cotrap
