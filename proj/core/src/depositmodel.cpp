#include "lithoquery/depositmodel.hpp"

#include "lithoquery/io.hpp"

#include "http_url.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace lithoquery::depositmodel {

using Json = nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& canonical_headings() {
    static const std::vector<std::string> headings{
        "Synonyms",  "Commodities", "Description",          "Rock types",         "Textures",
        "Age range", "Depositional environment", "Tectonic setting", "Alteration", "Ore controls"};
    return headings;
}

std::optional<std::string> canonical_heading(std::string_view heading) {
    const auto key = lower(trim(heading));
    for (const auto& h : canonical_headings())
        if (lower(h) == key) return h;
    return std::nullopt;
}

const std::string* DepositModel::characteristic(std::string_view heading) const {
    for (const auto& [h, v] : characteristics)
        if (h == heading) return &v;
    const auto key = lower(heading);
    for (const auto& [h, v] : characteristics)
        if (lower(h) == key) return &v;
    return nullptr;
}

const char* to_string(DiagnosticKind k) noexcept {
    switch (k) {
        case DiagnosticKind::missing_heading: return "missing_heading";
        case DiagnosticKind::empty_value: return "empty_value";
        case DiagnosticKind::over_length: return "over_length";
        case DiagnosticKind::extra_heading: return "extra_heading";
        case DiagnosticKind::duplicate_heading: return "duplicate_heading";
    }
    return "unknown";
}

std::vector<Diagnostic> validate_model(const DepositModel& model) {
    std::vector<Diagnostic> out;
    std::set<std::string> seen;
    for (const auto& [heading, value] : model.characteristics) {
        if (!seen.insert(heading).second) {
            out.push_back({DiagnosticKind::duplicate_heading, heading, "heading '" + heading + "' appears twice"});
            continue;
        }
        if (!canonical_heading(heading) || *canonical_heading(heading) != heading)
            out.push_back({DiagnosticKind::extra_heading, heading, "'" + heading + "' is not a canonical heading"});
        if (trim(value).empty())
            out.push_back({DiagnosticKind::empty_value, heading, "'" + heading + "' has an empty value"});
        else if (value.size() > kMaxCharacteristicLength)
            out.push_back({DiagnosticKind::over_length, heading,
                           "'" + heading + "' has " + std::to_string(value.size()) + " characters, limit is " +
                               std::to_string(kMaxCharacteristicLength)});
    }
    for (const auto& h : canonical_headings())
        if (!seen.count(h)) out.push_back({DiagnosticKind::missing_heading, h, "missing heading '" + h + "'"});
    return out;
}

std::string slug(std::string_view deposit_type) {
    std::string out;
    bool dash = false;
    for (char ch : deposit_type) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (dash && !out.empty()) out.push_back('-');
            out.push_back(static_cast<char>(std::tolower(c)));
            dash = false;
        } else {
            dash = true;
        }
    }
    if (out.empty()) throw Error(ErrorCode::input, "deposit type '" + std::string(deposit_type) + "' has no usable name");
    return out;
}

DepositModel parse_model(std::string_view json_text, const std::string& source) {
    // Track keys per open object so repeated headings are caught before the
    // parser silently keeps the last one.
    std::vector<std::set<std::string>> open_keys;
    std::optional<std::string> duplicate;
    Json::parser_callback_t cb = [&](int, Json::parse_event_t event, Json& parsed) {
        switch (event) {
            case Json::parse_event_t::object_start: open_keys.emplace_back(); break;
            case Json::parse_event_t::object_end:
                if (!open_keys.empty()) open_keys.pop_back();
                break;
            case Json::parse_event_t::key:
                if (!open_keys.empty() && !open_keys.back().insert(parsed.get<std::string>()).second && !duplicate)
                    duplicate = parsed.get<std::string>();
                break;
            default: break;
        }
        return true;
    };

    Json doc;
    try {
        doc = Json::parse(json_text.begin(), json_text.end(), cb);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::parse, source + ": invalid JSON at byte " + std::to_string(e.byte));
    }
    if (duplicate) throw Error(ErrorCode::parse, source + ": duplicate key '" + *duplicate + "'");
    if (!doc.is_object()) throw Error(ErrorCode::parse, source + ": model must be a JSON object");
    if (!doc.contains("deposit_type") || !doc["deposit_type"].is_string() ||
        trim(doc["deposit_type"].get<std::string>()).empty())
        throw Error(ErrorCode::parse, source + ": missing deposit_type");
    if (!doc.contains("characteristics") || !doc["characteristics"].is_object())
        throw Error(ErrorCode::parse, source + ": characteristics must be an object");

    DepositModel model;
    model.deposit_type = doc["deposit_type"].get<std::string>();
    for (const auto& [heading, value] : doc["characteristics"].items()) {
        if (!value.is_string())
            throw Error(ErrorCode::parse, source + ": characteristic '" + heading + "' must be text");
        model.characteristics.emplace_back(heading, value.get<std::string>());
    }
    if (doc.contains("source_docs")) {
        if (!doc["source_docs"].is_array()) throw Error(ErrorCode::parse, source + ": source_docs must be a list");
        for (const auto& s : doc["source_docs"]) {
            if (!s.is_string()) throw Error(ErrorCode::parse, source + ": source_docs entries must be text");
            model.source_docs.push_back(s.get<std::string>());
        }
    }
    if (doc.contains("edited")) {
        if (!doc["edited"].is_boolean()) throw Error(ErrorCode::parse, source + ": edited must be a boolean");
        model.edited = doc["edited"].get<bool>();
    }
    return model;
}

std::string serialize_model(const DepositModel& model) {
    Json doc;
    doc["deposit_type"] = model.deposit_type;
    doc["characteristics"] = Json::object();
    for (const auto& [h, v] : model.characteristics) doc["characteristics"][h] = v;
    doc["source_docs"] = model.source_docs;
    doc["edited"] = model.edited;
    return doc.dump(2) + "\n";
}

LoadReport load_models(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw Error(ErrorCode::input, "no such file or directory: " + path.string());
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            const auto name = entry.path().filename().string();
            // Versioned sidecars are history, not live models.
            if (entry.is_regular_file() && entry.path().extension() == ".json" &&
                name.find(".v") == std::string::npos)
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }

    LoadReport report;
    std::set<std::string> types;
    for (const auto& f : files) {
        try {
            auto model = parse_model(io::read_text(f), f.string());
            if (!types.insert(slug(model.deposit_type)).second) {
                report.rejected.push_back(f.string() + ": deposit type '" + model.deposit_type + "' already loaded");
                continue;
            }
            auto diags = validate_model(model);
            if (!diags.empty()) report.warnings.emplace_back(model.deposit_type, std::move(diags));
            report.models.push_back(std::move(model));
        } catch (const Error& e) {
            report.rejected.push_back(e.what());
        }
    }
    if (report.models.empty()) {
        std::string msg = "no valid deposit models in " + path.string();
        if (!report.rejected.empty()) msg += " (" + report.rejected.front() + ")";
        throw Error(ErrorCode::ingest, msg);
    }
    return report;
}

void save_model(const std::filesystem::path& path, const DepositModel& model) {
    io::write_atomic(path, serialize_model(model));
}

ModelStore::ModelStore(std::filesystem::path root, std::vector<std::filesystem::path> seeds)
    : root_(std::move(root)), seeds_(std::move(seeds)) {}

std::optional<DepositModel> ModelStore::read(const std::filesystem::path& file) const {
    if (!std::filesystem::exists(file)) return std::nullopt;
    return parse_model(io::read_text(file), file.string());
}

std::optional<DepositModel> ModelStore::get(std::string_view deposit_type) const {
    const auto name = slug(deposit_type) + ".json";
    {
        std::shared_lock lock(mutex_);
        if (auto m = read(root_ / name)) return m;
    }
    for (const auto& seed : seeds_)
        if (auto m = read(seed / name)) return m;
    return std::nullopt;
}

std::vector<std::string> ModelStore::list() const {
    std::set<std::string> names;
    auto scan = [&](const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) return;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (entry.path().extension() != ".json" || name.find(".v") != std::string::npos) continue;
            try {
                names.insert(parse_model(io::read_text(entry.path()), name).deposit_type);
            } catch (const Error&) {
            }
        }
    };
    {
        std::shared_lock lock(mutex_);
        scan(root_);
    }
    for (const auto& s : seeds_) scan(s);
    return {names.begin(), names.end()};
}

std::mutex& ModelStore::write_lock(const std::string& key) {
    std::lock_guard lock(locks_mutex_);
    auto& m = write_locks_[key];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

std::vector<std::filesystem::path> ModelStore::versions(std::string_view deposit_type) const {
    const auto base = slug(deposit_type);
    std::vector<std::pair<int, std::filesystem::path>> found;
    std::shared_lock lock(mutex_);
    if (!std::filesystem::is_directory(root_)) return {};
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        const auto name = entry.path().filename().string();
        const auto prefix = base + ".v";
        if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".json") continue;
        const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - 5);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
        found.emplace_back(std::stoi(digits), entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<std::filesystem::path> out;
    for (auto& f : found) out.push_back(std::move(f.second));
    return out;
}

DepositModel ModelStore::put(DepositModel model) {
    const auto base = slug(model.deposit_type);
    std::lock_guard serial(write_lock(base));
    model.edited = true;
    const auto previous = get(model.deposit_type);
    const auto n = versions(model.deposit_type).size() + 1;
    std::unique_lock lock(mutex_);
    if (previous) save_model(root_ / (base + ".v" + std::to_string(n) + ".json"), *previous);
    save_model(root_ / (base + ".json"), model);
    return model;
}

RemoteLlmProvider::RemoteLlmProvider(std::string endpoint, int timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty()) throw Error(ErrorCode::config, "LLM provider needs an endpoint");
}

std::string RemoteLlmProvider::complete(const std::string& prompt) {
    const auto target = detail::split_url(endpoint_);
    httplib::Client client(target.origin);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    auto res = client.Post(target.base_path + "/complete", Json{{"prompt", prompt}}.dump(), "application/json");
    if (!res) throw Error(ErrorCode::provider, "request to " + endpoint_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::provider, endpoint_ + " answered HTTP " + std::to_string(res->status));
    Json reply;
    try {
        reply = Json::parse(res->body);
    } catch (const Json::exception&) {
        throw Error(ErrorCode::provider, endpoint_ + " returned a non-JSON body");
    }
    if (!reply.is_object() || !reply.contains("completion") || !reply["completion"].is_string())
        throw Error(ErrorCode::provider, endpoint_ + " reply lacks a completion");
    return reply["completion"].get<std::string>();
}

CompletionParseError::CompletionParseError(std::string message, std::string completion)
    : Error(ErrorCode::parse, std::move(message)), completion_(std::move(completion)) {}

std::string instantiate_template(std::string_view prompt_template, std::string_view deposit_type,
                                 std::string_view document) {
    std::string headings;
    for (const auto& h : canonical_headings()) headings += h + "\n";
    if (!headings.empty()) headings.pop_back();
    const std::pair<std::string_view, std::string_view> subs[] = {
        {"{{deposit_type}}", deposit_type}, {"{{document}}", document}, {"{{headings}}", headings}};
    for (const auto& [ph, _] : subs)
        if (prompt_template.find(ph) == std::string_view::npos)
            throw Error(ErrorCode::input, "prompt template lacks the " + std::string(ph) + " placeholder");

    // Single left-to-right pass so substituted text is never rescanned.
    std::string out;
    std::size_t i = 0;
    while (i < prompt_template.size()) {
        bool replaced = false;
        for (const auto& [ph, value] : subs) {
            if (prompt_template.substr(i, ph.size()) == ph) {
                out += value;
                i += ph.size();
                replaced = true;
                break;
            }
        }
        if (!replaced) out.push_back(prompt_template[i++]);
    }
    return out;
}

namespace {

std::string strip_markup(std::string s) {
    s = trim(s);
    for (std::string_view lead : {"- ", "* ", "• "})
        if (s.rfind(lead, 0) == 0) s = trim(s.substr(lead.size()));
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.compare(i, 2, "**") == 0) {
            ++i;
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

bool plausible_label(std::string_view label) {
    if (label.empty() || label.size() > 40) return false;
    if (!std::isalpha(static_cast<unsigned char>(label.front()))) return false;
    int words = 1;
    for (char c : label) {
        const auto u = static_cast<unsigned char>(c);
        if (c == ' ') ++words;
        else if (!std::isalpha(u) && c != '-' && c != '(' && c != ')' && c != '/') return false;
    }
    return words <= 4;
}

}  // namespace

std::vector<Characteristic> parse_completion(const std::string& completion) {
    std::vector<Characteristic> out;
    std::set<std::string> seen;
    std::size_t pos = 0;
    while (pos <= completion.size()) {
        auto end = completion.find('\n', pos);
        if (end == std::string::npos) end = completion.size();
        const auto line = strip_markup(completion.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) continue;

        const auto colon = line.find(':');
        std::optional<std::string> heading;
        std::string value;
        if (colon != std::string::npos) {
            const auto label = trim(line.substr(0, colon));
            value = trim(line.substr(colon + 1));
            if (auto canon = canonical_heading(label)) heading = *canon;
            else if (plausible_label(label) && !value.empty() && !out.empty()) heading = label;
        }
        if (heading) {
            if (!seen.insert(lower(*heading)).second)
                throw CompletionParseError("completion repeats heading '" + *heading + "'", completion);
            out.emplace_back(*heading, value);
        } else if (!out.empty()) {
            auto& current = out.back().second;
            if (!current.empty()) current.push_back(' ');
            current += line;
        }
    }
    if (out.empty()) throw CompletionParseError("completion has no 'Heading: value' lines", completion);
    return out;
}

SummaryResult summarize_document(std::string_view document, const std::string& deposit_type, LlmProvider& llm,
                                 std::string_view prompt_template) {
    if (trim(document).empty()) throw Error(ErrorCode::input, "document is empty");
    if (trim(deposit_type).empty()) throw Error(ErrorCode::input, "deposit type is empty");
    const auto prompt = instantiate_template(prompt_template, deposit_type, document);

    SummaryResult result;
    try {
        result.completion = llm.complete(prompt);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::provider) throw;
        throw Error(ErrorCode::provider, std::string("LLM provider failed: ") + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::provider, std::string("LLM provider failed: ") + e.what());
    }

    result.model.deposit_type = deposit_type;
    result.model.characteristics = parse_completion(result.completion);
    result.model.source_docs.push_back("summarized document (" + std::to_string(document.size()) + " bytes)");
    result.diagnostics = validate_model(result.model);
    std::string missing;
    for (const auto& d : result.diagnostics)
        if (d.kind == DiagnosticKind::missing_heading) missing += (missing.empty() ? "" : ", ") + d.heading;
    if (!missing.empty()) throw Error(ErrorCode::validation, "summary lacks headings: " + missing);
    return result;
}

}  // namespace lithoquery::depositmodel
