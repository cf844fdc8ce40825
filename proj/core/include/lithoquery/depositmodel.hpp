#pragma once

#include "lithoquery/error.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lithoquery::depositmodel {

using Characteristic = std::pair<std::string, std::string>;

/// The ten headings every descriptive model is expected to carry, in order.
const std::vector<std::string>& canonical_headings();

/// Canonical spelling of `heading` if it matches one case-insensitively.
std::optional<std::string> canonical_heading(std::string_view heading);

struct DepositModel {
    std::string deposit_type;
    std::vector<Characteristic> characteristics;  // ordered, unique headings
    std::vector<std::string> source_docs;
    bool edited = false;

    const std::string* characteristic(std::string_view heading) const;
    bool operator==(const DepositModel&) const = default;
};

inline constexpr std::size_t kMaxCharacteristicLength = 2000;

enum class DiagnosticKind { missing_heading, empty_value, over_length, extra_heading, duplicate_heading };

const char* to_string(DiagnosticKind k) noexcept;

struct Diagnostic {
    DiagnosticKind kind;
    std::string heading;
    std::string message;
};

std::vector<Diagnostic> validate_model(const DepositModel& model);

/// File-system friendly name: "tungsten skarn" -> "tungsten-skarn".
std::string slug(std::string_view deposit_type);

/// Parses one model document. Duplicate headings and malformed documents
/// raise Error(parse) naming `source`.
DepositModel parse_model(std::string_view json_text, const std::string& source = "<model>");
std::string serialize_model(const DepositModel& model);

struct LoadReport {
    std::vector<DepositModel> models;
    std::vector<std::pair<std::string, std::vector<Diagnostic>>> warnings;  // per deposit type
    std::vector<std::string> rejected;                                      // one message per skipped file
};

/// Loads a single model file or every *.json file in a directory (sorted by
/// name). Throws Error(ingest) when nothing valid was found.
LoadReport load_models(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const DepositModel& model);

/// Directory of models keyed by slug. Replacing a model keeps the previous
/// document as `<slug>.v<N>.json`. Optional seed directories are consulted
/// read-only when the store has no copy.
class ModelStore {
public:
    explicit ModelStore(std::filesystem::path root, std::vector<std::filesystem::path> seeds = {});

    std::optional<DepositModel> get(std::string_view deposit_type) const;
    std::vector<std::string> list() const;
    /// Stores `model` as an edit (edited = true); returns the stored copy.
    DepositModel put(DepositModel model);
    std::vector<std::filesystem::path> versions(std::string_view deposit_type) const;

private:
    std::optional<DepositModel> read(const std::filesystem::path& file) const;
    std::mutex& write_lock(const std::string& key);

    std::filesystem::path root_;
    std::vector<std::filesystem::path> seeds_;
    mutable std::shared_mutex mutex_;
    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> write_locks_;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// `POST {endpoint}/complete` with {"prompt"} answering {"completion"}.
class RemoteLlmProvider final : public LlmProvider {
public:
    explicit RemoteLlmProvider(std::string endpoint, int timeout_seconds = 120);
    std::string complete(const std::string& prompt) override;

private:
    std::string endpoint_;
    int timeout_seconds_;
};

/// Raised when a completion cannot be read as "Heading: value" blocks.
class CompletionParseError : public Error {
public:
    CompletionParseError(std::string message, std::string completion);
    const std::string& completion() const { return completion_; }

private:
    std::string completion_;
};

/// Built-in prompt template with {{deposit_type}}, {{document}} and
/// {{headings}} placeholders.
const std::string& default_prompt_template();

/// Substitutes the placeholders; throws Error(input) if any is absent.
std::string instantiate_template(std::string_view prompt_template, std::string_view deposit_type,
                                 std::string_view document);

/// Reads "Heading: value" lines. A heading starts a line; following lines
/// without a heading continue the current value. Canonical headings are
/// matched case-insensitively; other labels need a value on the same line.
std::vector<Characteristic> parse_completion(const std::string& completion);

struct SummaryResult {
    DepositModel model;
    std::vector<Diagnostic> diagnostics;
    std::string completion;
};

/// Distills `document` into a model. Errors are distinct: Error(input) for an
/// empty document or bad template, Error(provider) for provider failures,
/// CompletionParseError for unreadable output and Error(validation) when
/// canonical headings are missing.
SummaryResult summarize_document(std::string_view document, const std::string& deposit_type, LlmProvider& llm,
                                 std::string_view prompt_template = default_prompt_template());

}  // namespace lithoquery::depositmodel
