#pragma once

#include "toa/core.hpp"
#include "toa/phase.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace toa {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Placeholders a phase's template must reference.
const std::vector<std::string>& required_placeholders(Phase phase);

/// Names of every `{identifier}` placeholder appearing in `text`, in order of
/// first appearance. Brace runs that are not a bare identifier (JSON examples
/// in the templates) are not placeholders.
std::vector<std::string> placeholders_in(std::string_view text);

class PromptTemplate {
  public:
    /// Throws InvalidTemplate when a required placeholder for `phase` is absent.
    PromptTemplate(Phase phase, std::string text);

    Phase phase() const noexcept { return phase_; }
    const std::string& text() const noexcept { return text_; }

  private:
    Phase phase_;
    std::string text_;
};

/// Single-pass substitution; substituted values are never re-scanned.
/// Throws MissingBinding naming the first placeholder with no binding.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

const std::string& default_template_text(Phase phase);

/// Directory overrides are read from `<dir>/<phase>.txt`, e.g. `perceive.txt`.
class PromptSet {
  public:
    PromptSet();

    const PromptTemplate& get(Phase phase) const;
    void set(PromptTemplate tmpl);
    void load_overrides(const std::filesystem::path& dir);

  private:
    std::map<Phase, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Structured responses

enum class Utility { Useless = 0, Useful = 1 };
std::string_view to_string(Utility u) noexcept;

struct PerceiveResponse {
    std::string evidence;
    std::string answer;
    bool operator==(const PerceiveResponse&) const = default;
};

struct SelectResponse {
    std::string explanation;
    std::vector<int> selected_ids; // sorted, unique; empty means "None"
    bool operator==(const SelectResponse&) const = default;
};

struct UpdateResponse {
    Utility utility = Utility::Useless;
    std::string fact;
    std::string conclusion;
    bool operator==(const UpdateResponse&) const = default;
};

struct FinalizeResponse {
    std::string explanation;
    std::optional<std::string> result; // nullopt is the "None" verdict
    bool operator==(const FinalizeResponse&) const = default;
};

using TieBreakResponse = FinalizeResponse;

using AnyResponse = std::variant<PerceiveResponse, SelectResponse, UpdateResponse, FinalizeResponse>;

/// Locates the first balanced-brace substring of `raw` that parses as a JSON
/// object. Returns its text.
std::optional<std::string> extract_json_object(std::string_view raw);

// All parsers throw Error(Unparseable) when no usable object is found.
PerceiveResponse parse_perceive(std::string_view raw);
SelectResponse parse_select(std::string_view raw);
UpdateResponse parse_update(std::string_view raw);
FinalizeResponse parse_finalize(std::string_view raw);
AnyResponse parse_response(Phase phase, std::string_view raw);

/// "A", "a.", "(A)", "Option A" -> "A"; "none"/"" -> nullopt; other text is
/// returned trimmed.
std::optional<std::string> normalize_result(std::string_view value);

/// Drops the requesting agent's own id and ids outside [0, n).
SelectResponse filter_selection(SelectResponse resp, AgentId owner, int n);

std::string serialize(const PerceiveResponse& r);
std::string serialize(const SelectResponse& r);
std::string serialize(const UpdateResponse& r);
std::string serialize(const FinalizeResponse& r);

// Helpers used when filling bindings.
std::string render_cognition(const CognitiveState& s);
std::string render_agent_list(const std::vector<int>& ids); // "[1, 2, 3]"

} // namespace toa
