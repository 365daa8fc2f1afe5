#include "toa/prompts.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace toa {

using nlohmann::json;

std::string_view to_string(Phase p) noexcept {
    switch (p) {
    case Phase::Perceive: return "perceive";
    case Phase::SelectChunks: return "select_chunks";
    case Phase::UpdateCognition: return "update_cognition";
    case Phase::Finalize: return "finalize";
    case Phase::TieBreak: return "tie_break";
    }
    return "unknown";
}

std::optional<Phase> phase_from_string(std::string_view name) noexcept {
    for (Phase p : kAllPhases)
        if (to_string(p) == name) return p;
    return std::nullopt;
}

PhaseGroup group_of(Phase p) noexcept {
    return p == Phase::UpdateCognition ? PhaseGroup::Phase2 : PhaseGroup::Phase13;
}

std::string_view to_string(Utility u) noexcept {
    return u == Utility::Useful ? "useful" : "useless";
}

namespace {

bool is_ident_char(char c) {
    return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Scans `{identifier}` tokens. Calls fn(begin, end, name) for each.
template <typename Fn>
void scan_placeholders(std::string_view text, Fn&& fn) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}' && !std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                fn(i, j + 1, text.substr(i + 1, j - i - 1));
                i = j + 1;
                continue;
            }
        }
        ++i;
    }
}

const std::string kPerceive = R"P(Background:
You are a skilled agent tasked with answering a question based on a long context. Since the context is too long, it is divided into chunks, each assigned to a different agent.

Task:
You are in Phase 1. Given a document chunk and a multiple-choice question, your goal is to answer the question accurately. First, extract and summarize facts relevant to the question from your assigned segment. Then, draw your conclusion based solely on those facts. Do not rely on prior knowledge.

Question:
{query}

Options:
{options}

Document chunk:
{chunk}

Output Format (JSON):
{
   "evidence": "Factual excerpts supporting your reasoning",
   "answer": "Your answer based on the evidence"
})P";

const std::string kSelectChunks = R"P(Background:
You are a skilled agent tasked with answering a question based on a document. Since the document is too long, it is divided into multiple chunks, each read by a different agent.

Task:
You are in Phase 2-1. You have already read your assigned chunk and proposed an evidence-based answer. However, your view may be incomplete or incorrect due to the limited context.

You will now be shown the evidence and answers provided by other agents who read different chunk of the document. The correct answer may appear in one or more of these responses.

Note:
If only a few agents report relevant evidence while most say there is none, you should focus on those few with relevant content.

Question:
{query}

Options:
{options}

Your evidence and answer:
{own_cognition}

Other agents' evidence and answers:
{peer_cognitions}

Decision:
Select which agent(s)' responses may help refine your understanding without introducing irrelevant information. You may choose one or more agent IDs, or "None" if no agent adds value.

Use only the information shown. Do not use external knowledge.

Valid choices: {agent_list}

Output Format (JSON):
{
  "explanation": "Justify your selection.",
  "id": "Selected agent ID(s), e.g., '0', '0,1', or 'None'"
})P";

const std::string kUpdateCognition = R"P(Background:
You are a skilled agent tasked with answering a question based on a document. Since the document is too long, it is divided into chunks, each read by a different agent.

Task:
You are in Phase 2-2. Based on your earlier reasoning, you requested to view additional text chunks from other agents to refine your understanding.

You will now be shown one of these chunks. Carefully evaluate its relevance. If the chunk only repeats known information or introduces irrelevant content, mark it as "useless". Otherwise, mark it as "useful" and update your facts and conclusion accordingly.

If the chunk is "useless", repeat your original facts and conclusion. Limit your output length; abbreviate if necessary.

You must judge only based on the content provided, not using external knowledge.

Question:
{query}

Options:
{options}

Your current facts and conclusion:
{own_cognition}

New chunk:
{chunk}

Output Format (JSON):
{
  "utility": "useless" or "useful",
  "fact": "Updated factual summary.",
  "conclusion": "Updated answer based on new information."
})P";

const std::string kFinalize = R"P(Background:
You are a skilled agent tasked with answering a question based on a document. Since the document is too long, it is divided into chunks, each read by a different agent.

Task:
You are in the final phase. All agents have now exchanged their opinions. Based solely on the question, answer options, and your aggregated opinion, provide the final answer.

If you are still uncertain and unable to choose a valid option, respond with "None".

Note:
All relevant information has been condensed into your own opinions. Do not consider external content or reprocess the original document. Make your decision based only on your internal conclusion.

Question:
{query}

Options:
{options}

Your aggregated opinion:
{own_cognition}

Output Format (JSON):
{
  "explanation": "Brief reasoning for your choice.",
  "result": "One of A, B, C, D, or None (no punctuation)"
})P";

const std::string kTieBreak = R"P(Background:
You are the final decision maker. You are presented with a long document and a multiple-choice question.

There are {agent_count} decision makers. A majority vote was attempted, but a tie occurred.

Task:
Please examine each agent's factual conclusions and opinions carefully. Based on this information, select the best final answer.

Question:
{query}

Options:
{options}

Agents' factual conclusions and opinions:
{peer_cognitions}

Rules:
1. You MUST choose from the following options: {result}
2. DO NOT generate any answer outside this list.
3. Output your decision strictly in the following JSON format.

Tie Information:
Answers with the same number of votes: {result}

Output Format (JSON):
{
  "explanation": "Justify your choice.",
  "result": "Final answer choice, e.g., A or B"
})P";

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && issp(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && issp(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Lower-cased key -> string value view over a parsed object.
class Fields {
  public:
    explicit Fields(const json& obj) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            auto key = lower(trim(it.key()));
            if (!values_.count(key)) values_.emplace(std::move(key), stringify(it.value()));
        }
    }

    std::optional<std::string> get(std::string_view key) const {
        auto it = values_.find(std::string(key));
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string require(std::string_view key) const {
        auto v = get(key);
        if (!v) throw Error(Errc::Unparseable, "missing field \"" + std::string(key) + "\"");
        return *v;
    }

    std::string get_or_empty(std::string_view key) const { return get(key).value_or(""); }

  private:
    static std::string stringify(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_null()) return "None";
        if (v.is_array()) {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ",";
                out += stringify(v[i]);
            }
            return out;
        }
        return v.dump();
    }

    std::map<std::string, std::string> values_;
};

Fields fields_of(std::string_view raw) {
    auto obj = extract_json_object(raw);
    if (!obj) throw Error(Errc::Unparseable, "no JSON object in response");
    return Fields(json::parse(*obj));
}

bool means_none(std::string_view s) {
    auto l = lower(trim(s));
    while (!l.empty() && (l.back() == '.' || l.back() == '"' || l.back() == '\'')) l.pop_back();
    while (!l.empty() && (l.front() == '"' || l.front() == '\'')) l.erase(l.begin());
    return l.empty() || l == "none" || l == "null" || l == "n/a";
}

} // namespace

const std::vector<std::string>& required_placeholders(Phase phase) {
    static const std::map<Phase, std::vector<std::string>> table = {
        {Phase::Perceive, {"query", "options", "chunk"}},
        {Phase::SelectChunks, {"query", "options", "own_cognition", "peer_cognitions", "agent_list"}},
        {Phase::UpdateCognition, {"query", "options", "own_cognition", "chunk"}},
        {Phase::Finalize, {"query", "options", "own_cognition"}},
        {Phase::TieBreak, {"query", "options", "peer_cognitions", "result", "agent_count"}},
    };
    return table.at(phase);
}

std::vector<std::string> placeholders_in(std::string_view text) {
    std::vector<std::string> out;
    scan_placeholders(text, [&](std::size_t, std::size_t, std::string_view name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
    });
    return out;
}

PromptTemplate::PromptTemplate(Phase phase, std::string text) : phase_(phase), text_(std::move(text)) {
    auto present = placeholders_in(text_);
    for (const auto& name : required_placeholders(phase_)) {
        if (std::find(present.begin(), present.end(), name) == present.end())
            throw Error(Errc::InvalidTemplate, std::string(to_string(phase_)) +
                                                   " template lacks placeholder {" + name + "}");
    }
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    const std::string_view text = tmpl.text();
    std::string out;
    out.reserve(text.size());
    std::size_t cursor = 0;
    scan_placeholders(text, [&](std::size_t b, std::size_t e, std::string_view name) {
        auto it = bindings.find(name);
        if (it == bindings.end())
            throw Error(Errc::MissingBinding, "no value bound for {" + std::string(name) + "}");
        out.append(text.substr(cursor, b - cursor));
        out.append(it->second);
        cursor = e;
    });
    out.append(text.substr(cursor));
    return out;
}

const std::string& default_template_text(Phase phase) {
    switch (phase) {
    case Phase::Perceive: return kPerceive;
    case Phase::SelectChunks: return kSelectChunks;
    case Phase::UpdateCognition: return kUpdateCognition;
    case Phase::Finalize: return kFinalize;
    case Phase::TieBreak: return kTieBreak;
    }
    return kPerceive;
}

PromptSet::PromptSet() {
    for (Phase p : kAllPhases) templates_.emplace(p, PromptTemplate(p, default_template_text(p)));
}

const PromptTemplate& PromptSet::get(Phase phase) const { return templates_.at(phase); }

void PromptSet::set(PromptTemplate tmpl) {
    auto phase = tmpl.phase();
    templates_.insert_or_assign(phase, std::move(tmpl));
}

void PromptSet::load_overrides(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(Errc::Io, "prompt override directory not found: " + dir.string());
    for (Phase p : kAllPhases) {
        auto file = dir / (std::string(to_string(p)) + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        set(PromptTemplate(p, ss.str()));
    }
}

std::optional<std::string> extract_json_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            const char c = raw[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    auto candidate = raw.substr(start, i - start + 1);
                    auto parsed = json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return std::string(candidate);
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> normalize_result(std::string_view value) {
    std::string s = trim(value);
    auto strip = [](unsigned char c) {
        return std::ispunct(c) != 0 || std::isspace(c) != 0;
    };
    while (!s.empty() && strip(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && strip(static_cast<unsigned char>(s[b]))) ++b;
    s.erase(0, b);
    if (means_none(s)) return std::nullopt;

    auto l = lower(s);
    for (std::string_view prefix : {"option ", "answer ", "answer: ", "option: "}) {
        if (l.size() == prefix.size() + 1 && l.starts_with(prefix)) {
            s = s.substr(prefix.size());
            break;
        }
    }
    if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0])))
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

PerceiveResponse parse_perceive(std::string_view raw) {
    auto f = fields_of(raw);
    return {f.require("evidence"), f.require("answer")};
}

SelectResponse parse_select(std::string_view raw) {
    auto f = fields_of(raw);
    SelectResponse out;
    out.explanation = f.get_or_empty("explanation");
    auto ids = f.get("id");
    if (!ids) ids = f.get("ids");
    if (!ids) throw Error(Errc::Unparseable, "missing field \"id\"");
    if (means_none(*ids)) return out;

    std::set<int> found;
    const std::string& s = *ids;
    for (std::size_t i = 0; i < s.size();) {
        if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j - i <= 6) found.insert(std::stoi(s.substr(i, j - i)));
            i = j;
        } else {
            ++i;
        }
    }
    if (found.empty()) throw Error(Errc::Unparseable, "no agent ids in \"" + s + "\"");
    out.selected_ids.assign(found.begin(), found.end());
    return out;
}

UpdateResponse parse_update(std::string_view raw) {
    auto f = fields_of(raw);
    auto u = lower(trim(f.require("utility")));
    while (!u.empty() && std::ispunct(static_cast<unsigned char>(u.back()))) u.pop_back();
    while (!u.empty() && std::ispunct(static_cast<unsigned char>(u.front()))) u.erase(u.begin());
    UpdateResponse out;
    if (u == "useful") out.utility = Utility::Useful;
    else if (u == "useless") out.utility = Utility::Useless;
    else throw Error(Errc::Unparseable, "utility must be useful or useless, got \"" + u + "\"");
    out.fact = f.get_or_empty("fact");
    out.conclusion = f.get_or_empty("conclusion");
    return out;
}

FinalizeResponse parse_finalize(std::string_view raw) {
    auto f = fields_of(raw);
    FinalizeResponse out;
    out.explanation = f.get_or_empty("explanation");
    out.result = normalize_result(f.require("result"));
    return out;
}

AnyResponse parse_response(Phase phase, std::string_view raw) {
    switch (phase) {
    case Phase::Perceive: return parse_perceive(raw);
    case Phase::SelectChunks: return parse_select(raw);
    case Phase::UpdateCognition: return parse_update(raw);
    case Phase::Finalize:
    case Phase::TieBreak: return parse_finalize(raw);
    }
    throw Error(Errc::InvalidArgument, "unknown phase");
}

SelectResponse filter_selection(SelectResponse resp, AgentId owner, int n) {
    std::erase_if(resp.selected_ids, [&](int id) { return id == owner || id < 0 || id >= n; });
    return resp;
}

std::string serialize(const PerceiveResponse& r) {
    return json{{"evidence", r.evidence}, {"answer", r.answer}}.dump();
}

std::string serialize(const SelectResponse& r) {
    std::string ids;
    for (std::size_t i = 0; i < r.selected_ids.size(); ++i) {
        if (i) ids += ",";
        ids += std::to_string(r.selected_ids[i]);
    }
    return json{{"explanation", r.explanation}, {"id", ids.empty() ? "None" : ids}}.dump();
}

std::string serialize(const UpdateResponse& r) {
    return json{{"utility", std::string(to_string(r.utility))},
                {"fact", r.fact},
                {"conclusion", r.conclusion}}
        .dump();
}

std::string serialize(const FinalizeResponse& r) {
    return json{{"explanation", r.explanation}, {"result", r.result.value_or("None")}}.dump();
}

std::string render_cognition(const CognitiveState& s) {
    return "Evidence: " + s.evidence + "\nAnswer: " + s.answer;
}

std::string render_agent_list(const std::vector<int>& ids) {
    std::string out = "[";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(ids[i]);
    }
    return out + "]";
}

} // namespace toa
