#include "toa/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace toa {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_terminal(std::string_view tok) { return tok == "." || tok == "!" || tok == "?"; }

} // namespace

std::string QARecord::load_document() const {
    if (!document_path.empty()) return read_file(document_path);
    return document;
}

std::vector<QARecord> load_dataset(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<QARecord> out;
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) {
            throw Error(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail("not a JSON object");

        QARecord r;
        r.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                : std::to_string(out.size());
        if (!j.contains("question") || !j["question"].is_string()) fail("missing \"question\"");
        r.question = j["question"].get<std::string>();
        if (j.contains("document") && j["document"].is_string()) {
            r.document = j["document"].get<std::string>();
        } else if (j.contains("document_path") && j["document_path"].is_string()) {
            std::filesystem::path p = j["document_path"].get<std::string>();
            if (p.is_relative()) p = path.parent_path() / p;
            r.document_path = p.string();
        } else {
            fail("missing \"document\" or \"document_path\"");
        }

        if (j.contains("options")) {
            const auto& o = j["options"];
            if (o.is_array()) {
                for (const auto& item : o) {
                    if (!item.is_object() || !item.contains("label") || !item["label"].is_string())
                        fail("option without a label");
                    r.options.push_back({item["label"].get<std::string>(),
                                         item.value("text", std::string())});
                }
            } else if (o.is_object()) {
                for (const auto& [label, text] : o.items())
                    r.options.push_back({label, text.is_string() ? text.get<std::string>() : text.dump()});
            } else {
                fail("\"options\" must be a list or an object");
            }
        }
        if (j.contains("gold") && !j["gold"].is_null()) {
            if (!j["gold"].is_string()) fail("\"gold\" must be a string");
            r.gold = j["gold"].get<std::string>();
        }
        try {
            r.query().validate();
        } catch (const Error& e) {
            fail(e.what());
        }
        if (r.gold && !r.options.empty() && !r.query().has_label(*r.gold))
            fail("gold label " + *r.gold + " is not an option");
        out.push_back(std::move(r));
    }
    return out;
}

Haystack build_haystack(const NeedleSpec& spec, const Tokenizer& tokenizer) {
    std::size_t needle_tokens = 0;
    double prev_depth = 0.0;
    for (const auto& n : spec.needles) {
        if (n.depth < 0.0 || n.depth > 100.0)
            throw Error(Errc::InvalidArgument, "needle depth must lie in [0, 100]");
        if (n.depth < prev_depth) throw Error(Errc::InvalidArgument, "needle depths must be ascending");
        prev_depth = n.depth;
        const auto count = tokenizer.count(n.text);
        if (count == 0) throw Error(Errc::InvalidArgument, "empty needle");
        needle_tokens += count;
    }
    if (spec.target_length < needle_tokens)
        throw Error(Errc::InvalidArgument, "target length is shorter than the needles");
    const std::size_t h = spec.target_length - needle_tokens;
    const auto tokens = tokenizer.tokenize(spec.haystack);
    if (tokens.size() < h)
        throw Error(Errc::SourceTooShort, "haystack has " + std::to_string(tokens.size()) +
                                              " tokens, " + std::to_string(h) + " needed");

    const std::string_view src = spec.haystack;
    const std::string_view kept = h == 0 ? std::string_view{} : src.substr(0, tokens[h - 1].end);

    std::vector<std::size_t> starts{0};
    for (std::size_t t = 1; t < h; ++t)
        if (is_terminal(tokens[t - 1].view(src))) starts.push_back(t);
    if (h > 0) starts.push_back(h);

    auto nearest = [&](std::size_t target) {
        auto it = std::lower_bound(starts.begin(), starts.end(), target);
        if (it == starts.end()) return starts.back();
        if (it == starts.begin() || *it == target) return *it;
        const std::size_t after = *it, before = *std::prev(it);
        return target - before <= after - target ? before : after;
    };

    Haystack out;
    out.haystack_tokens = h;
    std::size_t copied = 0; // bytes of `kept` already emitted
    std::size_t inserted_tokens = 0;
    for (const auto& n : spec.needles) {
        NeedlePlacement p;
        p.target_token = static_cast<std::size_t>(std::floor(n.depth * static_cast<double>(h) / 100.0));
        p.target_token = std::min(p.target_token, h);
        p.source_token = nearest(p.target_token);
        const std::size_t at = p.source_token < h ? tokens[p.source_token].begin : kept.size();
        out.text.append(kept.substr(copied, at - copied));
        copied = at;
        if (p.source_token == h && h > 0) out.text += ' ';
        p.byte_offset = out.text.size();
        p.token_offset = p.source_token + inserted_tokens;
        out.text += n.text;
        if (p.source_token < h) out.text += ' ';
        inserted_tokens += tokenizer.count(n.text);
        out.placements.push_back(p);
    }
    out.text.append(kept.substr(copied));
    out.token_count = tokenizer.count(out.text);
    return out;
}

std::string synthetic_filler(std::size_t tokens, std::uint64_t seed) {
    static const std::vector<std::string_view> words = {
        "river",   "meadow",  "lantern", "orchard", "harbor",  "pebble",  "willow",  "quiet",
        "morning", "green",   "copper",  "valley",  "garden",  "farmer",  "basket",  "slowly",
        "north",   "cloud",   "bridge",  "market",  "gentle",  "bread",   "window",  "stone",
        "summer",  "autumn",  "walked",  "carried", "painted", "watched", "village", "candle",
        "kettle",  "ladder",  "barley",  "thistle", "heron",   "marble",  "velvet",  "amber",
        "distant", "narrow",  "hollow",  "wooden",  "silver",  "tide",    "lake",    "field",
        "sheep",   "cottage", "fence",   "road",    "evening", "rain",    "sunlight", "forest"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::uniform_int_distribution<int> len(8, 24);
    std::string out;
    std::size_t count = 0;
    while (count < tokens) {
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            std::string w(words[pick(rng)]);
            if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            if (!out.empty()) out += ' ';
            out += w;
        }
        out += '.';
        count += static_cast<std::size_t>(n) + 1;
    }
    return out;
}

NeedleSpec single_needle_fixture(std::size_t target_length, double depth, std::string haystack) {
    NeedleSpec s;
    s.haystack = std::move(haystack);
    s.target_length = target_length;
    s.question = "For what type of work is the production company for The Year Without a Santa Claus best known?";
    s.needles.push_back({"The production company for The Year Without a Santa Claus is best known for seasonal "
                         "television specials, particularly its work in stop-motion animation.",
                         depth,
                         {"stop-motion animation"}});
    return s;
}

NeedleSpec multi_needle_fixture(std::size_t target_length, double depth1, double depth2, std::string haystack) {
    NeedleSpec s;
    s.haystack = std::move(haystack);
    s.target_length = target_length;
    s.question = "According to declassified Cold War documents, what were the two unusual objects that spies "
                 "used as dead drops in 1970s Berlin?";
    s.needles.push_back({"According to declassified Cold War documents, spies used a hollowed-out chess piece as "
                         "a dead drop in 1970s Berlin.",
                         depth1,
                         {"chess piece"}});
    s.needles.push_back({"According to declassified Cold War documents, a fake electrical fuse box was used as a "
                         "dead drop by spies in 1970s Berlin.",
                         depth2,
                         {"fuse box"}});
    return s;
}

double needle_recall(const NeedleSpec& spec, const std::optional<std::string>& answer) {
    std::size_t total = 0, found = 0;
    const std::string a = answer ? lower(*answer) : std::string();
    for (const auto& n : spec.needles) {
        for (const auto& k : n.keywords) {
            ++total;
            if (answer && a.find(lower(k)) != std::string::npos) ++found;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

namespace {

std::set<std::string> content_words(std::string_view text, std::size_t min_len = 4) {
    static const std::set<std::string> stop = {"what", "which", "were", "that", "with", "from", "this",
                                               "there", "their", "have", "been", "when", "where", "does",
                                               "into", "about", "they", "them", "than", "then", "also"};
    std::set<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.size() >= min_len && !stop.count(word)) out.insert(word);
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else flush();
    }
    flush();
    return out;
}

std::vector<std::string> sentences_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            out.emplace_back(text.substr(begin, i + 1 - begin));
            begin = i + 1;
        }
    }
    if (begin < text.size()) out.emplace_back(text.substr(begin));
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t\r\n");
        s = b == std::string::npos ? std::string() : s.substr(b);
    }
    std::erase_if(out, [](const std::string& s) { return s.empty(); });
    return out;
}

} // namespace

KeywordBackend::KeywordBackend(std::vector<Chunk> chunks, const Query& query) {
    for (const auto& o : query.options) options_.emplace_back(o.label, content_words(o.text, 3));
    const auto keys = content_words(query.question);
    const std::size_t need = std::max<std::size_t>(2, (keys.size() + 1) / 2);
    for (const auto& c : chunks) {
        std::vector<std::string> hits;
        for (const auto& s : sentences_of(c.text)) {
            const auto words = content_words(s);
            std::size_t overlap = 0;
            for (const auto& k : keys) overlap += words.count(k);
            if (!keys.empty() && overlap >= need) hits.push_back(s);
        }
        hits_.push_back(std::move(hits));
    }
}

std::string KeywordBackend::answer_for(const ChunkSequence& seq) const {
    ChunkSequence sorted = seq;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (int c : sorted) {
        for (const auto& h : hits(c)) {
            if (!out.empty()) out += ' ';
            out += h;
        }
    }
    if (options_.empty() || out.empty()) return out;
    const auto seen = content_words(out, 3);
    std::string best;
    std::size_t top = 0;
    bool tied = false;
    for (const auto& [label, words] : options_) {
        std::size_t n = 0;
        for (const auto& w : words) n += seen.count(w);
        if (n > top) {
            top = n;
            best = label;
            tied = false;
        } else if (n == top && n > 0) {
            tied = true;
        }
    }
    return tied ? std::string() : best;
}

Completion KeywordBackend::complete(const CallRequest& request) {
    auto chunk_ok = [&](int c) { return c >= 0 && static_cast<std::size_t>(c) < hits_.size(); };
    const auto& seq = request.sequence;
    for (int c : seq)
        if (!chunk_ok(c)) throw Error(Errc::InvalidArgument, "keyword backend: chunk out of range");
    switch (request.phase) {
    case Phase::Perceive: {
        const std::string a = seq.empty() ? std::string() : answer_for(seq);
        if (a.empty()) return {serialize(PerceiveResponse{"No relevant facts in this chunk.", "None"})};
        return {serialize(PerceiveResponse{a, a})};
    }
    case Phase::SelectChunks: {
        std::string ids;
        for (std::size_t c = 0; c < hits_.size(); ++c) {
            if (static_cast<int>(c) == request.agent || hits_[c].empty()) continue;
            if (!ids.empty()) ids += ",";
            ids += std::to_string(c);
        }
        return {json{{"explanation", "chunks with matching facts"}, {"id", ids.empty() ? "None" : ids}}.dump()};
    }
    case Phase::UpdateCognition: {
        const bool useful = !seq.empty() && !hits(seq.back()).empty();
        std::string a = answer_for(seq);
        if (a.empty()) a = "None";
        return {serialize(UpdateResponse{useful ? Utility::Useful : Utility::Useless, a, a})};
    }
    case Phase::Finalize: {
        std::string a = answer_for(seq);
        return {json{{"explanation", "extracted"}, {"result", a.empty() ? "None" : a}}.dump()};
    }
    case Phase::TieBreak: {
        std::string best;
        for (const auto& l : request.tied_labels)
            if (l.size() > best.size()) best = l;
        return {json{{"explanation", "most complete"}, {"result", best.empty() ? "None" : best}}.dump()};
    }
    }
    throw Error(Errc::InvalidArgument, "unknown phase");
}

// ---------------------------------------------------------------------------

EvalResult evaluate(const std::vector<std::optional<std::string>>& answers,
                    const std::vector<std::optional<std::string>>& golds) {
    if (answers.size() != golds.size())
        throw Error(Errc::LengthMismatch, std::to_string(answers.size()) + " answers for " +
                                              std::to_string(golds.size()) + " golds");
    EvalResult r;
    r.total = answers.size();
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (!answers[i]) ++r.none;
        else if (golds[i] && *answers[i] == *golds[i]) ++r.correct;
    }
    if (r.total > 0) {
        r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
        r.none_rate = static_cast<double>(r.none) / static_cast<double>(r.total);
    }
    return r;
}

EvalResult evaluate(const std::vector<RunReport>& reports, const std::vector<std::optional<std::string>>& golds) {
    std::vector<std::optional<std::string>> answers;
    answers.reserve(reports.size());
    for (const auto& r : reports) answers.push_back(r.final_answer);
    return evaluate(answers, golds);
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd m;
    if (values.empty()) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return m;
    double sq = 0.0;
    for (double v : values) sq += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    return m;
}

std::string format_mean_std(double mean, double std, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f \xC2\xB1 %.*f", decimals, mean, decimals, std);
    return buf;
}

std::string format_results_table(const std::vector<ResultRow>& rows) {
    std::size_t width = 6;
    for (const auto& r : rows) width = std::max(width, r.method.size());
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %-15s  %-15s\n", static_cast<int>(width), "Method", "Accuracy",
                  "None-rate");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %-16s  %-16s\n", static_cast<int>(width), r.method.c_str(),
                      format_mean_std(r.accuracy.mean, r.accuracy.std).c_str(),
                      format_mean_std(r.none_rate.mean, r.none_rate.std).c_str());
        os << buf;
    }
    return os.str();
}

} // namespace toa
