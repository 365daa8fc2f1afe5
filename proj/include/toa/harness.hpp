#pragma once

#include "toa/backend.hpp"
#include "toa/core.hpp"
#include "toa/orchestrator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toa {

// ---------------------------------------------------------------------------
// Datasets

struct QARecord {
    std::string id;
    std::string document;      // inline text; empty when document_path is set
    std::string document_path; // resolved against the dataset file's directory
    std::string question;
    std::vector<Option> options;
    std::optional<std::string> gold;

    Query query() const { return {question, options}; }
    /// Inline text, or the contents of document_path.
    std::string load_document() const;
};

/// JSON lines, one record per line; blank lines are skipped. Recognized keys:
/// id, document | document_path, question, options (list of {label, text} or
/// a label -> text object), gold. Throws ParseError naming the line.
std::vector<QARecord> load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Needle in a haystack

struct Needle {
    std::string text;
    double depth = 0.0;                // percent of the haystack, in [0, 100]
    std::vector<std::string> keywords; // exact-match scoring terms
};

struct NeedleSpec {
    std::string haystack;
    std::vector<Needle> needles; // ascending depth
    std::string question;
    std::size_t target_length = 0; // tokens, needles included
};

struct NeedlePlacement {
    std::size_t target_token = 0; // floor(depth/100 * H) in haystack tokens
    std::size_t source_token = 0; // sentence start chosen, in haystack tokens
    std::size_t token_offset = 0; // first needle token in the built document
    std::size_t byte_offset = 0;
};

struct Haystack {
    std::string text;
    std::size_t token_count = 0;
    std::size_t haystack_tokens = 0; // H: source tokens kept
    std::vector<NeedlePlacement> placements;
};

/// Truncates the source to H = target - (needle tokens) tokens and inserts
/// each needle before the sentence start nearest to floor(depth/100 * H).
/// Throws SourceTooShort or InvalidArgument.
Haystack build_haystack(const NeedleSpec& spec, const Tokenizer& tokenizer = default_tokenizer());

/// Seeded filler prose of at least `tokens` tokens, sentences of 8 to 24 words.
std::string synthetic_filler(std::size_t tokens, std::uint64_t seed);

NeedleSpec single_needle_fixture(std::size_t target_length, double depth, std::string haystack);
NeedleSpec multi_needle_fixture(std::size_t target_length, double depth1, double depth2,
                                std::string haystack);

/// Fraction of all needle keywords found (case-insensitively) in the answer.
double needle_recall(const NeedleSpec& spec, const std::optional<std::string>& answer);

/// Deterministic extractive backend for needle sweeps. A chunk "hits" when a
/// sentence in it shares enough content words with the question; answers are
/// the hitting sentences of the chunks read so far, or for a multiple-choice
/// query the label whose option text those sentences mention most.
class KeywordBackend final : public Backend {
  public:
    KeywordBackend(std::vector<Chunk> chunks, const Query& query);

    Completion complete(const CallRequest& request) override;
    bool deterministic() const override { return true; }
    std::string name() const override { return "keyword"; }

    const std::vector<std::string>& hits(int chunk) const { return hits_.at(static_cast<std::size_t>(chunk)); }

  private:
    std::string answer_for(const ChunkSequence& seq) const;

    std::vector<std::vector<std::string>> hits_;
    std::vector<std::pair<std::string, std::set<std::string>>> options_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t none = 0;
    double accuracy = 0.0;
    double none_rate = 0.0;
};

/// Throws LengthMismatch when the vectors differ in size.
EvalResult evaluate(const std::vector<std::optional<std::string>>& answers,
                    const std::vector<std::optional<std::string>>& golds);
EvalResult evaluate(const std::vector<RunReport>& reports, const std::vector<std::optional<std::string>>& golds);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 for fewer than two values
};
MeanStd mean_std(const std::vector<double>& values);
std::string format_mean_std(double mean, double std, int decimals = 3); // "0.543 ± 0.009"

/// Aligned text rows "method  accuracy  none-rate" in the layout of a results table.
struct ResultRow {
    std::string method;
    MeanStd accuracy;
    MeanStd none_rate;
};
std::string format_results_table(const std::vector<ResultRow>& rows);

} // namespace toa
