#pragma once

#include "toa/error.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace toa {

using AgentId = int;

/// Ordered, duplicate-free list of chunk indices. The first element is the
/// owning agent's chunk; every cache and usefulness key is one of these.
using ChunkSequence = std::vector<int>;

std::string format_sequence(const ChunkSequence& seq); // "(0, 3, 4)"
bool is_duplicate_free(const ChunkSequence& seq);

struct Token {
    std::size_t begin = 0; // byte offsets into the source text
    std::size_t end = 0;
    std::string_view view(std::string_view text) const { return text.substr(begin, end - begin); }
};

class Tokenizer {
  public:
    virtual ~Tokenizer() = default;
    virtual std::vector<Token> tokenize(std::string_view text) const = 0;
    virtual std::string name() const = 0;

    std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// Maximal runs of word characters (ASCII alphanumerics, '_' and any byte of a
// multi-byte UTF-8 sequence) form one token; every other non-space byte is a
// token on its own.
class WordTokenizer final : public Tokenizer {
  public:
    std::vector<Token> tokenize(std::string_view text) const override;
    std::string name() const override { return "word"; }
};

const Tokenizer& default_tokenizer();

/// Joins token texts with single spaces. Re-tokenizing the result yields the
/// same token count as the original text.
std::string detokenize(std::string_view text, const std::vector<Token>& tokens);

class Document {
  public:
    explicit Document(std::string text, const Tokenizer& tokenizer = default_tokenizer());

    const std::string& text() const noexcept { return text_; }
    const std::vector<Token>& tokens() const noexcept { return tokens_; }
    std::size_t token_count() const noexcept { return tokens_.size(); }

  private:
    std::string text_;
    std::vector<Token> tokens_;
};

struct Option {
    std::string label;
    std::string text;
    bool operator==(const Option&) const = default;
};

struct Query {
    std::string question;
    std::vector<Option> options; // empty for free-form questions

    bool free_form() const noexcept { return options.empty(); }
    bool has_label(std::string_view label) const;
    std::vector<std::string> labels() const;
    std::string render_options() const; // "A) text" per line
    void validate() const;               // labels unique and non-empty
};

struct Chunk {
    int index = 0;
    std::string text;
    std::pair<std::size_t, std::size_t> token_span; // half-open
    std::size_t length() const noexcept { return token_span.second - token_span.first; }
};

/// ⟨evidence, answer⟩ after reading the chunks in `path`, in order.
struct CognitiveState {
    std::string evidence;
    std::string answer;
    ChunkSequence path;
    bool operator==(const CognitiveState&) const = default;
};

struct SplitOptions {
    // When > 0, each interior boundary moves to the nearest sentence end within
    // this many tokens. Off by default: boundaries sit at floor(i*M/N).
    std::size_t snap_window = 0;
};

/// Chunk i covers tokens [floor(i*M/N), floor((i+1)*M/N)); the last chunk
/// therefore absorbs the remainder and the spans cover [0, M) exactly.
std::vector<Chunk> split_document(const Document& doc, int n, SplitOptions opts = {});

/// Token boundaries only, without materializing chunk text.
std::vector<std::pair<std::size_t, std::size_t>> chunk_spans(std::size_t m, int n);

} // namespace toa
