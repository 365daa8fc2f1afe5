#include "toa/core.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace toa {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::ZeroChunks: return "ZeroChunks";
    case Errc::DocumentTooShort: return "DocumentTooShort";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidTemplate: return "InvalidTemplate";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::Unparseable: return "Unparseable";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::Timeout: return "Timeout";
    case Errc::PathExplosion: return "PathExplosion";
    case Errc::EmptyCache: return "EmptyCache";
    case Errc::SourceTooShort: return "SourceTooShort";
    case Errc::ParseError: return "ParseError";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

std::string format_sequence(const ChunkSequence& seq) {
    std::string out = "(";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(seq[i]);
    }
    return out + ")";
}

bool is_duplicate_free(const ChunkSequence& seq) {
    std::set<int> seen(seq.begin(), seq.end());
    return seen.size() == seq.size();
}

namespace {

bool is_word_byte(unsigned char c) {
    return c >= 0x80 || c == '_' || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
           (c >= 'A' && c <= 'Z');
}

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool ends_sentence(std::string_view tok) {
    return tok == "." || tok == "!" || tok == "?";
}

} // namespace

std::vector<Token> WordTokenizer::tokenize(std::string_view text) const {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t j = i + 1;
            while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            out.push_back({i, j});
            i = j;
        } else {
            out.push_back({i, i + 1});
            ++i;
        }
    }
    return out;
}

const Tokenizer& default_tokenizer() {
    static const WordTokenizer instance;
    return instance;
}

std::string detokenize(std::string_view text, const std::vector<Token>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i].view(text);
    }
    return out;
}

Document::Document(std::string text, const Tokenizer& tokenizer)
    : text_(std::move(text)), tokens_(tokenizer.tokenize(text_)) {}

bool Query::has_label(std::string_view label) const {
    return std::any_of(options.begin(), options.end(),
                       [&](const Option& o) { return o.label == label; });
}

std::vector<std::string> Query::labels() const {
    std::vector<std::string> out;
    out.reserve(options.size());
    for (const auto& o : options) out.push_back(o.label);
    return out;
}

std::string Query::render_options() const {
    if (options.empty()) return "(free-form question, no options)";
    std::ostringstream os;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i) os << '\n';
        os << options[i].label << ") " << options[i].text;
    }
    return os.str();
}

void Query::validate() const {
    std::set<std::string> seen;
    for (const auto& o : options) {
        if (o.label.empty()) throw Error(Errc::InvalidArgument, "option with empty label");
        if (!seen.insert(o.label).second)
            throw Error(Errc::InvalidArgument, "duplicate option label " + o.label);
    }
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_spans(std::size_t m, int n) {
    if (n <= 0) throw Error(Errc::ZeroChunks, "number of chunks must be positive");
    const auto nn = static_cast<std::size_t>(n);
    if (m < nn)
        throw Error(Errc::DocumentTooShort, std::to_string(m) + " tokens cannot fill " +
                                                std::to_string(n) + " chunks");
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    spans.reserve(nn);
    for (std::size_t i = 0; i < nn; ++i) spans.emplace_back(i * m / nn, (i + 1) * m / nn);
    spans.back().second = m;
    return spans;
}

std::vector<Chunk> split_document(const Document& doc, int n, SplitOptions opts) {
    const auto& toks = doc.tokens();
    auto spans = chunk_spans(toks.size(), n);

    if (opts.snap_window > 0) {
        const std::size_t k = opts.snap_window;
        const std::size_t m = toks.size();
        for (std::size_t i = 1; i < spans.size(); ++i) {
            const std::size_t b = spans[i].first;
            const std::size_t lo = std::max(spans[i - 1].first + 1, b > k ? b - k : 1);
            std::size_t hi = std::min(m - (spans.size() - i), b + k);
            if (i + 1 < spans.size()) hi = std::min(hi, spans[i + 1].first - 1);
            std::optional<std::size_t> best;
            for (std::size_t j = lo; j <= hi; ++j) {
                if (!ends_sentence(toks[j - 1].view(doc.text()))) continue;
                auto dist = [&](std::size_t x) { return x > b ? x - b : b - x; };
                if (!best || dist(j) < dist(*best)) best = j;
            }
            if (best) {
                spans[i].first = *best;
                spans[i - 1].second = *best;
            }
        }
    }

    std::vector<Chunk> chunks;
    chunks.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const auto [first, last] = spans[i];
        const std::size_t byte_begin = toks[first].begin;
        const std::size_t byte_end = last < toks.size() ? toks[last].begin : doc.text().size();
        std::string text = doc.text().substr(byte_begin, byte_end - byte_begin);
        while (!text.empty() && is_space_byte(static_cast<unsigned char>(text.back())))
            text.pop_back();
        chunks.push_back({static_cast<int>(i), std::move(text), spans[i]});
    }
    return chunks;
}

} // namespace toa
