#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace toa {

enum class Errc {
    ZeroChunks,
    DocumentTooShort,
    InvalidArgument,
    InvalidConfig,
    InvalidTemplate,
    MissingBinding,
    Unparseable,
    BackendUnavailable,
    Timeout,
    PathExplosion,
    EmptyCache,
    SourceTooShort,
    ParseError,
    LengthMismatch,
    Io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure the library reports is a toa::Error carrying one of the codes above.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

} // namespace toa
