#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hybrid_rank {

/// Base class for every error raised by the library. `code()` is a stable,
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), m_code(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return m_code; }

  private:
    std::string m_code;
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

class FormatError : public Error {
  public:
    explicit FormatError(const std::string& message) : Error("format_error", message) {}
};

enum class RejectReason { single_sentence, query_too_short, empty_article };

inline const char* to_string(RejectReason r) {
    switch (r) {
    case RejectReason::single_sentence: return "single_sentence";
    case RejectReason::query_too_short: return "query_too_short";
    case RejectReason::empty_article: return "empty_article";
    }
    return "unknown";
}

class RecordRejected : public Error {
  public:
    RecordRejected(RejectReason reason, const std::string& message)
        : Error("record_rejected", message), m_reason(reason) {}

    [[nodiscard]] RejectReason reason() const noexcept { return m_reason; }

  private:
    RejectReason m_reason;
};

class SizeError : public Error {
  public:
    explicit SizeError(const std::string& message) : Error("size_error", message) {}
};

class EmptyCorpus : public Error {
  public:
    explicit EmptyCorpus(const std::string& message) : Error("empty_corpus", message) {}
};

class NonFiniteGradient : public Error {
  public:
    NonFiniteGradient(std::size_t sample, const std::string& message)
        : Error("non_finite_gradient", message), m_sample(sample) {}

    /// Index of the offending sample within its batch.
    [[nodiscard]] std::size_t sample() const noexcept { return m_sample; }

  private:
    std::size_t m_sample;
};

class ShapeMismatch : public Error {
  public:
    explicit ShapeMismatch(const std::string& message) : Error("shape_mismatch", message) {}
};

class IdMismatch : public Error {
  public:
    IdMismatch(std::vector<std::string> ids, const std::string& message)
        : Error("id_mismatch", message), m_ids(std::move(ids)) {}

    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return m_ids; }

  private:
    std::vector<std::string> m_ids;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& message)
        : Error("parse_error", "line " + std::to_string(line) + ": " + message), m_line(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

class MissingGold : public Error {
  public:
    explicit MissingGold(const std::string& message) : Error("missing_gold", message) {}
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class MissingArtifact : public Error {
  public:
    explicit MissingArtifact(const std::string& message) : Error("missing_artifact", message) {}
};

class UsageError : public Error {
  public:
    explicit UsageError(const std::string& message) : Error("usage_error", message) {}
};

}  // namespace hybrid_rank
