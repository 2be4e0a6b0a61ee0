#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rapidner {

// Base of every error the library throws. `code()` is a stable identifier
// (e.g. "MalformedRow") that the CLI and the HTTP layer report verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class FileNotReadable : public Error {
 public:
  explicit FileNotReadable(const std::string& path)
      : Error("FileNotReadable", "cannot read file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("IoError", message) {}
};

class MalformedRow : public Error {
 public:
  MalformedRow(std::string path, std::size_t line, const std::string& why)
      : Error("MalformedRow",
              path + ":" + std::to_string(line) + ": malformed row: " + why),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TopicNotFound : public Error {
 public:
  explicit TopicNotFound(const std::string& label)
      : Error("TopicNotFound", "no item carries the label \"" + label + "\"") {}
};

class AmbiguousTopic : public Error {
 public:
  AmbiguousTopic(const std::string& label, std::vector<std::int64_t> ids)
      : Error("AmbiguousTopic", describe(label, ids)), ids_(std::move(ids)) {}
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

 private:
  static std::string describe(const std::string& label,
                              const std::vector<std::int64_t>& ids) {
    std::string s = "label \"" + label + "\" is carried by items";
    for (auto id : ids) s += " " + std::to_string(id);
    return s + "; pass an explicit item id";
  }
  std::vector<std::int64_t> ids_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("InvalidArgument", message) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message)
      : Error("SchemaError", message) {}
};

class NoIntroSection : public Error {
 public:
  explicit NoIntroSection(const std::string& doc_id)
      : Error("NoIntroSection", "document " + doc_id + " has no introduction") {}
};

class UnknownTypeInPriority : public Error {
 public:
  explicit UnknownTypeInPriority(const std::string& type)
      : Error("UnknownTypeInPriority",
              "entity type " + type + " is missing from the priority list") {}
};

class EmptyDictionarySet : public Error {
 public:
  EmptyDictionarySet()
      : Error("EmptyDictionarySet", "no dictionaries given to the matcher") {}
};

class MarkupMismatch : public Error {
 public:
  explicit MarkupMismatch(const std::string& message)
      : Error("MarkupMismatch", message) {}
};

class MalformedMarkup : public Error {
 public:
  explicit MalformedMarkup(const std::string& message)
      : Error("MalformedMarkup", message) {}
};

class SpanTokenMisalignment : public Error {
 public:
  SpanTokenMisalignment(const std::string& sent_id, std::size_t start,
                        std::size_t end)
      : Error("SpanTokenMisalignment",
              "span [" + std::to_string(start) + "," + std::to_string(end) +
                  ") of " + sent_id + " does not cover whole tokens") {}
};

class MalformedBIO : public Error {
 public:
  explicit MalformedBIO(const std::string& message)
      : Error("MalformedBIO", message) {}
};

class BadRatios : public Error {
 public:
  explicit BadRatios(const std::string& message) : Error("BadRatios", message) {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("LengthMismatch", "label sequences differ in length: " +
                                    std::to_string(a) + " vs " +
                                    std::to_string(b)) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what)
      : Error("EmptyInput", what + " is empty") {}
};

class RowSumMismatch : public Error {
 public:
  RowSumMismatch(std::size_t row, long sum, long raters)
      : Error("RowSumMismatch", "row " + std::to_string(row) + " sums to " +
                                    std::to_string(sum) + ", expected " +
                                    std::to_string(raters)) {}
};

class TooFewRaters : public Error {
 public:
  explicit TooFewRaters(long raters)
      : Error("TooFewRaters",
              "need at least 2 raters, got " + std::to_string(raters)) {}
};

class SentenceSetMismatch : public Error {
 public:
  explicit SentenceSetMismatch(const std::string& message)
      : Error("SentenceSetMismatch", message) {}
};

class PathExists : public Error {
 public:
  explicit PathExists(const std::string& path)
      : Error("PathExists", path + " already exists (use --force)") {}
};

class UnknownSentence : public Error {
 public:
  explicit UnknownSentence(const std::string& sent_id)
      : Error("UnknownSentence", "unknown sentence " + sent_id) {}
};

class OverlapViolation : public Error {
 public:
  explicit OverlapViolation(const std::string& message)
      : Error("OverlapViolation", message) {}
};

class MisalignedSpan : public Error {
 public:
  explicit MisalignedSpan(const std::string& message)
      : Error("MisalignedSpan", message) {}
};

class StaleRevision : public Error {
 public:
  StaleRevision(std::uint64_t expected, std::uint64_t current)
      : Error("StaleRevision",
              "client revision " + std::to_string(expected) +
                  " is stale; record is at " + std::to_string(current)),
        current_(current) {}
  std::uint64_t current() const noexcept { return current_; }

 private:
  std::uint64_t current_;
};

class BindFailure : public Error {
 public:
  explicit BindFailure(const std::string& address)
      : Error("BindFailure", "cannot bind " + address) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics)
      : Error("ConfigError", join(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const noexcept {
    return diagnostics_;
  }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string s = "invalid configuration:";
    for (const auto& line : d) s += "\n  " + line;
    return s;
  }
  std::vector<std::string> diagnostics_;
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& file,
             const Error& cause)
      : Error(cause.code(), "stage '" + stage + "' failed (" + file +
                                "): " + cause.what()),
        stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace rapidner
