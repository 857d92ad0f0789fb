#pragma once

#include <stdexcept>
#include <string>

namespace amxfer {

// Every error raised by the library derives from Error so the CLI can map
// kinds to exit codes and machine-readable error documents.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string &what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Malformed documents or values that break a type invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string &what) : Error("validation", what) {}
};

/// Bad caller-supplied arguments (ranks, window sizes, percentiles...).
struct ArgumentError : Error {
  explicit ArgumentError(const std::string &what) : Error("argument", what) {}
};

/// A TL domain or task cannot be formed from a context.
struct DescriptorError : Error {
  explicit DescriptorError(const std::string &what) : Error("descriptor", what) {}
};

/// Tensor or frame shapes disagree.
struct ShapeError : Error {
  explicit ShapeError(const std::string &what) : Error("shape", what) {}
};

/// Training-set or labeling contract broken.
struct ContractError : Error {
  explicit ContractError(const std::string &what) : Error("contract", what) {}
};

struct LabelingError : Error {
  explicit LabelingError(const std::string &what) : Error("labeling", what) {}
};

struct TaggingError : Error {
  explicit TaggingError(const std::string &what) : Error("tagging", what) {}
};

struct IngestError : Error {
  explicit IngestError(const std::string &what) : Error("ingest", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string &what) : Error("io", what) {}
};

} // namespace amxfer
