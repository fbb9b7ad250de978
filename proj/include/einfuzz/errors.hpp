#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace einfuzz {

// Parse failures carry the byte offset of the offending character.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A document is missing a field, has an ill-typed field, or violates a
// structural rule of the kernel schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor data does not fit the shape implied by the kernel's dims.
class ShapeMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A storage format was requested for a rank it cannot represent.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stored tensor's payload arrays violate their structural invariants.
class CorruptPayloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The harness itself is misconfigured (missing adapter binary, bad fault
// name, ...). Distinct from compiler failures, which are outcomes.
class BackendConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace einfuzz
