#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decoding a TLV frame failed. `offset` is the byte position of the first
// offending element within the frame, `tag` the TLV tag when known (0 otherwise).
class MalformedFrame : public Error {
 public:
  MalformedFrame(const std::string& what, std::size_t offset, int tag = 0)
      : Error("malformed frame: " + what + " (offset " + std::to_string(offset) +
              (tag ? ", tag " + std::to_string(tag) : std::string()) + ")"),
        offset_(offset),
        tag_(tag) {}

  std::size_t offset() const noexcept { return offset_; }
  int tag() const noexcept { return tag_; }

 private:
  std::size_t offset_;
  int tag_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Line-oriented configuration/scenario text failed to parse or validate.
class LineError : public Error {
 public:
  LineError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DuplicateKey : public Error {
 public:
  using Error::Error;
};

class StoreFull : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class UnknownId : public Error {
 public:
  using Error::Error;
};

}  // namespace mdf
