#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace marginlab {

// Randomized construction exhausted its retry budget. Carries the worst
// violating pair seen on the last attempt so callers can report it.
class construction_error : public std::runtime_error {
 public:
  construction_error(const std::string& msg, std::int64_t row, int doc,
                     double value)
      : std::runtime_error(msg), row_(row), doc_(doc), value_(value) {}
  explicit construction_error(const std::string& msg)
      : std::runtime_error(msg), row_(-1), doc_(-1), value_(0.0) {}

  std::int64_t worst_row() const { return row_; }
  int worst_doc() const { return doc_; }
  double worst_value() const { return value_; }

 private:
  std::int64_t row_;
  int doc_;
  double value_;
};

// Malformed input file (bad JSON, bad schema, bad values). The message
// includes the offending path and, for JSON syntax errors, a byte offset.
class file_format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace marginlab
