#ifndef DOCNER_ERROR_H_
#define DOCNER_ERROR_H_

#include <stdexcept>
#include <string>

namespace docner {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus, vocab or config input. Carries the 1-based line number
// when the failure can be attributed to one.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message
                       : message),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace docner

#endif  // DOCNER_ERROR_H_
