#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mkp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MKP_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

MKP_DEFINE_ERROR(EmptyCorpus)
MKP_DEFINE_ERROR(ShapeError)
MKP_DEFINE_ERROR(ConfigError)
MKP_DEFINE_ERROR(NoTarget)
MKP_DEFINE_ERROR(IndexError)
MKP_DEFINE_ERROR(EmptyInput)
MKP_DEFINE_ERROR(NumericError)
MKP_DEFINE_ERROR(StageOrderError)
MKP_DEFINE_ERROR(IoError)

#undef MKP_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mkp
