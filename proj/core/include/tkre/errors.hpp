#pragma once

#include <stdexcept>
#include <string>

namespace tkre {

// Error categories surfaced by the CLI as "error: <category>: <message>".
enum class ErrorKind {
  Shape,
  Numeric,
  Config,
  Data,
  Parse,
  Alignment,
  State,
  Io,
  Usage,
  Compat,
  EmptySupport,
  Comparability,
  Training,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define TKRE_DEFINE_ERROR(Name, Kind)                 \
  struct Name : Error {                               \
    explicit Name(const std::string& message)         \
        : Error(ErrorKind::Kind, message) {}          \
  }

TKRE_DEFINE_ERROR(ShapeError, Shape);
TKRE_DEFINE_ERROR(NumericError, Numeric);
TKRE_DEFINE_ERROR(ConfigError, Config);
TKRE_DEFINE_ERROR(DataError, Data);
TKRE_DEFINE_ERROR(ParseError, Parse);
TKRE_DEFINE_ERROR(AlignmentError, Alignment);
TKRE_DEFINE_ERROR(StateError, State);
TKRE_DEFINE_ERROR(IoError, Io);
TKRE_DEFINE_ERROR(UsageError, Usage);
TKRE_DEFINE_ERROR(CompatError, Compat);
TKRE_DEFINE_ERROR(EmptySupportError, EmptySupport);
TKRE_DEFINE_ERROR(ComparabilityError, Comparability);
TKRE_DEFINE_ERROR(TrainingError, Training);

#undef TKRE_DEFINE_ERROR

}  // namespace tkre
