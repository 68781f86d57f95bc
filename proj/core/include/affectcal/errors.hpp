#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affectcal {

// Coarse grouping used for process exit codes.
enum class ErrorCategory {
  Config,      // exit 2
  Data,        // exit 3
  Divergence,  // exit 4
  Coverage,    // exit 5
};

class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

  // Short machine-readable name, e.g. "FormatError".
  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define AFFECTCAL_DEFINE_ERROR(Name, Category)                     \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& message)                      \
        : Error(#Name, ErrorCategory::Category, message) {}        \
  };

AFFECTCAL_DEFINE_ERROR(ConfigError, Config)
AFFECTCAL_DEFINE_ERROR(FormatError, Data)
AFFECTCAL_DEFINE_ERROR(ValueError, Data)
AFFECTCAL_DEFINE_ERROR(OrderError, Data)
AFFECTCAL_DEFINE_ERROR(IoError, Data)
AFFECTCAL_DEFINE_ERROR(EmptyInputError, Data)
AFFECTCAL_DEFINE_ERROR(ShapeError, Data)
AFFECTCAL_DEFINE_ERROR(AlignError, Data)
AFFECTCAL_DEFINE_ERROR(DegenerateClassError, Data)
AFFECTCAL_DEFINE_ERROR(BatchTooSmallError, Data)
AFFECTCAL_DEFINE_ERROR(DivergenceError, Divergence)
AFFECTCAL_DEFINE_ERROR(CoverageError, Coverage)

#undef AFFECTCAL_DEFINE_ERROR

int exit_code(ErrorCategory category) noexcept;
std::string_view category_name(ErrorCategory category) noexcept;

}  // namespace affectcal
