#include "affectcal/errors.hpp"

namespace affectcal {

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config:
      return 2;
    case ErrorCategory::Data:
      return 3;
    case ErrorCategory::Divergence:
      return 4;
    case ErrorCategory::Coverage:
      return 5;
  }
  return 1;
}

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config:
      return "config";
    case ErrorCategory::Data:
      return "data";
    case ErrorCategory::Divergence:
      return "divergence";
    case ErrorCategory::Coverage:
      return "coverage";
  }
  return "unknown";
}

}  // namespace affectcal
