#include "ngm/error.hpp"

namespace ngm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::invalid_data: return "invalid_data";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate_perturbation: return "degenerate_perturbation";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::training_failure: return "training_failure";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration:
    case ErrorKind::domain: return 2;
    case ErrorKind::invalid_data: return 3;
    case ErrorKind::degenerate_perturbation:
    case ErrorKind::numerical: return 4;
    case ErrorKind::training_failure: return 5;
  }
  return 1;
}

}  // namespace ngm
