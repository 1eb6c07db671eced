#include "eigenshrink/errors.hpp"

namespace eigenshrink {

SolverError::SolverError(const std::string& what, double last_residual)
    : std::runtime_error(what), last_residual_(last_residual) {}

}  // namespace eigenshrink
