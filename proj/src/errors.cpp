// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/errors.hpp"

namespace wgmrf {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::isolated_node: return "isolated_node";
    case ErrorCode::disconnected_graph: return "disconnected_graph";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::convergence_failure: return "convergence_failure";
    case ErrorCode::degenerate_direction: return "degenerate_direction";
    case ErrorCode::line_search_failure: return "line_search_failure";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::empty_weights: return "empty_weights";
    case ErrorCode::degenerate_grid: return "degenerate_grid";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::correlation_undefined: return "correlation_undefined";
    case ErrorCode::sample_mismatch: return "sample_mismatch";
    case ErrorCode::dimension_cap: return "dimension_cap";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

}  // namespace wgmrf
