// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace wgmrf {

enum class ErrorCode {
  parse_error,
  isolated_node,
  disconnected_graph,
  not_positive_definite,
  dimension_mismatch,
  convergence_failure,
  degenerate_direction,
  line_search_failure,
  empty_input,
  empty_weights,
  degenerate_grid,
  insufficient_data,
  correlation_undefined,
  sample_mismatch,
  dimension_cap,
  invalid_argument,
  io_error,
  config_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace wgmrf
