// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wgmrf/basis_solver.hpp"
#include "wgmrf/evaluation.hpp"
#include "wgmrf/multifidelity.hpp"
#include "wgmrf/weights.hpp"

namespace wgmrf {

// All numeric CSV output uses '.'-decimal %.17g formatting, so identical
// inputs round-trip to byte-identical files.
std::string format_double(double v);

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& header);
Eigen::VectorXd read_vector_csv(const std::string& path);

// FieldSamples CSV: header "sample_id,0,1,...,m-1", one row per sample.
void write_samples_csv(const std::string& path, const FieldSamples& samples);
FieldSamples read_samples_csv(const std::string& path);

void write_weights_csv(const std::string& path, const WeightVector& w);
WeightVector read_weights_csv(const std::string& path);

// Basis CSV: header b1..bp, m rows.
void write_basis_csv(const std::string& path, const Basis& basis);
Basis read_basis_csv(const std::string& path);

// ErrorReport CSV: node,count,mse with empty mse where undefined; the
// zero_fill flag exports zeros instead (plotting convention).
void write_error_report_csv(const std::string& path, const ErrorReport& report,
                            bool zero_fill = false);

void write_scatter_csv(const std::string& path, const ScatterResult& scatter);

void save_pipeline_model(const std::string& dir, const PipelineModel& model);
PipelineModel load_pipeline_model(const std::string& dir);

}  // namespace wgmrf
