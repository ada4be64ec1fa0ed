// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/csv_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wgmrf {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write file: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open file: " + path);
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& path, int line_no) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (end && *end != '\0' && *end != '\r'))
    throw Error(ErrorCode::parse_error,
                path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& header) {
  auto out = open_out(path);
  out << header << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << "\n";
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<double> values;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1) continue;  // header
    values.push_back(parse_double(split_csv_line(line).at(0), path, line_no));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(),
                                     static_cast<Eigen::Index>(values.size()));
}

void write_samples_csv(const std::string& path, const FieldSamples& samples) {
  auto out = open_out(path);
  out << "sample_id";
  for (int j = 0; j < samples.node_count(); ++j) out << ',' << j;
  out << "\n";
  for (int k = 0; k < samples.sample_count(); ++k) {
    if (static_cast<int>(samples.sample_ids.size()) == samples.sample_count())
      out << samples.sample_ids[k];
    else
      out << k;
    for (int j = 0; j < samples.node_count(); ++j)
      out << ',' << format_double(samples.values(k, j));
    out << "\n";
  }
}

FieldSamples read_samples_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  int line_no = 0;
  int width = -1;
  std::vector<std::string> ids;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1) {
      if (fields.empty() || fields[0] != "sample_id")
        throw Error(ErrorCode::parse_error,
                    path + ": expected header starting with sample_id");
      width = static_cast<int>(fields.size()) - 1;
      continue;
    }
    if (static_cast<int>(fields.size()) != width + 1)
      throw Error(ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": wrong column count");
    ids.push_back(fields[0]);
    for (int j = 0; j < width; ++j)
      values.push_back(parse_double(fields[j + 1], path, line_no));
  }
  if (width <= 0 || ids.empty())
    throw Error(ErrorCode::empty_input, path + ": no samples");
  FieldSamples samples;
  samples.values = Eigen::Map<
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(ids.size()), width);
  samples.sample_ids = std::move(ids);
  samples.validate();
  return samples;
}

void write_weights_csv(const std::string& path, const WeightVector& w) {
  write_vector_csv(path, w.values, "weight");
}

WeightVector read_weights_csv(const std::string& path) {
  WeightVector w;
  Eigen::VectorXd raw = read_vector_csv(path);
  // Arbitrary weight files are accepted; normalize defensively against
  // formatting roundoff but reject genuine violations.
  double total = raw.sum();
  if ((raw.array() < 0.0).any() || total <= 0.0)
    throw Error(ErrorCode::invalid_argument,
                path + ": weights must be nonnegative with positive sum");
  w.values = raw / total;
  w.validate();
  return w;
}

void write_basis_csv(const std::string& path, const Basis& basis) {
  auto out = open_out(path);
  for (int c = 0; c < basis.size(); ++c) out << (c ? "," : "") << 'b' << (c + 1);
  out << "\n";
  for (int r = 0; r < basis.dimension(); ++r) {
    for (int c = 0; c < basis.size(); ++c)
      out << (c ? "," : "") << format_double(basis.vectors(r, c));
    out << "\n";
  }
}

Basis read_basis_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  int line_no = 0;
  int cols = -1;
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1) {
      cols = static_cast<int>(fields.size());
      continue;
    }
    if (static_cast<int>(fields.size()) != cols)
      throw Error(ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": wrong column count");
    for (auto& f : fields) values.push_back(parse_double(f, path, line_no));
    ++rows;
  }
  if (cols <= 0 || rows == 0)
    throw Error(ErrorCode::empty_input, path + ": no basis vectors");
  Basis basis;
  basis.vectors = Eigen::Map<
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return basis;
}

void write_error_report_csv(const std::string& path, const ErrorReport& report,
                            bool zero_fill) {
  auto out = open_out(path);
  out << "node,count,mse\n";
  for (Eigen::Index j = 0; j < report.per_node.size(); ++j) {
    out << j << ',' << report.exceedance_counts[j] << ',';
    if (report.exceedance_counts[j] > 0)
      out << format_double(report.per_node[j]);
    else if (zero_fill)
      out << format_double(0.0);
    out << "\n";
  }
}

void write_scatter_csv(const std::string& path, const ScatterResult& scatter) {
  auto out = open_out(path);
  out << "observed,predicted\n";
  for (auto [y, p] : scatter.pairs)
    out << format_double(y) << ',' << format_double(p) << "\n";
}

void save_pipeline_model(const std::string& dir, const PipelineModel& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_basis_csv(dir + "/low_basis.csv", model.low_basis);
  write_basis_csv(dir + "/high_basis.csv", model.high_basis);
  {
    auto out = open_out(dir + "/coef_map.csv");
    for (int c = 0; c < model.coefficient_map.cols(); ++c)
      out << (c ? "," : "") << 'x' << (c + 1);
    out << "\n";
    for (int r = 0; r < model.coefficient_map.rows(); ++r) {
      for (int c = 0; c < model.coefficient_map.cols(); ++c)
        out << (c ? "," : "") << format_double(model.coefficient_map(r, c));
      out << "\n";
    }
  }
  write_vector_csv(dir + "/intercept.csv", model.intercept, "intercept");
  write_vector_csv(dir + "/means_x.csv", model.mean_low, "mean");
  write_vector_csv(dir + "/means_y.csv", model.mean_high, "mean");
  json meta;
  meta["schema_version"] = 1;
  meta["p_x"] = model.low_basis.size();
  meta["p_y"] = model.high_basis.size();
  meta["m_x"] = model.low_basis.dimension();
  meta["m_y"] = model.high_basis.dimension();
  meta["ridge_penalty"] = model.ridge_penalty;
  meta["low_basis_fingerprint"] = model.low_basis.weights_fingerprint;
  meta["high_basis_fingerprint"] = model.high_basis.weights_fingerprint;
  auto out = open_out(dir + "/model.json");
  out << meta.dump(2) << "\n";
}

PipelineModel load_pipeline_model(const std::string& dir) {
  PipelineModel model;
  model.low_basis = read_basis_csv(dir + "/low_basis.csv");
  model.high_basis = read_basis_csv(dir + "/high_basis.csv");
  {
    auto in = open_in(dir + "/coef_map.csv");
    std::string line;
    int line_no = 0;
    int cols = -1;
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (line_no == 1) {
        cols = static_cast<int>(fields.size());
        continue;
      }
      for (auto& f : fields)
        values.push_back(parse_double(f, dir + "/coef_map.csv", line_no));
      ++rows;
    }
    model.coefficient_map = Eigen::Map<
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), rows, cols);
  }
  model.intercept = read_vector_csv(dir + "/intercept.csv");
  model.mean_low = read_vector_csv(dir + "/means_x.csv");
  model.mean_high = read_vector_csv(dir + "/means_y.csv");
  auto in = open_in(dir + "/model.json");
  json meta = json::parse(in);
  model.ridge_penalty = meta.value("ridge_penalty", 0.0);
  model.low_basis.weights_fingerprint = meta.value("low_basis_fingerprint", "");
  model.high_basis.weights_fingerprint = meta.value("high_basis_fingerprint", "");
  return model;
}

}  // namespace wgmrf
