#ifndef MRASH_IO_HPP
#define MRASH_IO_HPP

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrash/mr_ash.hpp"
#include "mrash/simlab.hpp"

namespace mrash::io {

/// Numeric table from a comma-separated file. The header row is mandatory;
/// ragged or non-numeric rows are rejected with ParseError.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  int column_index(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
CsvTable read_csv(std::istream& in, const std::string& origin = "<stream>");

/// Doubles are written with enough digits to round-trip exactly.
std::string format_double(double value);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

/// Split a table into a response column (by name, or by 0-based index when
/// `response` parses as an integer) and the remaining predictor columns.
struct Dataset {
  RegressionData data;
  std::vector<std::string> feature_names;
  std::string response_name;
};
Dataset split_response(const CsvTable& table, const std::string& response);

/// key = value scenario files; '#' starts a comment.
sim::SimScenario read_scenario(const std::string& path);
sim::SimScenario parse_scenario(std::istream& in, const std::string& origin = "<stream>");

/// Fit artifact (JSON) with every field needed to reproduce predictions.
std::string fit_to_json(const VebFit& fit, const std::vector<std::string>& feature_names);
struct LoadedFit {
  VebFit fit;
  std::vector<std::string> feature_names;
};
LoadedFit fit_from_json(const std::string& text);
LoadedFit read_fit(const std::string& path);
void write_fit(const std::string& path, const VebFit& fit,
               const std::vector<std::string>& feature_names);

std::string benchmark_csv(const std::vector<sim::EvalReport>& reports);
std::string aggregate_csv(const std::vector<sim::AggregateRow>& rows);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace mrash::io

#endif
