#include "mrash/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mrash/errors.hpp"

namespace mrash::io {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& token, const std::string& origin, int line_no) {
  const std::string t = trim(token);
  const char* begin = t.data();
  const char* end = begin + t.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(origin + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
  }
  return value;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(std::istream& in, const std::string& origin) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file");
  table.header = split_commas(line);
  const std::size_t width = table.header.size();
  if (width == 0) throw ParseError(origin + ": empty header row");

  std::vector<double> buffer;
  int rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != width) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) buffer.push_back(parse_double(f, origin, line_no));
    ++rows;
  }
  table.values.resize(rows, static_cast<int>(width));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < static_cast<int>(width); ++j) {
      table.values(i, j) = buffer[static_cast<std::size_t>(i) * width + j];
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return read_csv(in, path);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (int i = 0; i < values.rows(); ++i) {
    for (int j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

Dataset split_response(const CsvTable& table, const std::string& response) {
  int index = -1;
  try {
    std::size_t used = 0;
    index = std::stoi(response, &used);
    if (used != response.size()) index = -1;
  } catch (...) {
    index = -1;
  }
  if (index < 0) index = table.column_index(response);
  if (index < 0 || index >= static_cast<int>(table.header.size())) {
    throw ParseError("response column '" + response + "' not found");
  }
  const int p = static_cast<int>(table.header.size()) - 1;
  if (p < 1) throw ShapeError("data set has no predictor columns");
  if (table.values.rows() < 1) throw ShapeError("data set has no rows");

  Dataset out;
  out.response_name = table.header[index];
  Eigen::MatrixXd x(table.values.rows(), p);
  int col = 0;
  for (int j = 0; j < static_cast<int>(table.header.size()); ++j) {
    if (j == index) continue;
    x.col(col) = table.values.col(j);
    out.feature_names.push_back(table.header[j]);
    ++col;
  }
  out.data = RegressionData(std::move(x), table.values.col(index));
  return out;
}

sim::SimScenario parse_scenario(std::istream& in, const std::string& origin) {
  sim::SimScenario scn;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "id") {
        scn.id = value;
      } else if (key == "n") {
        scn.n = std::stoi(value);
      } else if (key == "p") {
        scn.p = std::stoi(value);
      } else if (key == "s") {
        scn.s = std::stoi(value);
      } else if (key == "design") {
        if (value == "iid_normal") scn.design = sim::DesignType::IidNormal;
        else if (value == "equicorrelated") scn.design = sim::DesignType::Equicorrelated;
        else if (value == "external") scn.design = sim::DesignType::External;
        else throw ParseError(origin + ": unknown design '" + value + "'");
      } else if (key == "rho") {
        scn.rho = std::stod(value);
      } else if (key == "design_file") {
        scn.design_file = value;
      } else if (key == "signal_dist") {
        if (value == "normal") scn.signal = sim::SignalDist::Normal;
        else if (value == "uniform") scn.signal = sim::SignalDist::Uniform;
        else if (value == "laplace") scn.signal = sim::SignalDist::Laplace;
        else if (value == "t") scn.signal = sim::SignalDist::StudentT;
        else if (value == "point_mass") scn.signal = sim::SignalDist::PointMass;
        else throw ParseError(origin + ": unknown signal_dist '" + value + "'");
      } else if (key == "signal_df") {
        scn.signal_df = std::stoi(value);
      } else if (key == "noise_dist") {
        if (value == "normal") scn.noise = sim::NoiseDist::Normal;
        else if (value == "uniform") scn.noise = sim::NoiseDist::Uniform;
        else if (value == "laplace") scn.noise = sim::NoiseDist::Laplace;
        else if (value == "t") scn.noise = sim::NoiseDist::StudentT;
        else throw ParseError(origin + ": unknown noise_dist '" + value + "'");
      } else if (key == "noise_df") {
        scn.noise_df = std::stoi(value);
      } else if (key == "pve") {
        scn.pve = std::stod(value);
      } else if (key == "seed") {
        scn.seed = std::stoull(value);
      } else {
        throw ParseError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  return scn;
}

sim::SimScenario read_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  return parse_scenario(in, path);
}

std::string fit_to_json(const VebFit& fit, const std::vector<std::string>& feature_names) {
  json j;
  j["model"] = "mr_ash";
  j["b_bar"] = vector_to_json(fit.b_bar);
  j["grid"] = vector_to_json(fit.prior.variances);
  j["pi"] = vector_to_json(fit.prior.weights);
  j["sigma2"] = fit.sigma2;
  j["intercept"] = fit.intercept;
  j["n_outer_iters"] = fit.n_outer_iters;
  j["converged"] = fit.converged;
  j["grid_warning"] = fit.grid_warning;
  j["elbo"] = fit.elbo_trace.empty() ? json() : json(fit.elbo_trace.back());
  j["feature_names"] = feature_names;

  json settings;
  settings["init"] = fit.settings.init == InitMode::Null
                         ? "null"
                         : (fit.settings.init == InitMode::Lasso ? "lasso" : "provided");
  switch (fit.settings.order) {
    case CoordinateOrder::Natural: settings["order"] = "natural"; break;
    case CoordinateOrder::Random: settings["order"] = "random"; break;
    case CoordinateOrder::Custom: settings["order"] = "custom"; break;
    case CoordinateOrder::LassoPath: settings["order"] = "lasso-path"; break;
  }
  settings["max_outer"] = fit.settings.max_outer;
  settings["tol"] = fit.settings.tol;
  settings["fix_prior"] = fit.settings.fix_prior;
  settings["fix_sigma2"] = fit.settings.fix_sigma2;
  settings["cv_folds"] = fit.settings.cv_folds;
  settings["seed"] = fit.settings.seed;
  j["settings"] = settings;
  return j.dump(2) + "\n";
}

LoadedFit fit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("fit artifact: invalid JSON: ") + e.what());
  }
  LoadedFit out;
  try {
    out.fit.b_bar = vector_from_json(j.at("b_bar"));
    out.fit.prior.variances = vector_from_json(j.at("grid"));
    out.fit.prior.weights = vector_from_json(j.at("pi"));
    out.fit.sigma2 = j.at("sigma2").get<double>();
    out.fit.intercept = j.at("intercept").get<double>();
    out.fit.n_outer_iters = j.value("n_outer_iters", 0);
    out.fit.converged = j.value("converged", false);
    out.fit.grid_warning = j.value("grid_warning", false);
    if (j.contains("feature_names")) {
      out.feature_names = j["feature_names"].get<std::vector<std::string>>();
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("fit artifact: missing or malformed field: ") + e.what());
  }
  return out;
}

LoadedFit read_fit(const std::string& path) { return fit_from_json(read_text(path)); }

void write_fit(const std::string& path, const VebFit& fit,
               const std::vector<std::string>& feature_names) {
  write_text(path, fit_to_json(fit, feature_names));
}

std::string benchmark_csv(const std::vector<sim::EvalReport>& reports) {
  std::ostringstream out;
  out << "scenario,replicate,method,rmse,rmse_scaled,rrmse,seconds\n";
  for (const auto& r : reports) {
    out << r.scenario << ',' << r.replicate << ',' << r.method << ',' << format_double(r.rmse)
        << ',' << format_double(r.rmse_scaled) << ',' << format_double(r.rrmse) << ','
        << format_double(r.seconds) << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const std::vector<sim::AggregateRow>& rows) {
  std::ostringstream out;
  out << "scenario,method,mean_rmse_scaled,median_rmse_scaled,mean_rrmse,mean_seconds,n_ok\n";
  for (const auto& row : rows) {
    out << row.scenario << ',' << row.method << ',' << format_double(row.mean_rmse_scaled) << ','
        << format_double(row.median_rmse_scaled) << ',' << format_double(row.mean_rrmse) << ','
        << format_double(row.mean_seconds) << ',' << row.n_ok << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mrash::io
