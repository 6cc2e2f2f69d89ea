#pragma once

// Tabular dataset: an n x d value matrix plus per-column metadata. Discrete
// columns hold integer codes in [0, cardinality). Persistence is a CSV of
// values plus a JSON sidecar carrying the column metadata.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "calibench/rng.hpp"

namespace calibench::data {

enum class ColumnKind { Continuous, Discrete };

struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  int cardinality = 0;  // discrete columns only
};

class Dataset {
 public:
  Dataset(Eigen::MatrixXd values, std::vector<ColumnInfo> columns)
      : values_(std::move(values)), columns_(std::move(columns)) {
    if (static_cast<int>(columns_.size()) != values_.cols())
      throw std::invalid_argument("Dataset: column metadata does not match value width");
    for (int c = 0; c < values_.cols(); ++c) {
      const auto& info = columns_[static_cast<std::size_t>(c)];
      if (info.kind != ColumnKind::Discrete) continue;
      if (info.cardinality < 1)
        throw std::invalid_argument("Dataset: discrete column needs cardinality >= 1");
      for (int r = 0; r < values_.rows(); ++r) {
        double v = values_(r, c);
        if (v != std::floor(v) || v < 0 || v >= info.cardinality)
          throw std::invalid_argument("Dataset: discrete value outside [0, cardinality) in column " +
                                      info.name);
      }
    }
  }

  int rows() const { return static_cast<int>(values_.rows()); }
  int cols() const { return static_cast<int>(values_.cols()); }
  double value(int r, int c) const { return values_(r, c); }
  const Eigen::MatrixXd& matrix() const { return values_; }
  const std::vector<ColumnInfo>& columns() const { return columns_; }
  const ColumnInfo& column(int c) const { return columns_.at(static_cast<std::size_t>(c)); }

  bool all_discrete() const {
    for (const auto& c : columns_)
      if (c.kind != ColumnKind::Discrete) return false;
    return !columns_.empty();
  }

 private:
  Eigen::MatrixXd values_;
  std::vector<ColumnInfo> columns_;
};

// Uniform with-replacement resample of the same size.
inline Dataset bootstrap_resample(const Dataset& ds, std::uint64_t seed) {
  if (ds.rows() == 0) throw std::domain_error("bootstrap_resample: empty dataset");
  rng::Stream rs(seed, "bootstrap");
  Eigen::MatrixXd out(ds.rows(), ds.cols());
  for (int r = 0; r < ds.rows(); ++r) {
    int src = static_cast<int>(rs.uniform_int(static_cast<std::uint64_t>(ds.rows())));
    out.row(r) = ds.matrix().row(src);
  }
  return Dataset(std::move(out), ds.columns());
}

// Zero-mean, unit-variance columns using the population (divide-by-n)
// variance. A zero-variance column is centered and passed through unscaled.
inline Dataset standardize(const Dataset& ds) {
  if (ds.rows() == 0) throw std::domain_error("standardize: empty dataset");
  Eigen::MatrixXd out = ds.matrix();
  double n = static_cast<double>(ds.rows());
  std::vector<ColumnInfo> cols = ds.columns();
  for (int c = 0; c < ds.cols(); ++c) {
    double mu = out.col(c).mean();
    out.col(c).array() -= mu;
    double var = out.col(c).squaredNorm() / n;
    if (var > 0.0) out.col(c) /= std::sqrt(var);
    cols[static_cast<std::size_t>(c)].kind = ColumnKind::Continuous;
    cols[static_cast<std::size_t>(c)].cardinality = 0;
  }
  return Dataset(std::move(out), std::move(cols));
}

namespace detail {

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// CSV of values (header row of column names) next to a <stem>.columns.json
// sidecar with the metadata.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + csv_path.string());
  for (int c = 0; c < ds.cols(); ++c) out << (c ? "," : "") << ds.column(c).name;
  out << "\n";
  for (int r = 0; r < ds.rows(); ++r) {
    for (int c = 0; c < ds.cols(); ++c)
      out << (c ? "," : "") << detail::format_value(ds.value(r, c));
    out << "\n";
  }

  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : ds.columns()) {
    nlohmann::json jc = {{"name", c.name},
                         {"kind", c.kind == ColumnKind::Discrete ? "discrete" : "continuous"}};
    if (c.kind == ColumnKind::Discrete) jc["cardinality"] = c.cardinality;
    cols.push_back(jc);
  }
  nlohmann::json side = {{"n", ds.rows()}, {"columns", cols}};
  std::filesystem::path side_path = csv_path;
  side_path.replace_extension(".columns.json");
  std::ofstream sout(side_path);
  sout << side.dump(2) << "\n";
}

inline Dataset read_dataset(const std::filesystem::path& csv_path) {
  std::filesystem::path side_path = csv_path;
  side_path.replace_extension(".columns.json");
  std::ifstream sin(side_path);
  if (!sin) throw std::runtime_error("read_dataset: missing sidecar " + side_path.string());
  nlohmann::json side = nlohmann::json::parse(sin);

  std::vector<ColumnInfo> cols;
  for (const auto& jc : side.at("columns")) {
    ColumnInfo c;
    c.name = jc.at("name").get<std::string>();
    c.kind = jc.at("kind").get<std::string>() == "discrete" ? ColumnKind::Discrete
                                                            : ColumnKind::Continuous;
    if (c.kind == ColumnKind::Discrete) c.cardinality = jc.at("cardinality").get<int>();
    cols.push_back(c);
  }

  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + csv_path.string());
  std::string line;
  std::getline(in, line);  // header
  int n = side.at("n").get<int>();
  Eigen::MatrixXd values(n, static_cast<int>(cols.size()));
  int r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (r >= n) throw std::runtime_error("read_dataset: more rows than sidecar declares");
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("read_dataset: short row in " + csv_path.string());
      values(r, c) = std::stod(cell);
    }
    ++r;
  }
  if (r != n) throw std::runtime_error("read_dataset: fewer rows than sidecar declares");
  return Dataset(std::move(values), std::move(cols));
}

}  // namespace calibench::data
