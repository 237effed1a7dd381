#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/errors.hpp"

namespace ccts {

// Column mapping for the dataset CSV format
// `series_id,time,<feature names...>,label`. An empty `features` list means
// "every column that is not series_id/time/label, in file order".
struct CsvSchema {
  std::string series_id = "series_id";
  std::string time = "time";
  std::string label = "label";
  std::vector<std::string> features;
};

enum class Imputation { Interpolate, Reject };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

// NaN cells: interior gaps are linearly interpolated in time, leading/trailing
// gaps take the nearest observed value. A feature that is missing everywhere
// in a series cannot be imputed.
inline void impute_series(TimeSeriesRecord& rec, Imputation mode) {
  const auto rows = rec.values.rows();
  for (Eigen::Index j = 0; j < rec.values.cols(); ++j) {
    bool any_nan = false;
    for (Eigen::Index m = 0; m < rows; ++m) any_nan |= std::isnan(rec.values(m, j));
    if (!any_nan) continue;
    if (mode == Imputation::Reject)
      throw ValidationError("series " + rec.id + ": missing value with imputation disabled");
    std::vector<Eigen::Index> known;
    for (Eigen::Index m = 0; m < rows; ++m)
      if (!std::isnan(rec.values(m, j))) known.push_back(m);
    if (known.empty())
      throw ValidationError("series " + rec.id + ": feature column entirely missing");
    for (Eigen::Index m = 0; m < rows; ++m) {
      if (!std::isnan(rec.values(m, j))) continue;
      auto it = std::lower_bound(known.begin(), known.end(), m);
      if (it == known.begin()) {
        rec.values(m, j) = rec.values(known.front(), j);
      } else if (it == known.end()) {
        rec.values(m, j) = rec.values(known.back(), j);
      } else {
        Eigen::Index hi = *it, lo = *(it - 1);
        double t = (rec.timestamps[static_cast<std::size_t>(m)] - rec.timestamps[static_cast<std::size_t>(lo)]) /
                   (rec.timestamps[static_cast<std::size_t>(hi)] - rec.timestamps[static_cast<std::size_t>(lo)]);
        rec.values(m, j) = rec.values(lo, j) + t * (rec.values(hi, j) - rec.values(lo, j));
      }
    }
  }
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {},
                        Imputation imputation = Imputation::Interpolate) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  auto header = detail::split_csv_line(line);

  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(path + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  const int id_col = find_col(schema.series_id);
  const int time_col = find_col(schema.time);
  const int label_col = find_col(schema.label);

  std::vector<int> feat_cols;
  std::vector<std::string> feat_names;
  if (schema.features.empty()) {
    for (int c = 0; c < static_cast<int>(header.size()); ++c)
      if (c != id_col && c != time_col && c != label_col) {
        feat_cols.push_back(c);
        feat_names.push_back(header[static_cast<std::size_t>(c)]);
      }
  } else {
    for (const auto& f : schema.features) {
      feat_cols.push_back(find_col(f));
      feat_names.push_back(f);
    }
  }
  if (feat_cols.empty()) throw SchemaError(path + ": no feature columns");

  struct Row {
    double time;
    std::vector<double> feats;
    int label;
  };
  std::map<std::string, std::vector<Row>> groups;
  std::vector<std::string> order;  // first-appearance order of series ids
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw SchemaError(path + ":" + std::to_string(line_no) + ": cell count != header");
    Row row;
    if (!detail::parse_double(cells[static_cast<std::size_t>(time_col)], row.time))
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad time value");
    double lab;
    if (!detail::parse_double(cells[static_cast<std::size_t>(label_col)], lab) ||
        lab != std::floor(lab) || lab < 0)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad label value");
    row.label = static_cast<int>(lab);
    row.feats.reserve(feat_cols.size());
    for (int c : feat_cols) {
      const auto& cell = cells[static_cast<std::size_t>(c)];
      double v;
      if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (!detail::parse_double(cell, v)) {
        throw ValidationError(path + ":" + std::to_string(line_no) + ": bad feature value '" + cell + "'");
      }
      row.feats.push_back(v);
    }
    const auto& key = cells[static_cast<std::size_t>(id_col)];
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(std::move(row));
  }
  if (groups.empty()) throw ValidationError(path + ": no data rows");

  Dataset data;
  data.feature_names = feat_names;
  int max_label = 0;
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    for (std::size_t m = 1; m < rows.size(); ++m)
      if (!(rows[m].time > rows[m - 1].time))
        throw ValidationError("series " + id + ": duplicate or non-increasing timestamp");
    TimeSeriesRecord rec;
    rec.id = id;
    rec.timestamps.reserve(rows.size());
    rec.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feat_cols.size()));
    for (std::size_t m = 0; m < rows.size(); ++m) {
      rec.timestamps.push_back(rows[m].time);
      for (std::size_t j = 0; j < rows[m].feats.size(); ++j)
        rec.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = rows[m].feats[j];
    }
    rec.label = rows.back().label;  // final-time label is authoritative
    detail::impute_series(rec, imputation);
    max_label = std::max(max_label, rec.label);
    data.records.push_back(std::move(rec));
  }
  data.class_count = std::max(2, max_label + 1);
  data.validate();
  return data;
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "series_id,time";
  for (const auto& f : data.feature_names) out << ',' << f;
  out << ",label\n";
  char buf[32];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : data.records) {
    for (int m = 0; m < r.length(); ++m) {
      out << r.id << ',' << fmt(r.timestamps[static_cast<std::size_t>(m)]);
      for (Eigen::Index j = 0; j < r.values.cols(); ++j) out << ',' << fmt(r.values(m, j));
      out << ',' << r.label << '\n';
    }
  }
}

}  // namespace ccts
