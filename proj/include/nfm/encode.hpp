#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/types.hpp"

namespace nfm {

// A header-line TSV of categorical columns (the raw usage-log schema).
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  Index column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<Index>(i);
    }
    throw std::invalid_argument("no column named '" + name + "'");
  }
};

inline RawTable read_tsv(std::istream& in) {
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  auto split_tabs = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
      const auto tab = s.find('\t', pos);
      out.emplace_back(s.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (table.columns.empty()) {
      table.columns = std::move(fields);
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw ParseError(line_no, "expected " + std::to_string(table.columns.size()) +
                                    " tab-separated fields, got " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.columns.empty()) throw std::invalid_argument("raw table has no header line");
  return table;
}

// One-hot layout: each encoded column owns a contiguous block of feature
// indices; distinct values are sorted lexicographically within the block.
struct OneHotColumn {
  std::string name;
  Index offset = 0;
  std::vector<std::string> values;  // sorted

  Index size() const { return static_cast<Index>(values.size()); }
  FeatureRange range() const { return {offset, offset + size()}; }

  Index feature_of(const std::string& value) const {
    const auto it = std::lower_bound(values.begin(), values.end(), value);
    if (it == values.end() || *it != value) {
      throw std::invalid_argument("value '" + value + "' not in column '" + name + "'");
    }
    return offset + static_cast<Index>(it - values.begin());
  }
};

struct OneHotLayout {
  std::vector<OneHotColumn> columns;
  Index num_features = 0;

  const OneHotColumn& column(const std::string& name) const {
    for (const auto& c : columns) {
      if (c.name == name) return c;
    }
    throw std::invalid_argument("no encoded column named '" + name + "'");
  }
};

// Encodes the chosen columns of a positive-only log table: one instance per
// row, one active index per column, every value 1, every target +1.
inline std::pair<Dataset<double>, OneHotLayout> encode_one_hot(
    const RawTable& table, const std::vector<std::string>& use_columns) {
  if (use_columns.empty()) throw std::invalid_argument("encode_one_hot: no columns selected");
  OneHotLayout layout;
  std::vector<Index> raw_cols;
  for (const auto& name : use_columns) {
    raw_cols.push_back(table.column_index(name));
  }

  Index offset = 0;
  for (std::size_t c = 0; c < use_columns.size(); ++c) {
    OneHotColumn col;
    col.name = use_columns[c];
    col.offset = offset;
    col.values.reserve(64);
    for (const auto& row : table.rows) {
      col.values.push_back(row[static_cast<std::size_t>(raw_cols[c])]);
    }
    std::sort(col.values.begin(), col.values.end());
    col.values.erase(std::unique(col.values.begin(), col.values.end()), col.values.end());
    offset += col.size();
    layout.columns.push_back(std::move(col));
  }
  layout.num_features = offset;

  Dataset<double> data;
  data.num_features = std::max<Index>(1, offset);
  data.instances.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    SparseInstance<double> inst;
    inst.target = 1.0;
    inst.indices.reserve(use_columns.size());
    inst.values.assign(use_columns.size(), 1.0);
    for (std::size_t c = 0; c < use_columns.size(); ++c) {
      inst.indices.push_back(
          layout.columns[c].feature_of(row[static_cast<std::size_t>(raw_cols[c])]));
    }
    data.instances.push_back(std::move(inst));
  }
  return {std::move(data), std::move(layout)};
}

}  // namespace nfm
