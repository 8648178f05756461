// Copyright 2026 The midstate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "midstate/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "midstate/errors.hpp"

#include "fs_util.hpp"

namespace midstate {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw InputError("CSV table needs at least one column");
}

void CsvTable::add_row(const Row& row) {
  if (row.size() != columns_.size()) throw InputError("CSV row has " + std::to_string(row.size()) + " fields, expected " + std::to_string(columns_.size()));
  std::vector<std::string> cells;
  for (const auto& c : columns_) {
    const auto it = row.find(c);
    if (it == row.end()) throw InputError("CSV row lacks column '" + c + "'");
    cells.push_back(it->second);
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::cell(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  for (size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << quote(columns_[i]);
  out << "\n";
  for (const auto& row : rows_) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote(row[i]);
    out << "\n";
  }
  return out.str();
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, to_string()); }

Image make_grid(const std::vector<std::vector<Image>>& cells) {
  if (cells.empty() || cells.front().empty()) throw InputError("image grid is empty");
  const int h = cells.front().front().height, w = cells.front().front().width;
  const int cols = static_cast<int>(cells.front().size());
  Image out(static_cast<int>(cells.size()) * h, cols * w);
  for (size_t r = 0; r < cells.size(); ++r) {
    if (static_cast<int>(cells[r].size()) != cols) throw InputError("image grid rows differ in length");
    for (int c = 0; c < cols; ++c) {
      const auto& img = cells[r][c];
      if (img.height != h || img.width != w) throw InputError("image grid cells differ in size");
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int k = 0; k < Image::kChannels; ++k) out.at(static_cast<int>(r) * h + y, c * w + x, k) = img.at(y, x, k);
    }
  }
  return out;
}

void write_grid(const std::filesystem::path& path, const std::vector<std::vector<Image>>& cells) {
  detail::ensure_parent(path);
  write_png(path, make_grid(cells));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text(path, value.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace midstate
