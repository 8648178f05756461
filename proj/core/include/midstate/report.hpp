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

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "midstate/image.hpp"

namespace midstate {

/// CSV with a fixed column order. Rows are maps, so the order in which
/// fields are filled never changes the output.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  using Row = std::map<std::string, std::string>;
  /// Throws InputError when a column is missing or an extra key is present.
  void add_row(const Row& row);
  static std::string cell(double value);

  const std::vector<std::string>& columns() const { return columns_; }
  size_t rows() const { return rows_.size(); }
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Tiles equally sized images into rows x cols cells; the result is
/// (rows * H) x (cols * W).
Image make_grid(const std::vector<std::vector<Image>>& cells);
void write_grid(const std::filesystem::path& path, const std::vector<std::vector<Image>>& cells);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace midstate
