/*
 * Copyright 2026 The CCFV Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Optional run-configuration file for the ccfv CLI.
//
// The file is plain `key = value` text; keys are long flag names without the
// leading dashes (`metric = kl`, `pair-budget = 500`). Blank lines and lines
// starting with '#' are ignored, values may be double-quoted. Entries are
// appended as flags only for keys the command line does not already set, so
// flags always win.

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ccfv/error.hpp"

namespace ccfv::cli {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Appends config-file entries to an argument vector that excludes the
// program name. Whitespace-separated values become multiple arguments (for
// list flags such as `models`).
inline std::vector<std::string> merge_config_args(const std::vector<std::string>& args,
                                                  const std::map<std::string, std::string>& config) {
  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> out(args);
  for (const auto& [key, value] : config) {
    if (given.contains(key) || key == "config") continue;
    if (value == "true") {
      out.push_back("--" + key);
      continue;
    }
    if (value == "false") continue;
    out.push_back("--" + key);
    std::istringstream words(value);
    std::string w;
    while (words >> w) out.push_back(w);
  }
  return out;
}

}  // namespace ccfv::cli
