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

// JSON forms of scores and correlation reports (nlohmann/json).

#pragma once

#include <istream>
#include <set>
#include <string>

#include "json.hpp"

#include "ccfv/ccfv.hpp"
#include "ccfv/error.hpp"
#include "ccfv/ranking.hpp"

namespace ccfv {

inline nlohmann::json to_json(const ModelScore& s, DistanceMetric metric) {
  nlohmann::json per_scale = nlohmann::json::array();
  for (const auto& p : s.per_scale) {
    per_scale.push_back({{"scale_index", p.scale_index}, {"c_cons", p.c_cons}, {"f_v", p.f_v}});
  }
  return {{"model_id", s.model_id},
          {"estimator", "ccfv"},
          {"metric", to_string(metric)},
          {"transferability", s.transferability},
          {"per_scale", per_scale}};
}

inline nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& m : r.ranking) {
    ranking.push_back({{"model_id", m.model_id}, {"estimate", m.estimate}, {"performance", m.performance}});
  }
  return {{"weighted_tau", r.weighted_tau},
          {"pearson", r.pearson},
          {"n_models", r.n_models},
          {"ranking", ranking}};
}

// Reads JSON-lines score records ({"model_id": ..., "transferability": ...}).
inline ModelValues read_score_lines(std::istream& in) {
  ModelValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "scores line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("model_id") || !j["model_id"].is_string() ||
        !j.contains("transferability") || !j["transferability"].is_number()) {
      throw FormatError(where + ": expected model_id and numeric transferability");
    }
    const auto id = j["model_id"].get<std::string>();
    if (!out.emplace(id, j["transferability"].get<double>()).second) {
      throw FormatError(where + ": duplicate model_id '" + id + "'");
    }
  }
  return out;
}

}  // namespace ccfv
