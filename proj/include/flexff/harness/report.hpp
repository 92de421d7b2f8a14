// Copyright 2026 The flexff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexff/harness/metrics.hpp"

namespace flexff::harness {

struct ControllerMetrics {
  std::string controller;
  Metrics metrics;
  bool operator==(const ControllerMetrics&) const = default;
};

// One error table: rows are joints or Cartesian axes; the first controller is
// the baseline every improvement is measured against.
struct MetricsTable {
  std::string name;  // "joint" or "cartesian"
  std::string unit;  // "rad" or "m"
  std::vector<std::string> rows;
  std::vector<ControllerMetrics> controllers;
  bool operator==(const MetricsTable&) const = default;
};

struct Report {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<MetricsTable> tables;
  // Experiment-specific facts (ILC histories, reference deviations, ...).
  nlohmann::json details = nlohmann::json::object();
  bool operator==(const Report&) const = default;
};

const MetricsTable* find_table(const Report& report, const std::string& name);
const Metrics* find_metrics(const MetricsTable& table, const std::string& controller);

// Human-readable controller names for table headers.
std::string controller_label(const std::string& controller);

enum class ReportFormat { kCsv, kMarkdown, kJson };
ReportFormat report_format_from_string(const std::string& name);

// CSV: table,row,unit,controller,l2,linf,improvement_pct (17 significant
// digits). Markdown: per table one row per joint/axis and an l2 and l∞ column
// per controller, then the mean improvements. JSON: the full report.
std::string format_report(const Report& report, ReportFormat format);
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path);

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);

}  // namespace flexff::harness
