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

#include "flexff/harness/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "flexff/common/error.hpp"

namespace flexff::harness {
namespace {

using nlohmann::json;

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& v) {
  const auto values = v.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

const MetricsTable* find_table(const Report& report, const std::string& name) {
  for (const MetricsTable& t : report.tables)
    if (t.name == name) return &t;
  return nullptr;
}

const Metrics* find_metrics(const MetricsTable& table, const std::string& controller) {
  for (const ControllerMetrics& c : table.controllers)
    if (c.controller == controller) return &c.metrics;
  return nullptr;
}

std::string controller_label(const std::string& c) {
  if (c == "baseline") return "Baseline";
  if (c == "approach1") return "RNN + ILC + Feedback";
  if (c == "approach2") return "BRNN + Feedback";
  if (c == "approach1_plant_ilc") return "RNN + ILC + Feedback, plant ILC";
  if (c == "approach2_plant_ilc") return "BRNN + Feedback, plant ILC";
  return c;
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "json") return ReportFormat::kJson;
  throw Error("invalid_argument", "unknown report format '" + name + "'");
}

std::string format_report(const Report& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kJson:
      out << to_json(report).dump(2) << '\n';
      break;
    case ReportFormat::kCsv:
      out << "table,row,unit,controller,l2,linf,improvement_pct\n";
      for (const MetricsTable& t : report.tables) {
        const Metrics* base = t.controllers.empty() ? nullptr : &t.controllers.front().metrics;
        for (const ControllerMetrics& c : t.controllers) {
          const Eigen::VectorXd imp = improvement_per_row(*base, c.metrics);
          for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(r);
            out << t.name << ',' << t.rows[r] << ',' << t.unit << ',' << c.controller << ',' << num(c.metrics.l2[i])
                << ',' << num(c.metrics.linf[i]) << ',' << num(imp[i]) << '\n';
          }
        }
      }
      break;
    case ReportFormat::kMarkdown:
      out << "# " << (report.experiment.empty() ? "report" : report.experiment) << "\n";
      for (const MetricsTable& t : report.tables) {
        out << "\n## " << t.name << " tracking error\n\n| " << t.name << " | unit |";
        for (const ControllerMetrics& c : t.controllers) {
          const std::string label = controller_label(c.controller);
          out << ' ' << label << " ℓ2 | " << label << " ℓ∞ |";
        }
        out << "\n|---|---|";
        for (std::size_t i = 0; i < t.controllers.size(); ++i) out << "---:|---:|";
        out << '\n';
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
          const auto i = static_cast<Eigen::Index>(r);
          out << "| " << t.rows[r] << " | " << t.unit << " |";
          for (const ControllerMetrics& c : t.controllers)
            out << ' ' << fixed(c.metrics.l2[i], 4) << " | " << fixed(c.metrics.linf[i], 4) << " |";
          out << '\n';
        }
        if (t.controllers.size() > 1) {
          out << "\nMean ℓ2 improvement over the baseline:\n\n";
          for (std::size_t i = 1; i < t.controllers.size(); ++i) {
            out << "- " << controller_label(t.controllers[i].controller) << ": "
                << fixed(mean_improvement(t.controllers.front().metrics, t.controllers[i].metrics), 1) << " %\n";
          }
        }
      }
      break;
  }
  return out.str();
}

void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    require(!ec, "io_error", "cannot create " + path.parent_path().string());
  }
  std::ofstream out(path);
  require(static_cast<bool>(out), "io_error", "cannot write " + path.string());
  out << format_report(report, format);
  out.flush();
  require(static_cast<bool>(out), "io_error", "failed writing " + path.string());
}

json to_json(const Report& report) {
  json tables = json::array();
  for (const MetricsTable& t : report.tables) {
    json controllers = json::array();
    for (const ControllerMetrics& c : t.controllers) {
      controllers.push_back({{"controller", c.controller},
                             {"l2", vector_json(c.metrics.l2)},
                             {"linf", vector_json(c.metrics.linf)}});
    }
    tables.push_back({{"name", t.name}, {"unit", t.unit}, {"rows", t.rows}, {"controllers", controllers}});
  }
  return {{"experiment", report.experiment}, {"seed", report.seed}, {"tables", tables}, {"details", report.details}};
}

Report report_from_json(const json& doc) {
  Report r;
  try {
    r.experiment = doc.at("experiment").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    for (const json& t : doc.at("tables")) {
      MetricsTable table;
      table.name = t.at("name").get<std::string>();
      table.unit = t.at("unit").get<std::string>();
      table.rows = t.at("rows").get<std::vector<std::string>>();
      for (const json& c : t.at("controllers")) {
        table.controllers.push_back(
            {c.at("controller").get<std::string>(), {vector_from(c.at("l2")), vector_from(c.at("linf"))}});
      }
      r.tables.push_back(std::move(table));
    }
    r.details = doc.value("details", json::object());
  } catch (const json::exception& e) {
    throw Error("invalid_report", e.what());
  }
  return r;
}

}  // namespace flexff::harness
