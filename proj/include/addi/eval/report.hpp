// addi/eval/report.hpp

// Copyright 2026  addilab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Report serialization. Reports keep their input order in every format.
//
//   table  aligned text, one line per report, UAR as percent mean +- std
//   json   array of report objects; doubles print with round-trip precision
//   csv    one row per (report, seed)

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "addi/eval/experiment.hpp"

namespace addi::eval {

enum class ReportFormat { kTable, kJson, kCsv };

inline ReportFormat ParseReportFormat(const std::string& s) {
  if (s == "table") return ReportFormat::kTable;
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  Fail(ErrorKind::kConfig, "unknown report format '" + s + "' (expected table, json or csv)");
}

inline const char* ReportExtension(ReportFormat f) {
  switch (f) {
    case ReportFormat::kTable: return "txt";
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
  }
  return "";
}

inline nlohmann::json ReportToJson(const MetricsReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : r.runs) {
    nlohmann::json recalls = nlohmann::json::object();
    for (const auto& [c, v] : s.recalls) recalls[std::to_string(c)] = v;
    runs.push_back({{"seed", s.seed},
                    {"uar", s.uar},
                    {"recalls", recalls},
                    {"epochs", s.epochs},
                    {"best_val", s.best_val},
                    {"target_labels_used", s.target_labels_used}});
  }
  nlohmann::json mean_recalls = nlohmann::json::object();
  for (const auto& [c, v] : r.mean_recalls) mean_recalls[std::to_string(c)] = v;
  nlohmann::json j{{"name", r.name},   {"fingerprint", r.fingerprint}, {"runs", runs},
                   {"mean", r.mean},   {"std", r.std},                 {"mean_recalls", mean_recalls},
                   {"training_log", r.training_log}};
  if (!r.sweep_axis.empty()) j["sweep_axis"] = r.sweep_axis;
  if (r.sweep_value) j["sweep_value"] = *r.sweep_value;
  return j;
}

inline MetricsReport ReportFromJson(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.name = j.at("name").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.training_log = j.value("training_log", std::string());
    r.sweep_axis = j.value("sweep_axis", std::string());
    if (j.contains("sweep_value")) r.sweep_value = j.at("sweep_value").get<double>();
    for (const auto& [c, v] : j.at("mean_recalls").items()) {
      r.mean_recalls[std::stoi(c)] = v.get<double>();
    }
    for (const auto& s : j.at("runs")) {
      SeedResult run;
      run.seed = s.at("seed").get<std::uint64_t>();
      run.uar = s.at("uar").get<double>();
      run.epochs = s.at("epochs").get<int>();
      run.best_val = s.at("best_val").get<double>();
      run.target_labels_used = s.at("target_labels_used").get<std::size_t>();
      for (const auto& [c, v] : s.at("recalls").items()) run.recalls[std::stoi(c)] = v.get<double>();
      r.runs.push_back(std::move(run));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kSchema, std::string("malformed report: ") + e.what());
  }
}

inline std::vector<MetricsReport> ReportsFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("report is not valid JSON: ") + e.what());
  }
  std::vector<MetricsReport> out;
  if (j.is_array()) {
    for (const auto& r : j) out.push_back(ReportFromJson(r));
  } else {
    out.push_back(ReportFromJson(j));
  }
  return out;
}

inline std::string FormatTable(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-16s %-14s %-8s %5s %8s %7s\n", "model", "fingerprint",
                "sweep", "value", "seeds", "UAR(%)", "std");
  os << line;
  for (const auto& r : reports) {
    const std::string value = r.sweep_value ? FormatReal(*r.sweep_value) : "-";
    std::snprintf(line, sizeof line, "%-12s %-16s %-14s %-8s %5zu %8.2f %7.2f\n", r.name.c_str(),
                  r.fingerprint.c_str(), r.sweep_axis.empty() ? "-" : r.sweep_axis.c_str(),
                  value.c_str(), r.runs.size(), 100.0 * r.mean, 100.0 * r.std);
    os << line;
  }
  return os.str();
}

inline std::string FormatCsv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "model,fingerprint,sweep_axis,sweep_value,seed,uar,epochs\n";
  for (const auto& r : reports) {
    for (const auto& s : r.runs) {
      os << r.name << ',' << r.fingerprint << ',' << r.sweep_axis << ','
         << (r.sweep_value ? FormatReal(*r.sweep_value) : "") << ',' << s.seed << ','
         << FormatReal(s.uar) << ',' << s.epochs << '\n';
    }
  }
  return os.str();
}

inline std::string FormatReport(const std::vector<MetricsReport>& reports, ReportFormat f) {
  switch (f) {
    case ReportFormat::kTable: return FormatTable(reports);
    case ReportFormat::kCsv: return FormatCsv(reports);
    case ReportFormat::kJson: {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : reports) j.push_back(ReportToJson(r));
      return j.dump(2) + "\n";
    }
  }
  return {};
}

inline void WriteText(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(os), ErrorKind::kIo, "cannot write " + path);
  os << text;
  os.flush();
  Require(static_cast<bool>(os), ErrorKind::kIo, "write to " + path + " failed");
}

inline void EmitReport(const std::vector<MetricsReport>& reports, ReportFormat f,
                       const std::string& path) {
  WriteText(path, FormatReport(reports, f));
}

}  // namespace addi::eval
