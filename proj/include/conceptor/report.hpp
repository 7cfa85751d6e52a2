#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "conceptor/persistence.hpp"
#include "conceptor/png.hpp"

namespace conceptor {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Axes plus one polyline per series, colors from a fixed palette. No text.
RgbRaster line_plot(const std::vector<PlotSeries>& series, int width = 480, int height = 300);
/// One bar per value, grouped left to right.
RgbRaster bar_plot(const std::vector<double>& values, int width = 480, int height = 300);

/// Shortest round-trip decimal.
std::string format_double(double v);

struct ManipulationSweep {
  std::string concept_name;
  std::string token;
  std::vector<double> scales;
  std::vector<double> similarity;
};

struct StudyReport {
  std::string subject_hash;
  std::string vocab_hash;
  /// Every seed used, keyed by purpose.
  Json seeds = Json::object();
  std::vector<std::pair<std::string, GeneralizationCurve>> generalization;
  std::vector<IntersectionReport> intersections;
  std::vector<ManipulationSweep> sweeps;
  std::vector<std::pair<std::string, TrainingLog>> training_logs;
  /// Free-form numbers (baselines, acceptance measurements).
  Json extra = Json::object();
};

Json study_report_to_json(const StudyReport& report);
StudyReport study_report_from_json(const Json& j);
/// Concatenates the sections of `b` onto `a`; seeds and extra are merged by key.
void merge_reports(StudyReport& a, const StudyReport& b);

/// Writes report.json, tables/*.csv and plots/*.png under out_dir and returns
/// the written paths relative to out_dir.
std::vector<std::string> emit_report(const StudyReport& report, const std::filesystem::path& out_dir);

}  // namespace conceptor
