#pragma once

// Per-sample metric table, aggregates, and their JSON / CSV forms.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/core/error.hpp"

namespace ffino {

struct SampleMetrics {
  std::size_t index = 0;
  double r2 = 0, rmse = 0, ssim = 0, mre = 0, mre_per_cell = 0;
  std::size_t aoi_cells = 0;
  std::size_t ssim_steps = 0;  // report steps with a non-constant reference
};

struct Aggregate {
  double mean = 0, std = 0;  // population standard deviation
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  if (v.empty()) return a;
  for (double x : v) a.mean += x;
  a.mean /= static_cast<double>(v.size());
  double sq = 0;
  for (double x : v) sq += (x - a.mean) * (x - a.mean);
  a.std = std::sqrt(sq / static_cast<double>(v.size()));
  return a;
}

struct MetricReport {
  std::string target;
  double aoi_threshold = 0;
  std::vector<SampleMetrics> samples;
  nlohmann::json config;  // echo of the run configuration

  static constexpr const char* kMetricNames[] = {"r2", "rmse", "ssim", "mre", "mre_per_cell"};

  std::vector<double> column(const std::string& metric) const {
    std::vector<double> out;
    for (const auto& s : samples) {
      if (metric == "r2") out.push_back(s.r2);
      else if (metric == "rmse") out.push_back(s.rmse);
      else if (metric == "ssim") out.push_back(s.ssim);
      else if (metric == "mre") out.push_back(s.mre);
      else if (metric == "mre_per_cell") out.push_back(s.mre_per_cell);
      else throw std::invalid_argument("unknown metric '" + metric + "'");
    }
    return out;
  }

  Aggregate summary(const std::string& metric) const { return aggregate(column(metric)); }

  std::size_t empty_aoi_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.aoi_cells == 0;
    return n;
  }
};

inline nlohmann::json to_json(const MetricReport& r) {
  using nlohmann::json;
  json per = json::object();
  json idx = json::array(), aoi = json::array(), steps = json::array();
  for (const auto& s : r.samples) {
    idx.push_back(s.index);
    aoi.push_back(s.aoi_cells);
    steps.push_back(s.ssim_steps);
  }
  per["index"] = idx;
  for (const char* m : MetricReport::kMetricNames) per[m] = r.column(m);
  per["aoi_cells"] = aoi;
  per["ssim_steps"] = steps;
  json agg = json::object();
  for (const char* m : MetricReport::kMetricNames) {
    const auto a = r.summary(m);
    agg[m] = {{"mean", a.mean}, {"std", a.std}};
  }
  return {{"format", "ffino-eval-report"},
          {"version", 1},
          {"target", r.target},
          {"sample_count", r.samples.size()},
          {"definitions",
           {{"r2", "1 - sum (y - yh)^2 / sum (y - mean y)^2 over all cells and report steps"},
            {"rmse", "sqrt(mean (y - yh)^2) over all cells and report steps"},
            {"ssim", "Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03), L = range of the reference "
                     "per step, valid windows only, averaged over steps with non-constant reference"},
            {"mre", "sum_AOI |yh - y| / sum_AOI |y|, AOI = cells with y >= threshold over all steps; 0 if AOI empty"},
            {"mre_per_cell", "mean over AOI cells of |yh - y| / |y|"},
            {"aggregate", "mean and population standard deviation over samples"}}},
          {"aoi_threshold", r.aoi_threshold},
          {"empty_aoi_samples", r.empty_aoi_count()},
          {"per_sample", per},
          {"aggregate", agg},
          {"config", r.config}};
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
  try {
    r.target = j.at("target").get<std::string>();
    r.aoi_threshold = j.at("aoi_threshold").get<double>();
    r.config = j.value("config", nlohmann::json::object());
    const auto& p = j.at("per_sample");
    const auto n = p.at("index").size();
    r.samples.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = r.samples[i];
      s.index = p.at("index")[i].get<std::size_t>();
      s.r2 = p.at("r2")[i].get<double>();
      s.rmse = p.at("rmse")[i].get<double>();
      s.ssim = p.at("ssim")[i].get<double>();
      s.mre = p.at("mre")[i].get<double>();
      s.mre_per_cell = p.at("mre_per_cell")[i].get<double>();
      s.aoi_cells = p.at("aoi_cells")[i].get<std::size_t>();
      s.ssim_steps = p.at("ssim_steps")[i].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed evaluation report: ") + e.what());
  }
}

inline void write_report_csv(const MetricReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "index,r2,rmse,ssim,mre,mre_per_cell,aoi_cells,ssim_steps\n";
  char line[512];
  for (const auto& s : r.samples) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n", s.index, s.r2, s.rmse, s.ssim,
                  s.mre, s.mre_per_cell, s.aoi_cells, s.ssim_steps);
    f << line;
  }
  if (!f) throw IoError("write to '" + path + "' failed");
}

}  // namespace ffino
