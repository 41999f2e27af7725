#pragma once

// Test-set evaluation: per-sample metrics, report files, images and
// reference-vs-prediction density data.

#include <filesystem>
#include <functional>
#include <thread>

#include "ffino/eval/images.hpp"
#include "ffino/eval/metrics.hpp"
#include "ffino/eval/report.hpp"
#include "ffino/train/batch.hpp"

namespace ffino {

struct EvalOptions {
  std::string target = "sg";
  AOIConfig aoi;
  SsimOptions ssim;
  std::string out_dir;            // empty: no files
  std::size_t image_samples = 4;  // triptychs for the first k evaluated samples
  std::size_t scatter_bins = 100;
  std::size_t threads = 1;
  nlohmann::json config;  // echoed into the report
};

/// Returns the prediction for ds.samples[i] at all 12 steps, physical units.
using Predictor = std::function<std::vector<float>(std::size_t)>;

inline SampleMetrics sample_metrics(const Sample& s, const std::vector<float>& pred, const Grid& g,
                                    const EvalOptions& opt) {
  const auto& ref = s.target(opt.target);
  if (pred.size() != ref.size()) {
    throw std::invalid_argument("prediction for sample " + std::to_string(s.index) + " has " +
                                std::to_string(pred.size()) + " values, reference has " + std::to_string(ref.size()));
  }
  // saturations are physically bounded; clip predictions before scoring
  std::vector<float> p = pred;
  if (opt.target == "sg")
    for (auto& v : p) v = std::clamp(v, 0.0f, 1.0f);
  const std::span<const float> y(ref), yh(p);
  SampleMetrics m;
  m.index = s.index;
  m.r2 = r2_score(y, yh);
  m.rmse = rmse(y, yh);
  const auto mre = mre_aoi(y, yh, opt.aoi.threshold(opt.target));
  m.mre = mre.value;
  m.aoi_cells = mre.cells;
  m.mre_per_cell = mre_aoi_per_cell(y, yh, opt.aoi.threshold(opt.target)).value;
  const std::size_t cells = g.cells();
  double ssum = 0;
  for (std::size_t k = 0; k < Grid::steps(); ++k) {
    const auto yk = y.subspan(k * cells, cells);
    const auto [lo, hi] = std::minmax_element(yk.begin(), yk.end());
    if (!(*hi > *lo)) continue;
    ssum += ssim(yk, yh.subspan(k * cells, cells), g.nr, g.nz, opt.ssim);
    ++m.ssim_steps;
  }
  m.ssim = m.ssim_steps ? ssum / static_cast<double>(m.ssim_steps) : 0.0;
  return m;
}

/// 2-D histogram of (reference, prediction) pairs over a shared range.
inline void write_scatter_csv(const std::vector<const std::vector<float>*>& refs,
                              const std::vector<std::vector<float>>& preds, std::size_t bins, const std::string& path) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t s = 0; s < refs.size(); ++s) {
    for (float v : *refs[s]) lo = std::min(lo, static_cast<double>(v)), hi = std::max(hi, static_cast<double>(v));
    for (float v : preds[s]) lo = std::min(lo, static_cast<double>(v)), hi = std::max(hi, static_cast<double>(v));
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::uint64_t> counts(bins * bins, 0);
  auto bin = [&](double v) { return std::min(bins - 1, static_cast<std::size_t>((v - lo) / width)); };
  for (std::size_t s = 0; s < refs.size(); ++s)
    for (std::size_t i = 0; i < preds[s].size(); ++i) ++counts[bin((*refs[s])[i]) * bins + bin(preds[s][i])];
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "ref_bin,pred_bin,ref_lo,ref_hi,pred_lo,pred_hi,count\n";
  char line[256];
  for (std::size_t a = 0; a < bins; ++a)
    for (std::size_t b = 0; b < bins; ++b) {
      if (!counts[a * bins + b]) continue;
      std::snprintf(line, sizeof line, "%zu,%zu,%.9g,%.9g,%.9g,%.9g,%llu\n", a, b, lo + a * width, lo + (a + 1) * width,
                    lo + b * width, lo + (b + 1) * width, static_cast<unsigned long long>(counts[a * bins + b]));
      f << line;
    }
  if (!f) throw IoError("write to '" + path + "' failed");
}

inline MetricReport evaluate_predictions(const Dataset& ds, const std::vector<std::size_t>& indices,
                                         const Predictor& predict, const EvalOptions& opt) {
  if (indices.empty()) throw ConfigError("evaluation set is empty");
  std::vector<std::vector<float>> preds(indices.size());
  std::vector<SampleMetrics> metrics(indices.size());
  auto work = [&](std::size_t k) {
    preds[k] = predict(indices[k]);
    metrics[k] = sample_metrics(ds.samples.at(indices[k]), preds[k], ds.grid, opt);
  };
  const std::size_t threads = std::clamp<std::size_t>(opt.threads, 1, indices.size());
  if (threads == 1) {
    for (std::size_t k = 0; k < indices.size(); ++k) work(k);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < indices.size(); k += threads) work(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  MetricReport report;
  report.target = opt.target;
  report.aoi_threshold = opt.aoi.threshold(opt.target);
  report.samples = std::move(metrics);
  report.config = opt.config;
  if (opt.out_dir.empty()) return report;

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(opt.out_dir) / "images", ec);
  if (ec) throw IoError("cannot create '" + opt.out_dir + "': " + ec.message());
  const fs::path dir(opt.out_dir);
  {
    std::ofstream f(dir / "report.json", std::ios::trunc);
    if (!f) throw IoError("cannot write '" + (dir / "report.json").string() + "'");
    f << to_json(report).dump(2) << "\n";
  }
  write_report_csv(report, (dir / "metrics.csv").string());
  std::vector<const std::vector<float>*> refs;
  for (std::size_t i : indices) refs.push_back(&ds.samples[i].target(opt.target));
  write_scatter_csv(refs, preds, opt.scatter_bins, (dir / "scatter.csv").string());
  for (std::size_t k = 0; k < std::min(opt.image_samples, indices.size()); ++k) {
    const auto img = render_triptych(*refs[k], preds[k], Grid::steps(), ds.grid.nr, ds.grid.nz);
    write_ppm(img, (dir / "images" / ("sample_" + std::to_string(indices[k]) + "_" + opt.target + ".ppm")).string());
  }
  return report;
}

/// Checks that a model and a dataset share a grid; ConfigError naming both otherwise.
template <typename T>
void check_grid(const FfinoModel<T>& model, const Dataset& ds) {
  const auto& c = model.config();
  if (c.grid_nr != ds.grid.nr || c.grid_nz != ds.grid.nz) {
    throw ConfigError("checkpoint grid (" + std::to_string(c.grid_nr) + ", " + std::to_string(c.grid_nz) +
                      ") does not match dataset grid (" + std::to_string(ds.grid.nr) + ", " +
                      std::to_string(ds.grid.nz) + ")");
  }
}

template <typename T>
MetricReport evaluate(const FfinoModel<T>& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                      EvalOptions opt) {
  check_grid(model, ds);
  if (opt.target != model.config().target) {
    throw ConfigError("model was trained for target '" + model.config().target + "', evaluation asks for '" +
                      opt.target + "'");
  }
  return evaluate_predictions(
      ds, indices,
      [&](std::size_t i) {
        const auto& s = ds.samples.at(i);
        const SampleFeatures f{spatial_features(s, ds.grid), scalar_features(s)};
        return predict_sample(model, s, f, ds.grid);
      },
      opt);
}

}  // namespace ffino
