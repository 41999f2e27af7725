// ffino: data generation, curve fitting, training, evaluation and benchmarking.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "ffino/ffino.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ffino;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write to '" + path + "' failed");
}

/// Run manifest collected over one subcommand invocation.
struct Manifest {
  std::string subcommand;
  json config = json::object();
  json seeds = json::object();
  std::vector<std::string> inputs, outputs;
  json timings = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& path, std::size_t threads) const {
    json in = json::array(), out = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    for (const auto& p : outputs) out.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    json t = timings;
    t["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json_file(path, {{"artifact_version", kArtifactVersion},
                           {"subcommand", subcommand},
                           {"config", config},
                           {"seeds", seeds},
                           {"threads", threads},
                           {"inputs", in},
                           {"outputs", out},
                           {"timings", t},
                           {"peak_rss_kib", peak_rss_kib()}});
  }
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("FFINO_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("FFINO_SEED must be an unsigned integer, got '") + s + "'");
    }
  }
  return 0;
}

std::vector<RelPermPoint> read_points_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<RelPermPoint> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (lineno == 1 && line.find_first_of("0123456789") == std::string::npos) continue;  // header
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
      }
    }
    if (v.size() != 3) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 3 columns Sw,krw,krg, got " +
                        std::to_string(v.size()));
    }
    pts.push_back({v[0], v[1], v[2]});
  }
  if (pts.empty()) throw ConfigError(path + ": no data rows");
  return pts;
}

RelPermCoeffs read_coeffs_json(const std::string& path) {
  const json j = read_json_file(path);
  return (j.contains("coeffs") ? j.at("coeffs") : j).get<RelPermCoeffs>();
}

std::vector<std::size_t> range_indices(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi > lo ? hi - lo : 0);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

std::size_t resolve_train_count(std::size_t n, long long requested) {
  if (requested < 0) return default_train_count(n);
  if (static_cast<std::size_t>(requested) > n) {
    throw ConfigError("--n-train " + std::to_string(requested) + " exceeds dataset size " + std::to_string(n));
  }
  return static_cast<std::size_t>(requested);
}

void print_summary(const json& s) {
  std::printf("%-10s %14s %14s %14s %14s\n", "variable", "mean", "std", "min", "max");
  for (const char* k : {"kh", "aniso", "phi", "Q", "krw_max", "krg_max", "Swi", "Sgr", "m", "n", "sg", "dp"}) {
    const auto& v = s.at(k);
    std::printf("%-10s %14.6g %14.6g %14.6g %14.6g\n", k, v.at("mean").get<double>(), v.at("std").get<double>(),
                v.at("min").get<double>(), v.at("max").get<double>());
  }
}

struct Common {
  std::string config_path;
  std::string manifest_path;
  std::size_t threads = 1;
};

template <typename T>
T config_value(const json& cfg, const char* section, const char* key, T fallback) {
  if (cfg.contains(section) && cfg.at(section).contains(key)) return cfg.at(section).at(key).get<T>();
  return fallback;
}

}  // namespace

int run(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"ffino: Fourier-enhanced multiple-input neural operator toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON config file; command-line flags override it");
  app.add_option("--manifest", common.manifest_path, "run manifest path (default next to the main output)");
  app.add_option("--threads", common.threads, "worker threads for data generation and evaluation; 1 is fully deterministic")
      ->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate an FDS1 toy dataset");
  std::size_t gen_n = 0, gen_nr = 192, gen_nz = 64;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_coeffs;
  gen->add_option("--n", gen_n, "number of samples")->required();
  gen->add_option("--seed", gen_seed, "base seed (default $FFINO_SEED or 0)");
  gen->add_option("--out", gen_out, "output dataset path")->required();
  gen->add_option("--grid-nr", gen_nr, "radial cells");
  gen->add_option("--grid-nz", gen_nz, "vertical cells");
  gen->add_option("--coeffs", gen_coeffs, "fixed relative permeability coefficients (JSON, e.g. fit-relperm output)");

  // fit-relperm
  auto* fit = app.add_subcommand("fit-relperm", "fit modified Brooks-Corey coefficients to Sw,krw,krg points");
  std::string fit_points, fit_out;
  fit->add_option("--points", fit_points, "CSV with columns Sw,krw,krg")->required();
  fit->add_option("--out", fit_out, "output JSON")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model on the leading training split");
  std::string tr_data, tr_target = "sg", tr_preset = "ffino", tr_out, tr_log;
  std::size_t tr_epochs = 50, tr_width = 36, tr_mr = 32, tr_mz = 17, tr_bs = 4, tr_bt = 4, tr_every = 0, tr_max_steps = 0;
  std::uint64_t tr_seed = 0;
  double tr_lr = 1e-3, tr_decay = 0.985;
  long long tr_ntrain = -1;
  tr->add_option("--data", tr_data, "FDS1 dataset")->required();
  auto* o_target = tr->add_option("--target", tr_target, "sg or dp")->check(CLI::IsMember({"sg", "dp"}));
  auto* o_preset = tr->add_option("--preset", tr_preset, "ffino, fmionet_like or custom");
  auto* o_epochs = tr->add_option("--epochs", tr_epochs, "epochs");
  auto* o_seed = tr->add_option("--seed", tr_seed, "seed for initialization and batching (default $FFINO_SEED or 0)");
  tr->add_option("--out", tr_out, "output checkpoint")->required();
  tr->add_option("--log", tr_log, "loss log CSV (default <out>.loss.csv)");
  auto* o_width = tr->add_option("--width", tr_width, "channel width");
  auto* o_mr = tr->add_option("--modes-r", tr_mr, "retained radial modes");
  auto* o_mz = tr->add_option("--modes-z", tr_mz, "retained vertical modes");
  auto* o_bs = tr->add_option("--batch-samples", tr_bs, "samples per step (B_S)");
  auto* o_bt = tr->add_option("--batch-times", tr_bt, "report times per step (B_T)");
  auto* o_lr = tr->add_option("--lr", tr_lr, "initial learning rate");
  auto* o_decay = tr->add_option("--lr-decay", tr_decay, "learning rate factor per epoch");
  auto* o_every = tr->add_option("--checkpoint-every", tr_every, "write a checkpoint every k epochs");
  auto* o_steps = tr->add_option("--max-steps", tr_max_steps, "stop after this many optimizer steps");
  auto* o_ntrain = tr->add_option("--n-train", tr_ntrain, "training samples taken from the front (default ceil(0.923 n))");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ev_ckpt, ev_data, ev_target, ev_out;
  long long ev_ntrain = -1;
  bool ev_oracle = false;
  std::size_t ev_images = 4;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint");
  ev->add_option("--data", ev_data, "FDS1 dataset")->required();
  ev->add_option("--target", ev_target, "sg or dp (default: the checkpoint's)")->check(CLI::IsMember({"sg", "dp"}));
  ev->add_option("--out-dir", ev_out, "output directory")->required();
  ev->add_option("--n-train", ev_ntrain, "samples before the test split (default ceil(0.923 n))");
  ev->add_option("--images", ev_images, "number of test samples rendered as images");
  ev->add_flag("--oracle", ev_oracle, "score the references against themselves (pipeline check, no checkpoint)");

  // predict
  auto* pr = app.add_subcommand("predict", "reference / prediction / error for one sample at all report steps");
  std::string pr_ckpt, pr_data, pr_out;
  std::size_t pr_index = 0;
  pr->add_option("--ckpt", pr_ckpt, "checkpoint")->required();
  pr->add_option("--data", pr_data, "FDS1 dataset")->required();
  pr->add_option("--sample-index", pr_index, "sample position in the dataset")->required();
  pr->add_option("--out-dir", pr_out, "output directory")->required();

  // bench
  auto* be = app.add_subcommand("bench", "inference time per sample");
  std::string be_ckpt, be_data;
  std::size_t be_repeats = 5;
  long long be_ntrain = -1;
  be->add_option("--ckpt", be_ckpt, "checkpoint")->required();
  be->add_option("--data", be_data, "FDS1 dataset")->required();
  be->add_option("--repeats", be_repeats, "timed passes over the test split")->check(CLI::PositiveNumber);
  be->add_option("--n-train", be_ntrain, "samples before the test split (default ceil(0.923 n))");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const json file_cfg = common.config_path.empty() ? json::object() : read_json_file(common.config_path);
  Manifest man;
  auto manifest_at = [&](const std::string& fallback) {
    return common.manifest_path.empty() ? fallback : common.manifest_path;
  };
  auto seed_of = [&](CLI::App* sub, std::uint64_t flag_value, const char* section) {
    if (sub->get_option("--seed")->count()) return flag_value;
    return config_value<std::uint64_t>(file_cfg, section, "seed", default_seed());
  };

  if (gen->parsed()) {
    man.subcommand = "gen-data";
    GenerateOptions opt;
    opt.nr = gen->get_option("--grid-nr")->count() ? gen_nr : config_value<std::size_t>(file_cfg, "data", "grid_nr", 192);
    opt.nz = gen->get_option("--grid-nz")->count() ? gen_nz : config_value<std::size_t>(file_cfg, "data", "grid_nz", 64);
    opt.threads = common.threads;
    if (!gen_coeffs.empty()) {
      opt.fixed_coeffs = read_coeffs_json(gen_coeffs);
      man.inputs.push_back(gen_coeffs);
    }
    const std::uint64_t seed = seed_of(gen, gen_seed, "data");
    const auto t0 = std::chrono::steady_clock::now();
    const auto ds = generate_dataset(gen_n, seed, opt);
    man.timings["generate_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_dataset(ds, gen_out);
    const auto summary = dataset_summary(ds);
    print_summary(summary);
    man.config = {{"n", gen_n}, {"grid_nr", opt.nr}, {"grid_nz", opt.nz}, {"toy_physics",
                   {{"mu_g", opt.physics.mu_g}, {"mu_w", opt.physics.mu_w}, {"eta0", opt.physics.eta0},
                    {"dp_scale", opt.physics.dp_scale}}}};
    if (opt.fixed_coeffs) man.config["fixed_coeffs"] = *opt.fixed_coeffs;
    man.config["summary"] = summary;
    man.seeds = {{"seed", seed}};
    man.outputs.push_back(gen_out);
    man.write(manifest_at(gen_out + ".manifest.json"), common.threads);
    return 0;
  }

  if (fit->parsed()) {
    man.subcommand = "fit-relperm";
    const auto pts = read_points_csv(fit_points);
    const auto r = mbc_fit(pts);
    write_json_file(fit_out, {{"coeffs", r.coeffs}, {"residual", r.residual}, {"iterations", r.iterations},
                              {"points", pts.size()}});
    std::printf("krw_max %.6g  krg_max %.6g  Swi %.6g  Sgr %.6g  m %.6g  n %.6g  (residual %.3g)\n", r.coeffs.krw_max,
                r.coeffs.krg_max, r.coeffs.swi, r.coeffs.sgr, r.coeffs.m, r.coeffs.n, r.residual);
    man.inputs.push_back(fit_points);
    man.outputs.push_back(fit_out);
    man.write(manifest_at(fit_out + ".manifest.json"), common.threads);
    return 0;
  }

  if (tr->parsed()) {
    man.subcommand = "train";
    const auto ds = read_dataset(tr_data);
    ModelConfig mc;
    if (file_cfg.contains("model")) mc = file_cfg.at("model").get<ModelConfig>();
    TrainConfig tc;
    if (file_cfg.contains("train")) tc = file_cfg.at("train").get<TrainConfig>();
    if (o_preset->count()) mc.decoder_preset = tr_preset;
    if (o_width->count()) mc.width = tr_width;
    if (o_mr->count()) mc.modes_r = tr_mr;
    if (o_mz->count()) mc.modes_z = tr_mz;
    if (o_target->count()) tc.target = tr_target;
    if (o_epochs->count()) tc.epochs = tr_epochs;
    if (o_bs->count()) tc.batch_samples = tr_bs;
    if (o_bt->count()) tc.batch_times = tr_bt;
    if (o_lr->count()) tc.lr0 = tr_lr;
    if (o_decay->count()) tc.lr_decay = tr_decay;
    if (o_every->count()) tc.checkpoint_every = tr_every;
    if (o_steps->count()) tc.max_steps = tr_max_steps;
    tc.seed = o_seed->count() ? tr_seed : config_value<std::uint64_t>(file_cfg, "train", "seed", default_seed());
    mc.seed = derive_seed(tc.seed, 0, 0x696e6974ULL);
    mc.grid_nr = ds.grid.nr;
    mc.grid_nz = ds.grid.nz;
    mc.target = tc.target;
    mc.validate();
    const std::size_t n_train =
        resolve_train_count(ds.size(), o_ntrain->count() ? tr_ntrain : config_value<long long>(file_cfg, "split", "n_train", -1));
    tc.checkpoint_path = tr_out;
    tc.log_path = tr_log.empty() ? tr_out + ".loss.csv" : tr_log;

    FfinoModel<float> model(mc);
    std::printf("trainable parameters: %zu (preset %s, width %zu, modes %zux%zu)\n", model.enumerate_params(),
                mc.decoder_preset.c_str(), mc.width, mc.modes_r, mc.modes_z);
    std::printf("training on %zu of %zu samples, target %s\n", n_train, ds.size(), tc.target.c_str());
    std::fflush(stdout);
    const auto result = train(model, ds, range_indices(0, n_train), tc, [](const EpochRecord& e) {
      std::printf("epoch %4zu  lr %.3e  loss %.6f  %.2f s/epoch  peak RSS %.1f MiB\n", e.epoch, e.lr, e.train_loss,
                  e.seconds, static_cast<double>(peak_rss_kib()) / 1024.0);
      std::fflush(stdout);
    });
    double per_epoch = 0;
    for (const auto& e : result.log) per_epoch += e.seconds;
    per_epoch /= static_cast<double>(result.log.size());
    std::printf("done: %zu steps, %.2f s/epoch, peak RSS %.1f MiB\n", result.steps, per_epoch,
                static_cast<double>(peak_rss_kib()) / 1024.0);
    man.config = {{"model", model.config()}, {"train", tc}, {"n_train", n_train}, {"data", tr_data}};
    man.seeds = {{"train", tc.seed}, {"model_init", mc.seed}};
    man.timings["seconds_per_epoch"] = per_epoch;
    man.timings["train_seconds"] = result.seconds;
    man.config["parameters"] = model.enumerate_params();
    man.inputs.push_back(tr_data);
    man.outputs = {tr_out, tc.log_path};
    man.write(manifest_at(tr_out + ".manifest.json"), 1);
    return 0;
  }

  if (ev->parsed()) {
    man.subcommand = "eval";
    if (!ev_oracle && ev_ckpt.empty()) throw ConfigError("eval needs --ckpt (or --oracle)");
    const auto ds = read_dataset(ev_data);
    const std::size_t n_train = resolve_train_count(ds.size(), ev_ntrain);
    const auto test = range_indices(n_train, ds.size());
    if (test.empty()) throw ConfigError("test split is empty (n = " + std::to_string(ds.size()) + ", n_train = " + std::to_string(n_train) + ")");
    EvalOptions opt;
    opt.out_dir = ev_out;
    opt.threads = common.threads;
    opt.image_samples = ev_images;
    MetricReport report;
    if (ev_oracle) {
      opt.target = ev_target.empty() ? "sg" : ev_target;
      opt.config = {{"mode", "oracle"}, {"data", ev_data}, {"n_train", n_train}};
      report = evaluate_predictions(ds, test, [&](std::size_t i) { return ds.samples[i].target(opt.target); }, opt);
    } else {
      const auto model = load_checkpoint<float>(ev_ckpt);
      check_grid(model, ds);
      opt.target = ev_target.empty() ? model.config().target : ev_target;
      opt.config = {{"mode", "model"}, {"checkpoint", ev_ckpt}, {"data", ev_data}, {"n_train", n_train},
                    {"model", model.config()}};
      report = evaluate(model, ds, test, opt);
      man.inputs.push_back(ev_ckpt);
    }
    std::printf("%-13s %12s %12s\n", "metric", "mean", "std");
    for (const char* m : MetricReport::kMetricNames) {
      const auto a = report.summary(m);
      std::printf("%-13s %12.6f %12.6f\n", m, a.mean, a.std);
    }
    if (report.empty_aoi_count()) std::printf("warning: %zu samples have an empty AOI (MRE reported as 0)\n", report.empty_aoi_count());
    man.config = opt.config;
    man.inputs.push_back(ev_data);
    for (const char* f : {"report.json", "metrics.csv", "scatter.csv"}) man.outputs.push_back((fs::path(ev_out) / f).string());
    man.write(manifest_at((fs::path(ev_out) / "manifest.json").string()), common.threads);
    return 0;
  }

  if (pr->parsed()) {
    man.subcommand = "predict";
    const auto ds = read_dataset(pr_data);
    const auto model = load_checkpoint<float>(pr_ckpt);
    check_grid(model, ds);
    if (pr_index >= ds.size()) {
      throw ConfigError("--sample-index " + std::to_string(pr_index) + " out of range for " + std::to_string(ds.size()) + " samples");
    }
    const auto& s = ds.samples[pr_index];
    const SampleFeatures f{spatial_features(s, ds.grid), scalar_features(s)};
    auto pred = predict_sample(model, s, f, ds.grid);
    const std::string target = model.config().target;
    if (target == "sg")
      for (auto& v : pred) v = std::clamp(v, 0.0f, 1.0f);
    const auto& ref = s.target(target);
    fs::create_directories(pr_out);
    const auto csv = (fs::path(pr_out) / ("sample_" + std::to_string(pr_index) + "_" + target + ".csv")).string();
    const auto ppm = (fs::path(pr_out) / ("sample_" + std::to_string(pr_index) + "_" + target + ".ppm")).string();
    {
      std::ofstream out(csv, std::ios::trunc);
      if (!out) throw IoError("cannot open '" + csv + "' for writing");
      out << "step,day,ir,iz,r,z,reference,prediction,error\n";
      char line[256];
      const std::size_t cells = ds.grid.cells();
      for (std::size_t k = 0; k < Grid::steps(); ++k)
        for (std::size_t i = 0; i < ds.grid.nr; ++i)
          for (std::size_t j = 0; j < ds.grid.nz; ++j) {
            const std::size_t at = k * cells + i * ds.grid.nz + j;
            std::snprintf(line, sizeof line, "%zu,%g,%zu,%zu,%.6g,%.6g,%.9g,%.9g,%.9g\n", k, kReportDays[k], i, j,
                          ds.grid.r_centers[i], ds.grid.z_centers[j], ref[at], pred[at], pred[at] - ref[at]);
            out << line;
          }
    }
    write_ppm(render_triptych(ref, pred, Grid::steps(), ds.grid.nr, ds.grid.nz), ppm);
    std::printf("wrote %s and %s\n", csv.c_str(), ppm.c_str());
    man.config = {{"checkpoint", pr_ckpt}, {"data", pr_data}, {"sample_index", pr_index}, {"target", target}};
    man.inputs = {pr_ckpt, pr_data};
    man.outputs = {csv, ppm};
    man.write(manifest_at((fs::path(pr_out) / "manifest.json").string()), 1);
    return 0;
  }

  if (be->parsed()) {
    man.subcommand = "bench";
    const auto ds = read_dataset(be_data);
    const auto model = load_checkpoint<float>(be_ckpt);
    check_grid(model, ds);
    const std::size_t n_train = resolve_train_count(ds.size(), be_ntrain);
    auto test = range_indices(n_train, ds.size());
    if (test.empty()) test = range_indices(0, ds.size());
    std::vector<SampleFeatures> feats;
    for (std::size_t i : test) feats.push_back({spatial_features(ds.samples[i], ds.grid), scalar_features(ds.samples[i])});
    std::vector<double> per_sample;
    std::printf("%-7s %18s\n", "repeat", "seconds/sample");
    for (std::size_t r = 0; r < be_repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t k = 0; k < test.size(); ++k) (void)predict_sample(model, ds.samples[test[k]], feats[k], ds.grid);
      per_sample.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
                           static_cast<double>(test.size()));
      std::printf("%-7zu %18.6f\n", r, per_sample.back());
    }
    const auto a = aggregate(per_sample);
    std::printf("mean %.6f s/sample, std %.6f (%zu samples x %zu repeats)\n", a.mean, a.std, test.size(), be_repeats);
    man.config = {{"checkpoint", be_ckpt}, {"data", be_data}, {"repeats", be_repeats}, {"samples", test.size()}};
    man.timings["seconds_per_sample"] = per_sample;
    man.timings["mean"] = a.mean;
    man.timings["std"] = a.std;
    man.inputs = {be_ckpt, be_data};
    man.write(manifest_at(be_ckpt + ".bench.json"), 1);
    return 0;
  }
  return 2;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
