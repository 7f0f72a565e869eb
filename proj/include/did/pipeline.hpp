#pragma once

// End-to-end experiment pipeline: dataset synthesis, double reconstruction,
// branch training, threshold calibration, evaluation, sweeps, and artifact
// emission. Every random draw is keyed by (cell seed, stream tag, sample
// index), so outputs are identical regardless of thread count or execution
// order; sweep workers compute in parallel and a single collector writes.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "did/classifier.hpp"
#include "did/config.hpp"
#include "did/diffusion.hpp"
#include "did/ensemble.hpp"
#include "did/manifold.hpp"
#include "did/metrics.hpp"
#include "did/netpbm.hpp"
#include "did/reconstruction.hpp"
#include "did/residuals.hpp"
#include "did/rng.hpp"
#include "did/textio.hpp"

namespace did {

struct Dataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::size_t ambient_dim = 0;
};

// One reconstruction operator instance with the manifold it reconstructs
// onto; the ddim form carries its score model and schedule instead of a
// perturbation model.
struct CellOperator {
  OperatorKind kind = OperatorKind::Analytic;
  ManifoldModel manifold;
  PerturbationModel pert;
  GmmScoreModel gmm;
  DiffusionSchedule sched;
  std::string id;
};

inline CellOperator make_cell_operator(const ExperimentConfig& cfg,
                                       std::uint64_t cell_seed) {
  CellOperator op;
  op.kind = cfg.op;
  op.id = operator_name(cfg.op);
  std::uint64_t base = cfg.chart_seed ? cfg.chart_seed : cell_seed;
  if (cfg.op == OperatorKind::Analytic) {
    op.manifold = cfg.rotated
                      ? make_rotated_manifold(cfg.ambient_dim, cfg.tangent_dim,
                                              derive_seed(base, stream::chart))
                      : make_axis_manifold(cfg.ambient_dim, cfg.tangent_dim);
    if (!cfg.offset.empty()) {
      check_dim(cfg.offset.size(), cfg.ambient_dim, "cell operator offset");
      op.manifold.offset = cfg.offset;
    }
    // Config noise scales are expected total norms; the model wants
    // per-coordinate standard deviations.
    double tau = cfg.tangent_noise / std::sqrt(static_cast<double>(cfg.tangent_dim));
    double lam = cfg.normal_leak /
                 std::sqrt(static_cast<double>(cfg.ambient_dim - cfg.tangent_dim));
    op.pert = cfg.bias_kind == BiasKind::Constant
                  ? make_constant_perturbation(cfg.bias_norm, tau, lam)
                  : make_sinusoidal_perturbation(cfg.tangent_dim, cfg.bias_norm, tau,
                                                 lam, cfg.frequency,
                                                 derive_seed(base, stream::phases));
  } else {
    if (!cfg.offset.empty())
      throw std::invalid_argument("offset unsupported for the ddim operator");
    if (cfg.components > cfg.ambient_dim)
      throw std::invalid_argument("ddim operator needs components <= ambient_dim");
    Rng mixture_rng(derive_seed(base, stream::mixture));
    std::vector<Vec> means(cfg.components, Vec(cfg.ambient_dim));
    for (Vec& mu : means)
      for (double& v : mu) v = mixture_rng.gaussian();
    op.gmm = make_gmm(std::vector<double>(cfg.components, 1.0), std::move(means),
                      cfg.sigma0);
    op.sched = make_linear_schedule(cfg.steps);
    op.manifold = mixture_support(op.gmm);
  }
  return op;
}

// Split layout: fakes then reals, train then test; seed_id is the global
// sample index feeding the per-sample data and reconstruction streams.
inline Dataset build_dataset(const ExperimentConfig& cfg, const ManifoldModel& m,
                             double signal, std::uint64_t cell_seed) {
  Dataset ds;
  ds.ambient_dim = m.ambient_dim;
  std::uint64_t index = 0;
  auto fill = [&](std::vector<LabeledSample>& split, std::size_t per_class) {
    split.reserve(2 * per_class);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
      Rng rng(derive_seed(cell_seed, stream::data, index));
      LabeledSample s = i < per_class
                            ? sample_fake(m, rng)
                            : sample_real(m, signal, rng, cfg.normal_direction);
      s.seed_id = index++;
      split.push_back(std::move(s));
    }
  };
  fill(ds.train, cfg.train_per_class);
  fill(ds.test, cfg.test_per_class);
  return ds;
}

inline ReconstructionTrace trace_sample(const CellOperator& op, const Vec& x,
                                        std::uint64_t cell_seed,
                                        std::uint64_t sample_index) {
  Rng recon_rng(derive_seed(cell_seed, stream::recon, sample_index));
  auto apply = [&](const Vec& v) {
    return op.kind == OperatorKind::Analytic
               ? reconstruct_analytic(op.manifold, op.pert, v, recon_rng)
               : reconstruct_ddim(op.gmm, op.sched, v);
  };
  return reconstruct_twice(apply, x, op.id, sample_index);
}

inline double fused_score(Fusion f, const ScorePair& s) {
  return f == Fusion::AndFake ? std::min(s.p1, s.p2) : std::max(s.p1, s.p2);
}

struct DetectorReport {
  std::string detector;  // first | second | did
  double threshold = 0.0;
  EvalReport report;
};

struct CellOutcome {
  double signal = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::vector<DetectorReport> reports;
  DetectorEnsemble ensemble;
  std::string fake_delta2_pgm;  // first fake / real test sample
  std::string real_delta2_pgm;
  bool failed = false;
  std::string error;
};

// Square raster layout when none is configured; nullopt when the ambient
// dimension admits no layout.
inline std::optional<std::pair<std::size_t, std::size_t>> image_shape(
    const ExperimentConfig& cfg, std::size_t ambient_dim) {
  if (cfg.image_rows > 0 && cfg.image_cols > 0) {
    if (cfg.image_rows * cfg.image_cols != ambient_dim) return std::nullopt;
    return std::make_pair(cfg.image_rows, cfg.image_cols);
  }
  if (cfg.image_rows > 0 || cfg.image_cols > 0) return std::nullopt;
  auto side = static_cast<std::size_t>(std::lround(std::sqrt(
      static_cast<double>(ambient_dim))));
  if (side * side != ambient_dim) return std::nullopt;
  return std::make_pair(side, side);
}

// Full single-configuration experiment: generate, reconstruct twice, train
// both branches, calibrate thresholds, evaluate the three detectors on the
// test split. Pure compute; no files are touched.
inline CellOutcome run_cell(const ExperimentConfig& cfg, double signal,
                            std::uint64_t cell_seed, std::uint64_t cfg_hash) {
  CellOutcome out;
  out.signal = signal;
  out.tau = cfg.tangent_noise;
  out.seed = cell_seed;

  CellOperator op = make_cell_operator(cfg, cell_seed);
  Dataset ds = build_dataset(cfg, op.manifold, signal, cell_seed);

  auto featurize = [&](const std::vector<LabeledSample>& split,
                       std::vector<FeatureVector>& phi1,
                       std::vector<FeatureVector>& phi2, std::vector<int>& labels) {
    phi1.reserve(split.size());
    phi2.reserve(split.size());
    labels.reserve(split.size());
    for (const LabeledSample& s : split) {
      ReconstructionTrace tr = trace_sample(op, s.point, cell_seed, s.seed_id);
      ResidualSet rs = make_residuals(tr);
      phi1.push_back(summarize(rs.delta1, Branch::Delta1));
      phi2.push_back(summarize(rs.delta2, Branch::Delta2));
      labels.push_back(s.label == Label::Fake ? 1 : 0);
    }
  };

  std::vector<FeatureVector> train1, train2, test1, test2;
  std::vector<int> train_labels, test_labels;
  featurize(ds.train, train1, train2, train_labels);
  featurize(ds.test, test1, test2, test_labels);

  DetectorEnsemble ens;
  ens.fusion = cfg.fusion;
  ens.clf_delta1 = train(train1, train_labels, cfg.hyper);
  ens.clf_delta2 = train(train2, train_labels, cfg.hyper);

  std::vector<double> real_p1, real_p2, real_fused;
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    if (train_labels[i] != 0) continue;
    ScorePair sp{predict(ens.clf_delta1, train1[i]), predict(ens.clf_delta2, train2[i])};
    real_p1.push_back(sp.p1);
    real_p2.push_back(sp.p2);
    real_fused.push_back(fused_score(ens.fusion, sp));
  }

  double c1 = 0.0, c2 = 0.0, cd = 0.0;
  switch (cfg.threshold_mode) {
    case ThresholdMode::Percentile:
      c1 = percentile_threshold(real_p1, cfg.threshold_value);
      c2 = percentile_threshold(real_p2, cfg.threshold_value);
      cd = percentile_threshold(real_fused, cfg.threshold_value);
      break;
    case ThresholdMode::Analytic:
      // The target is the single-detector operating threshold; the ensemble
      // gets the per-branch value whose AND gate matches it.
      c1 = c2 = cfg.threshold_value;
      cd = analytic_threshold(cfg.threshold_value);
      break;
    case ThresholdMode::Fixed:
      c1 = c2 = cd = cfg.threshold_value;
      break;
  }
  // decide() requires a threshold in (0,1); percentile fits can touch the
  // ends when one branch saturates.
  auto clamp01 = [](double c) {
    return std::min(1.0 - 1e-12, std::max(1e-12, c));
  };
  c1 = clamp01(c1);
  c2 = clamp01(c2);
  ens.threshold = clamp01(cd);

  std::vector<double> s1, s2, sfused;
  std::vector<Label> d1, d2, dd, truth;
  s1.reserve(test_labels.size());
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    ScorePair sp{predict(ens.clf_delta1, test1[i]), predict(ens.clf_delta2, test2[i])};
    s1.push_back(sp.p1);
    s2.push_back(sp.p2);
    sfused.push_back(fused_score(ens.fusion, sp));
    d1.push_back(sp.p1 >= c1 ? Label::Fake : Label::Real);
    d2.push_back(sp.p2 >= c2 ? Label::Fake : Label::Real);
    dd.push_back(decide(ens, sp));
    truth.push_back(test_labels[i] != 0 ? Label::Fake : Label::Real);
  }

  auto report = [&](const char* name, const std::vector<double>& scores,
                    const std::vector<Label>& decisions, double threshold) {
    DetectorReport r;
    r.detector = name;
    r.threshold = threshold;
    r.report.counts = confusion(decisions, truth);
    r.report.accuracy = accuracy(decisions, truth);
    r.report.auroc = auroc(scores, truth);
    r.report.fpr_at_tpr95 = fpr_at_tpr(scores, truth, 0.95);
    r.report.config_hash = cfg_hash;
    r.report.seed = cell_seed;
    return r;
  };
  out.reports.push_back(report("first", s1, d1, c1));
  out.reports.push_back(report("second", s2, d2, c2));
  out.reports.push_back(report("did", sfused, dd, ens.threshold));
  out.ensemble = std::move(ens);

  if (auto shape = image_shape(cfg, ds.ambient_dim)) {
    auto render_delta2 = [&](const LabeledSample& s) {
      ReconstructionTrace tr = trace_sample(op, s.point, cell_seed, s.seed_id);
      Vec delta2 = second_order(tr);
      return encode_pgm(shape->second, shape->first,
                        quantize_to_image(delta2, shape->first, shape->second));
    };
    out.fake_delta2_pgm = render_delta2(ds.test.front());
    out.real_delta2_pgm = render_delta2(ds.test[cfg.test_per_class]);
  }
  return out;
}

struct SweepResult {
  std::vector<CellOutcome> cells;  // signal-major, then seed
  std::string csv;
};

inline std::string sweep_csv(const std::vector<CellOutcome>& cells) {
  std::string csv = "s,tau,detector,acc,auroc,fpr_at_tpr95,seed\n";
  for (const CellOutcome& cell : cells) {
    if (cell.failed) {
      csv += format_double(cell.signal) + "," + format_double(cell.tau) +
             ",failed,0,0,0," + std::to_string(cell.seed) + "\n";
      continue;
    }
    for (const DetectorReport& r : cell.reports) {
      csv += format_double(cell.signal) + "," + format_double(cell.tau) + "," +
             r.detector + "," + format_double(r.report.accuracy) + "," +
             format_double(r.report.auroc) + "," +
             format_double(r.report.fpr_at_tpr95) + "," + std::to_string(cell.seed) +
             "\n";
    }
  }
  return csv;
}

// Cell image file stem, e.g. "cell_s0.5_seed42".
inline std::string cell_stem(const CellOutcome& cell) {
  return "cell_s" + format_double(cell.signal) + "_seed" + std::to_string(cell.seed);
}

// Runs the (signal grid x seeds) sweep. Workers claim cells from a shared
// counter; a failed cell is recorded and the sweep continues. When out_dir
// is nonempty, writes sweep.csv plus per-cell delta2 rasters of the first
// fake and first real test sample.
inline SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t threads) {
  std::uint64_t cfg_hash = config_hash(cfg);
  struct CellSpec {
    double signal;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (double s : cfg.signal_grid)
    for (std::size_t j = 0; j < cfg.seeds; ++j)
      specs.push_back({s, cfg.master_seed + j});

  SweepResult result;
  result.cells.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        result.cells[i] = run_cell(cfg, specs[i].signal, specs[i].seed, cfg_hash);
      } catch (const std::exception& e) {
        result.cells[i].signal = specs[i].signal;
        result.cells[i].tau = cfg.tangent_noise;
        result.cells[i].seed = specs[i].seed;
        result.cells[i].failed = true;
        result.cells[i].error = e.what();
      }
    }
  };
  std::size_t pool = std::max<std::size_t>(1, std::min(threads, specs.size()));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> team;
    team.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) team.emplace_back(worker);
    for (std::thread& t : team) t.join();
  }

  result.csv = sweep_csv(result.cells);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/sweep.csv", result.csv);
    for (const CellOutcome& cell : result.cells) {
      if (cell.fake_delta2_pgm.empty()) continue;
      std::string stem = cfg.out_dir + "/" + cell_stem(cell);
      write_file_bytes(stem + "_fake_delta2.pgm", cell.fake_delta2_pgm);
      write_file_bytes(stem + "_real_delta2.pgm", cell.real_delta2_pgm);
    }
  }
  return result;
}

inline std::string dataset_csv(const Dataset& ds) {
  std::string csv = "split,label,signal,seed_id";
  for (std::size_t i = 0; i < ds.ambient_dim; ++i) csv += ",x" + std::to_string(i);
  csv += "\n";
  auto rows = [&](const char* split, const std::vector<LabeledSample>& samples) {
    for (const LabeledSample& s : samples) {
      csv += split;
      csv += s.label == Label::Fake ? ",fake," : ",real,";
      csv += format_double(s.signal) + "," + std::to_string(s.seed_id);
      for (double v : s.point) csv += "," + format_double(v);
      csv += "\n";
    }
  };
  rows("train", ds.train);
  rows("test", ds.test);
  return csv;
}

inline Dataset load_dataset_csv(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  if (lines.empty()) throw std::invalid_argument("dataset: empty file");
  std::vector<std::string> header = split(trim(lines[0]), ',');
  if (header.size() < 5 || header[0] != "split" || header[1] != "label" ||
      header[2] != "signal" || header[3] != "seed_id" || header[4] != "x0")
    throw std::invalid_argument("dataset: unexpected header");
  Dataset ds;
  ds.ambient_dim = header.size() - 4;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    std::string line = trim(lines[li]);
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, ',');
    if (f.size() != header.size())
      throw std::invalid_argument("dataset: short row " + std::to_string(li + 1));
    LabeledSample s;
    if (f[1] == "fake") s.label = Label::Fake;
    else if (f[1] == "real") s.label = Label::Real;
    else throw std::invalid_argument("dataset: bad label '" + f[1] + "'");
    s.signal = parse_double(f[2]);
    s.seed_id = static_cast<std::uint64_t>(parse_int(f[3]));
    s.point.reserve(ds.ambient_dim);
    for (std::size_t i = 4; i < f.size(); ++i) s.point.push_back(parse_double(f[i]));
    if (f[0] == "train") ds.train.push_back(std::move(s));
    else if (f[0] == "test") ds.test.push_back(std::move(s));
    else throw std::invalid_argument("dataset: bad split '" + f[0] + "'");
  }
  return ds;
}

// generate: dataset.csv under out_dir, sampled at the configured signal.
inline std::string cmd_generate(const ExperimentConfig& cfg) {
  CellOperator op = make_cell_operator(cfg, cfg.master_seed);
  Dataset ds = build_dataset(cfg, op.manifold, cfg.signal, cfg.master_seed);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/dataset.csv";
  write_text_file(path, dataset_csv(ds));
  return path;
}

inline std::string report_csv(const std::vector<DetectorReport>& reports) {
  std::string csv = "detector,acc,auroc,fpr_at_tpr95,tp,fp,tn,fn,threshold,config_hash,seed\n";
  for (const DetectorReport& r : reports) {
    const EvalReport& e = r.report;
    csv += r.detector + "," + format_double(e.accuracy) + "," +
           format_double(e.auroc) + "," + format_double(e.fpr_at_tpr95) + "," +
           std::to_string(e.counts.tp) + "," + std::to_string(e.counts.fp) + "," +
           std::to_string(e.counts.tn) + "," + std::to_string(e.counts.fn) + "," +
           format_double(r.threshold) + "," + std::to_string(e.config_hash) + "," +
           std::to_string(e.seed) + "\n";
  }
  return csv;
}

// run: single cell at the configured signal; report.csv and ensemble.txt
// under out_dir. detector_filter narrows the report to one detector.
inline std::vector<DetectorReport> cmd_run(const ExperimentConfig& cfg,
                                           const std::string& detector_filter = "") {
  CellOutcome cell = run_cell(cfg, cfg.signal, cfg.master_seed, config_hash(cfg));
  std::vector<DetectorReport> reports;
  for (DetectorReport& r : cell.reports)
    if (detector_filter.empty() || r.detector == detector_filter)
      reports.push_back(std::move(r));
  if (reports.empty())
    throw std::invalid_argument("unknown detector '" + detector_filter + "'");
  std::filesystem::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/report.csv", report_csv(reports));
  save_ensemble(cell.ensemble, cfg.out_dir + "/ensemble.txt");
  return reports;
}

// render: x, delta1(x), delta1(x'), delta2(x) rasters per sample, either for
// a stored dataset or for one generated inline.
inline std::size_t cmd_render(const ExperimentConfig& cfg,
                              const std::string& data_path = "") {
  CellOperator op = make_cell_operator(cfg, cfg.master_seed);
  Dataset ds = data_path.empty()
                   ? build_dataset(cfg, op.manifold, cfg.signal, cfg.master_seed)
                   : load_dataset_csv(read_text_file(data_path));
  if (ds.ambient_dim != cfg.ambient_dim)
    throw std::invalid_argument("render: dataset dimension does not match config");
  auto shape = image_shape(cfg, ds.ambient_dim);
  if (!shape)
    throw std::invalid_argument(
        "render: ambient_dim admits no raster layout, set image_rows/image_cols");
  std::filesystem::create_directories(cfg.out_dir);
  std::size_t rendered = 0;
  auto emit = [&](const char* split, const std::vector<LabeledSample>& samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ReconstructionTrace tr =
          trace_sample(op, samples[i].point, cfg.master_seed, samples[i].seed_id);
      std::string stem =
          cfg.out_dir + "/" + split + "_" + std::to_string(i) + "_";
      auto save = [&](const std::string& name, const Vec& v) {
        write_file_bytes(stem + name + ".pgm",
                         encode_pgm(shape->second, shape->first,
                                    quantize_to_image(v, shape->first, shape->second)));
      };
      save("x", tr.x);
      save("delta1", first_order(tr.x, tr.x1));
      save("delta1_prime", first_order(tr.x1, tr.x2));
      save("delta2", second_order(tr));
      ++rendered;
    }
  };
  emit("train", ds.train);
  emit("test", ds.test);
  return rendered;
}

// calibrate: re-fit the stored ensemble's threshold on freshly generated
// training scores using the configured rule, write it back, return it.
inline double cmd_calibrate(const ExperimentConfig& cfg) {
  std::string path = cfg.out_dir + "/ensemble.txt";
  DetectorEnsemble ens = load_ensemble(path);
  CellOperator op = make_cell_operator(cfg, cfg.master_seed);
  Dataset ds = build_dataset(cfg, op.manifold, cfg.signal, cfg.master_seed);
  std::vector<double> real_fused;
  for (const LabeledSample& s : ds.train) {
    if (s.label != Label::Real) continue;
    ReconstructionTrace tr = trace_sample(op, s.point, cfg.master_seed, s.seed_id);
    real_fused.push_back(fused_score(ens.fusion, score_sample(ens, make_residuals(tr))));
  }
  switch (cfg.threshold_mode) {
    case ThresholdMode::Percentile:
      ens.threshold = percentile_threshold(real_fused, cfg.threshold_value);
      break;
    case ThresholdMode::Analytic:
      ens.threshold = analytic_threshold(cfg.threshold_value);
      break;
    case ThresholdMode::Fixed:
      ens.threshold = cfg.threshold_value;
      break;
  }
  ens.threshold = std::min(1.0 - 1e-12, std::max(1e-12, ens.threshold));
  save_ensemble(ens, path);
  return ens.threshold;
}

}  // namespace did
