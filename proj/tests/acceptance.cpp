// Acceptance gate: one line per criterion, nonzero exit if any fail. All
// tolerances are pinned here, next to the checks that use them.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "did/pipeline.hpp"

using namespace did;

namespace {

std::string sci(double v) {
  std::ostringstream o;
  o << std::scientific << std::setprecision(3) << v;
  return o.str();
}

std::string fix(double v, int digits = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string scratch_dir(const std::string& name) {
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / ("did_acceptance_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

// 1. A repeated tangent perturbation cancels in the second-order residual:
//    noise-free analytic operator, 1000 on-chart samples in d=16, exact
//    coordinate arithmetic via the axis-aligned chart.
Outcome repeated_bias_cancellation() {
  constexpr double tol = 1e-15;
  ManifoldModel m = make_axis_manifold(16, 8);
  PerturbationModel pert = make_constant_perturbation(1.0);
  Rng data_rng(101), unused(0);
  auto op = [&](const Vec& v) { return reconstruct_analytic(m, pert, v, unused); };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    LabeledSample s = sample_fake(m, data_rng);
    Vec d2 = second_order(reconstruct_twice(op, s.point));
    for (double v : d2) worst = std::max(worst, std::abs(v));
  }
  return {worst <= tol,
          "max |delta2| over 1000 on-chart samples = " + sci(worst) + ", tolerance " +
              sci(tol)};
}

// 2. The second-order residual recovers the off-chart component coordinate
//    by coordinate: wherever the bias magnitude exceeds the per-coordinate
//    signal, |delta2_i| equals |x_i - proj(x)_i|; the signal coordinate
//    itself is recovered exactly as well.
Outcome normal_signal_recovery() {
  constexpr double tol = 1e-12;
  const double signal = 0.3;  // below the bias magnitude 1.0
  ManifoldModel m = make_axis_manifold(16, 8);
  PerturbationModel pert = make_constant_perturbation(1.0);
  Rng data_rng(102), unused(0);
  auto op = [&](const Vec& v) { return reconstruct_analytic(m, pert, v, unused); };
  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 1000; ++i) {
    LabeledSample s = sample_real(m, signal, data_rng);
    Vec p = project(m, s.point);
    Vec off = sub(s.point, p);
    Vec delta = bias_field(m, pert, p);
    Vec d2 = second_order(reconstruct_twice(op, s.point));
    for (std::size_t c = 0; c < d2.size(); ++c) {
      bool dominated = std::abs(delta[c]) > std::abs(off[c]);
      bool signal_coord = delta[c] == 0.0 && off[c] != 0.0;
      if (!dominated && !signal_coord) continue;
      worst = std::max(worst, std::abs(std::abs(d2[c]) - std::abs(off[c])));
      ++checked;
    }
  }
  return {worst <= tol && checked >= 2000,
          "max ||delta2_i| - |off_i|| = " + sci(worst) + " over " +
              std::to_string(checked) + " coordinates, tolerance " + sci(tol)};
}

// 3. Default sweep ordering: seed-averaged accuracy of the fused detector is
//    never materially below the first-order detector and beats it clearly at
//    the two weakest signals.
Outcome sweep_ordering() {
  ExperimentConfig cfg;
  cfg.out_dir = "";
  SweepResult sweep = run_sweep(cfg, 1);
  std::vector<double> grid = cfg.signal_grid;
  std::sort(grid.begin(), grid.end());
  double worst_margin = 1.0;
  double weak_margin = 1.0;
  std::string per_signal;
  for (double s : grid) {
    double first_mean = 0.0, did_mean = 0.0;
    std::size_t n = 0;
    for (const CellOutcome& cell : sweep.cells) {
      if (cell.failed || cell.signal != s) continue;
      for (const DetectorReport& r : cell.reports) {
        if (r.detector == "first") first_mean += r.report.accuracy;
        if (r.detector == "did") did_mean += r.report.accuracy;
      }
      ++n;
    }
    if (n == 0) return {false, "sweep produced no cells at s=" + fix(s, 2)};
    first_mean /= static_cast<double>(n);
    did_mean /= static_cast<double>(n);
    double margin = did_mean - first_mean;
    worst_margin = std::min(worst_margin, margin);
    if (s == grid[0] || s == grid[1]) weak_margin = std::min(weak_margin, margin);
    per_signal += " s=" + fix(s, 2) + ":" + fix(margin, 3);
  }
  bool pass = worst_margin >= -0.01 && weak_margin >= 0.05;
  return {pass, "fused-minus-first accuracy margins" + per_signal +
                    " (need >= -0.01 everywhere, >= 0.05 at the two weakest)"};
}

// 4. The conjunctive gate passes a pair of independent uniform scores with
//    probability c^2, and the closed-form per-branch threshold for a 0.5
//    target is 1 - sqrt(0.5).
Outcome and_gate_calibration() {
  constexpr double mc_tol = 0.005;
  double c_half = analytic_threshold(0.5);
  if (std::abs(c_half - 0.2928932) > 1e-7)
    return {false, "analytic threshold at 0.5 = " + fix(c_half, 9)};
  Rng rng(104);
  std::string detail = "threshold(0.5) = " + fix(c_half, 7);
  for (double c : {0.2928932, 0.5, 0.7071068}) {
    const int n = 1000000;
    DetectorEnsemble ens;
    ens.threshold = c;
    ens.fusion = Fusion::AndReal;
    int accepted = 0;
    for (int i = 0; i < n; ++i) {
      ScorePair s{rng.uniform01(), rng.uniform01()};
      if (decide(ens, s) == Label::Real) ++accepted;
    }
    double dev = std::abs(static_cast<double>(accepted) / n - c * c);
    detail += " dev(c=" + fix(c, 4) + ")=" + sci(dev);
    if (dev >= mc_tol) return {false, detail + " exceeds " + sci(mc_tol)};
  }
  return {true, detail + ", tolerance " + sci(mc_tol)};
}

// 5. Rank-based AUROC equals the O(n^2) pairwise oracle, ties at one half.
Outcome auroc_oracle_equivalence() {
  constexpr double tol = 1e-12;
  std::vector<double> worked_scores{0.1, 0.4, 0.3, 0.9};
  std::vector<Label> worked_labels{Label::Real, Label::Real, Label::Fake, Label::Fake};
  if (auroc(worked_scores, worked_labels) != 0.75)
    return {false, "worked four-sample case != 0.75"};
  Rng rng(105);
  double worst = 0.0;
  for (int instance = 0; instance < 200; ++instance) {
    std::size_t n = 4 + static_cast<std::size_t>(rng.uniform01() * 46);
    std::vector<double> scores;
    std::vector<Label> labels;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(std::floor(rng.uniform01() * 10.0) / 10.0);
      labels.push_back(rng.uniform01() < 0.5 ? Label::Fake : Label::Real);
    }
    labels[0] = Label::Fake;
    labels[1] = Label::Real;
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != Label::Fake) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] != Label::Real) continue;
        ++pairs;
        if (scores[i] > scores[j]) wins += 1.0;
        else if (scores[i] == scores[j]) wins += 0.5;
      }
    }
    worst = std::max(worst,
                     std::abs(auroc(scores, labels) - wins / static_cast<double>(pairs)));
  }
  return {worst <= tol, "max |rank - pairwise| over 200 instances = " + sci(worst) +
                            ", tolerance " + sci(tol) + "; worked case exact"};
}

// 6. The training gradient matches central finite differences and the loss
//    trace over accepted steps never increases.
Outcome training_gradient_and_descent() {
  constexpr double rel_tol = 1e-5;
  constexpr double h = 1e-5;
  Rng rng(106);
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    features.push_back({1.0, rng.gaussian(), rng.gaussian(), rng.gaussian()});
    labels.push_back(i % 2);
  }
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(4);
    for (double& v : w) v = rng.gaussian();
    std::vector<double> g = logistic_gradient(w, features, labels, 0.01);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      std::vector<double> wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      double fd = (logistic_loss(wp, features, labels, 0.01) -
                   logistic_loss(wm, features, labels, 0.01)) /
                  (2.0 * h);
      num += (g[j] - fd) * (g[j] - fd);
      den += fd * fd;
    }
    worst_rel = std::max(worst_rel, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }

  std::vector<double> trace;
  TrainHyper hyper;
  hyper.iterations = 300;
  train(features, labels, hyper, &trace);
  bool monotone = true;
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1]) monotone = false;
  bool pass = worst_rel < rel_tol && monotone;
  return {pass, "max gradient relative error = " + sci(worst_rel) + " (tolerance " +
                    sci(rel_tol) + "), loss trace " +
                    (monotone ? "non-increasing" : "increased")};
}

// 7. Diffusion reconstruction: the single-Gaussian reverse pass matches the
//    product-of-multipliers closed form, reruns are bitwise identical, and
//    round-trip error on a tight mixture is small at 20 steps and shrinks as
//    steps grow.
Outcome diffusion_closed_form_and_roundtrip() {
  constexpr double form_tol = 1e-10;
  constexpr double t20_bound = 0.05;

  DiffusionSchedule sched = make_linear_schedule(20);
  double sigma0 = 0.45;
  Vec mu{0.7, -0.4, 1.1};
  GmmScoreModel single = make_gmm({1.0}, {mu}, sigma0);
  double prod = 1.0;
  for (int t = 1; t <= sched.steps; ++t) {
    double hi = sched.abar(t), lo = sched.abar(t - 1);
    double var = hi * sigma0 * sigma0 + 1.0 - hi;
    prod *= (std::sqrt(lo * hi) * sigma0 * sigma0 +
             std::sqrt((1.0 - lo) * (1.0 - hi))) /
            var;
  }
  auto eps_fn = [&](const Vec& y, int t) { return exact_eps(single, sched, y, t); };
  Vec x_top{1.3, 0.2, -0.6};
  Vec cur = x_top;
  for (int t = sched.steps; t >= 1; --t)
    cur = ddim_step(sched, eps_fn, cur, t, StepDirection::Reverse);
  double form_dev = 0.0;
  double root_ab_top = std::sqrt(sched.abar(sched.steps));
  for (std::size_t i = 0; i < 3; ++i) {
    double want = mu[i] + prod * (x_top[i] - root_ab_top * mu[i]);
    form_dev = std::max(form_dev, std::abs(cur[i] - want));
  }
  if (form_dev > form_tol)
    return {false, "closed-form deviation " + sci(form_dev) + " exceeds " + sci(form_tol)};

  Rng mean_rng(derive_seed(9, stream::mixture));
  std::vector<Vec> means(4, Vec(8));
  for (Vec& m : means)
    for (double& v : m) v = 2.0 * mean_rng.gaussian();
  GmmScoreModel gmm = make_gmm(std::vector<double>(4, 1.0), means, 0.05);

  std::vector<Vec> points;
  for (int i = 0; i < 32; ++i) {
    Rng rng(derive_seed(10, stream::data, static_cast<std::uint64_t>(i)));
    Vec x = means[static_cast<std::size_t>(i) % 4];
    for (double& v : x) v += 0.05 * rng.gaussian();
    points.push_back(std::move(x));
  }

  DiffusionSchedule s20 = make_linear_schedule(20);
  Vec a = reconstruct_ddim(gmm, s20, points[0]);
  Vec b = reconstruct_ddim(gmm, s20, points[0]);
  if (a != b) return {false, "rerun of the same reconstruction changed bits"};

  std::string detail = "closed-form dev " + sci(form_dev) + "; mean rel L2";
  double prev = 1e9, err20 = 0.0;
  bool monotone = true;
  for (int steps : {10, 20, 50, 200}) {
    DiffusionSchedule sc = make_linear_schedule(steps);
    double mean_rel = 0.0;
    for (const Vec& x : points) {
      Vec r = reconstruct_ddim(gmm, sc, x);
      mean_rel += norm(sub(r, x)) / norm(x) / points.size();
    }
    if (steps == 20) err20 = mean_rel;
    if (mean_rel > prev) monotone = false;
    prev = mean_rel;
    detail += " T" + std::to_string(steps) + "=" + fix(mean_rel, 4);
  }
  bool pass = err20 < t20_bound && monotone;
  return {pass, detail + (monotone ? ", decreasing" : ", NOT decreasing") +
                    ", bound at T20 " + fix(t20_bound, 2)};
}

// 8. Percentile calibration holds its advertised false positive rate on a
//    held-out split: default cell, threshold at the 95th percentile of 2000
//    training real scores, FPR on 2000 fresh reals lands in [3%, 7%].
Outcome calibration_false_positive_rate() {
  ExperimentConfig cfg;
  cfg.out_dir = "";
  CellOutcome cell = run_cell(cfg, 0.2, cfg.master_seed, config_hash(cfg));
  for (const DetectorReport& r : cell.reports) {
    if (r.detector != "did") continue;
    const Confusion& c = r.report.counts;
    double fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    bool pass = fpr >= 0.03 && fpr <= 0.07;
    return {pass, "held-out FPR = " + fix(fpr, 4) + " (" + std::to_string(c.fp) + "/" +
                      std::to_string(c.fp + c.tn) + "), band [0.03, 0.07]"};
  }
  return {false, "fused detector report missing"};
}

// 9. Sweep outputs are byte-identical across reruns and thread counts.
Outcome sweep_determinism() {
  ExperimentConfig cfg;
  cfg.train_per_class = 200;
  cfg.test_per_class = 200;
  cfg.signal_grid = {0.5, 0.1};
  cfg.seeds = 2;

  std::string dir_a = scratch_dir("sweep_a");
  std::string dir_b = scratch_dir("sweep_b");
  cfg.out_dir = dir_a;
  SweepResult first_serial = run_sweep(cfg, 1);
  cfg.out_dir = dir_b;
  SweepResult threaded = run_sweep(cfg, 4);
  cfg.out_dir = "";
  SweepResult second_serial = run_sweep(cfg, 1);

  if (first_serial.csv != second_serial.csv)
    return {false, "rerun changed the csv"};
  if (first_serial.csv != threaded.csv)
    return {false, "thread count changed the csv"};
  if (read_text_file(dir_a + "/sweep.csv") != first_serial.csv)
    return {false, "written csv differs from computed csv"};

  std::size_t images = 0;
  for (std::size_t i = 0; i < first_serial.cells.size(); ++i) {
    const CellOutcome& a = first_serial.cells[i];
    const CellOutcome& b = threaded.cells[i];
    const CellOutcome& c = second_serial.cells[i];
    if (a.fake_delta2_pgm != b.fake_delta2_pgm || a.fake_delta2_pgm != c.fake_delta2_pgm ||
        a.real_delta2_pgm != b.real_delta2_pgm || a.real_delta2_pgm != c.real_delta2_pgm)
      return {false, "raster bytes differ at cell " + std::to_string(i)};
    std::string stem = "/" + cell_stem(a);
    for (const char* suffix : {"_fake_delta2.pgm", "_real_delta2.pgm"}) {
      if (read_text_file(dir_a + stem + suffix) != read_text_file(dir_b + stem + suffix))
        return {false, std::string("written raster differs: ") + stem + suffix};
      ++images;
    }
  }
  return {true, "csv and " + std::to_string(images) +
                    " rasters byte-identical across reruns and threads {1,4}"};
}

}  // namespace

int main() {
  std::vector<std::function<Outcome()>> criteria = {
      repeated_bias_cancellation,     normal_signal_recovery,
      sweep_ordering,                 and_gate_calibration,
      auroc_oracle_equivalence,       training_gradient_and_descent,
      diffusion_closed_form_and_roundtrip, calibration_false_positive_rate,
      sweep_determinism,
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu: %s (%s)\n", i + 1, o.pass ? "pass" : "fail",
                o.detail.c_str());
    std::fflush(stdout);
  }
  if (failures) std::printf("acceptance: %d of 9 criteria failed\n", failures);
  else std::printf("acceptance: all 9 criteria passed\n");
  return failures == 0 ? 0 : 1;
}
