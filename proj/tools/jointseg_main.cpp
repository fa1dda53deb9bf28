// Command-line front end for joint breakpoint detection in correlated
// series: simulate, fit, select, evaluate and bench subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#include "jointseg/jointseg.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace jointseg;

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "student") return NoiseKind::student;
  if (s == "wishart") return NoiseKind::wishart_hetero;
  throw CLI::ValidationError("--noise-kind",
                             "expected gaussian|student|wishart, got " + s);
}

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "homoscedastic") return NoiseMode::homoscedastic;
  if (s == "heteroscedastic") return NoiseMode::heteroscedastic;
  throw CLI::ValidationError(
      "--noise-mode", "expected homoscedastic|heteroscedastic, got " + s);
}

struct CommonEmFlags {
  std::string noise_mode = "homoscedastic";
  double tol = 1e-6;
  int max_iter = 200;
  int min_seg_len = 1;
  int restarts = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--noise-mode", noise_mode,
                    "homoscedastic|heteroscedastic (default homoscedastic)");
    cmd->add_option("--tol", tol, "EM relative tolerance on -2 loglik");
    cmd->add_option("--max-iter", max_iter, "EM iteration cap");
    cmd->add_option("--min-seg-len", min_seg_len, "minimum segment length");
    cmd->add_option("--restarts", restarts,
                    "extra EM runs from random initial segmentations");
  }

  EmOptions to_options(std::uint64_t seed) const {
    EmOptions o;
    o.noise_mode = parse_noise_mode(noise_mode);
    o.rel_tol = tol;
    o.max_iter = max_iter;
    o.min_seg_len = min_seg_len;
    o.random_restarts = restarts;
    o.seed = seed;
    return o;
  }
};

struct SimFlags {
  int m = 10;
  int n = 100;
  double kbar = 5.0;
  double sigma = 0.2;
  double rho = 0.8;
  double alpha = 0.2;
  std::string noise_kind = "gaussian";
  double df = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--m", m, "number of series");
    cmd->add_option("--n", n, "points per series");
    cmd->add_option("--kbar", kbar, "mean breakpoint count per series");
    cmd->add_option("--sigma", sigma, "residual standard deviation");
    cmd->add_option("--rho", rho, "spatial decay in (0,1)");
    cmd->add_option("--alpha", alpha, "nugget fraction in [0,1]");
    cmd->add_option("--noise-kind", noise_kind, "gaussian|student|wishart");
    cmd->add_option("--df", df, "degrees of freedom for student/wishart");
  }

  SimConfig to_config(std::uint64_t seed) const {
    SimConfig c;
    c.m = m;
    c.n = n;
    c.kbar = kbar;
    c.sigma = sigma;
    c.rho = rho;
    c.alpha = alpha;
    c.noise_kind = parse_noise_kind(noise_kind);
    c.df = df;
    c.seed = seed;
    return c;
  }
};

nlohmann::json table_to_json(const SeriesMatrix& y, const CriterionTable& t) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "selection";
  j["k_hat"] = t.k_hat;
  j["q_hat"] = t.q_hat;
  j["failures"] = t.failures;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells) {
    nlohmann::json jc{{"k", c.k}, {"q", c.q}, {"ok", c.ok}};
    if (c.ok) {
      jc["loglik"] = c.loglik;
      jc["bic"] = c.bic;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  nlohmann::json per_k = nlohmann::json::array();
  for (const auto& r : t.per_k) {
    nlohmann::json jr{{"k", r.k}, {"ok", r.ok}};
    if (r.ok) {
      jr["q_hat"] = r.q_hat;
      jr["mbic"] = r.mbic_degenerate ? nlohmann::json(nullptr)
                                     : nlohmann::json(r.mbic);
      jr["mbic_degenerate"] = r.mbic_degenerate;
    } else {
      jr["error"] = r.error;
    }
    per_k.push_back(std::move(jr));
  }
  j["per_k"] = std::move(per_k);
  j["best_fit"] = fit_to_json(y, t.best);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint breakpoint detection in correlated series"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  SimFlags sim_flags;
  sim_flags.attach(sim_cmd);
  std::uint64_t sim_seed = 0;
  std::string sim_out, sim_truth_out;
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_option("--output", sim_out, "output CSV path")->required();
  sim_cmd->add_option("--truth", sim_truth_out, "truth JSON sidecar path");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a fixed (K, Q) model");
  std::string fit_in, fit_out;
  int fit_k = 0, fit_q = 0;
  std::uint64_t fit_seed = 0;
  CommonEmFlags fit_em;
  fit_cmd->add_option("--input", fit_in, "input CSV")->required();
  fit_cmd->add_option("--output", fit_out, "output fit JSON")->required();
  fit_cmd->add_option("--k", fit_k, "total number of segments")->required();
  fit_cmd->add_option("--q", fit_q, "number of factors")->required();
  fit_cmd->add_option("--seed", fit_seed, "seed for --restarts");
  fit_em.attach(fit_cmd);

  // select
  auto* sel_cmd = app.add_subcommand("select", "select (K, Q) by BIC/mBIC");
  std::string sel_in, sel_out;
  int sel_kmax = -1, sel_qmax = -1, sel_threads = 1;
  std::uint64_t sel_seed = 0;
  CommonEmFlags sel_em;
  sel_cmd->add_option("--input", sel_in, "input CSV")->required();
  sel_cmd->add_option("--output", sel_out, "output selection JSON")->required();
  sel_cmd->add_option("--kmax", sel_kmax, "largest K (default M + N/25)");
  sel_cmd->add_option("--qmax", sel_qmax, "largest Q (default M-1)");
  sel_cmd->add_option("--threads", sel_threads, "parallel grid workers");
  sel_cmd->add_option("--seed", sel_seed, "seed for --restarts");
  sel_em.attach(sel_cmd);

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "score a fit against simulation truth");
  std::string eval_fit, eval_truth, eval_out;
  int eval_window = 0;
  eval_cmd->add_option("--fit", eval_fit, "fit JSON")->required();
  eval_cmd->add_option("--truth", eval_truth, "truth JSON")->required();
  eval_cmd->add_option("--output", eval_out, "output scores JSON")->required();
  eval_cmd->add_option("--window", eval_window,
                       "breakpoint match tolerance (default 0 = exact)");

  // bench
  auto* bench_cmd =
      app.add_subcommand("bench", "replicated simulate/select/score harness");
  SimFlags bench_sim;
  bench_sim.attach(bench_cmd);
  CommonEmFlags bench_em;
  bench_em.attach(bench_cmd);
  std::uint64_t bench_seed = 0;
  int bench_reps = 100, bench_kmax = -1, bench_qmax = -1, bench_window = 0,
      bench_threads = 0;
  int bench_force_q = -1;
  bool bench_force_k = false;
  std::string bench_out, bench_summary;
  bench_cmd->add_option("--seed", bench_seed, "base seed; replicate r uses seed+r");
  bench_cmd->add_option("--replicates", bench_reps, "number of replicates");
  bench_cmd->add_option("--kmax", bench_kmax, "largest K in the grid");
  bench_cmd->add_option("--qmax", bench_qmax, "largest Q in the grid");
  bench_cmd->add_option("--force-q", bench_force_q,
                        "fit this Q only (e.g. 0 for independent series)");
  bench_cmd->add_flag("--force-true-k", bench_force_k,
                      "fit at the true K instead of selecting it");
  bench_cmd->add_option("--window", bench_window, "breakpoint match tolerance");
  bench_cmd->add_option("--threads", bench_threads,
                        "parallel replicates (0 = all cores)");
  bench_cmd->add_option("--output", bench_out, "per-replicate CSV")->required();
  bench_cmd->add_option("--summary", bench_summary, "summary CSV");

  try {
    app.parse(argc, argv);

    if (sim_cmd->parsed()) {
      auto [y, truth] = simulate(sim_flags.to_config(sim_seed));
      write_csv(sim_out, y.values);
      if (!sim_truth_out.empty()) emit_truth(truth, sim_truth_out);
    } else if (fit_cmd->parsed()) {
      const SeriesMatrix y = ingest_csv(fit_in);
      const ModelFit fit = em_fit(y, fit_k, fit_q, fit_em.to_options(fit_seed));
      emit_fit(y, fit, fit_out);
    } else if (sel_cmd->parsed()) {
      const SeriesMatrix y = ingest_csv(sel_in);
      const SelectionGrid grid =
          SelectionGrid::defaults(y.n(), y.m(), sel_kmax, sel_qmax);
      const CriterionTable table =
          select(y, grid, sel_em.to_options(sel_seed), sel_threads);
      detail::write_json(table_to_json(y, table), sel_out);
    } else if (eval_cmd->parsed()) {
      const ModelFit fit = parse_fit(eval_fit);
      const SimTruth truth = parse_truth(eval_truth);
      const ScoreReport rep = evaluate_fit(fit, truth, eval_window);
      emit_scores(rep, eval_window, eval_out);
    } else if (bench_cmd->parsed()) {
      BenchConfig cfg;
      cfg.sim = bench_sim.to_config(bench_seed);
      cfg.em = bench_em.to_options(bench_seed);
      cfg.replicates = bench_reps;
      cfg.k_max = bench_kmax;
      cfg.q_max = bench_qmax;
      if (bench_force_q >= 0) cfg.force_q = bench_force_q;
      cfg.force_true_k = bench_force_k;
      cfg.window = bench_window;
      cfg.threads = bench_threads;
      const BenchResult res = run_bench(cfg);
      write_bench_csv(res.rows, bench_out);
      if (!bench_summary.empty())
        write_summary_csv(cfg, res.summary, bench_summary);
      if (res.summary.failures > 0)
        std::cerr << "bench: " << res.summary.failures
                  << " replicate(s) failed\n";
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // fold CLI11's parse-error codes into 1
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
