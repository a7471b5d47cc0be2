#include "tpplab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "tpplab/diagnose.hpp"
#include "tpplab/evaluate.hpp"
#include "tpplab/infer.hpp"
#include "tpplab/io.hpp"
#include "tpplab/simulate.hpp"
#include "tpplab/stats.hpp"

namespace tpp::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

class StrictDiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> quoted_argv(const std::vector<std::string>& args) {
  std::vector<std::string> out = {"tpplab"};
  out.insert(out.end(), args.begin(), args.end());
  return out;
}

io::Manifest base_manifest(const std::string& command, const std::vector<std::string>& args,
                           std::uint64_t seed) {
  io::Manifest m;
  m.command = command;
  m.argv = quoted_argv(args);
  m.seed = seed;
  return m;
}

void add_input(io::Manifest& m, const fs::path& path) {
  m.input_hashes.emplace_back(path.string(), io::sha256_file(path));
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string annotations, sessions, out;
  bool tolerate_offgrid = false;
  bool lenient = false;
};

int cmd_ingest(const IngestArgs& a, const std::vector<std::string>& argv) {
  const auto ann = io::read_annotations_csv(a.annotations, a.tolerate_offgrid);
  const auto ses = io::read_sessions_csv(a.sessions, a.tolerate_offgrid);
  auto ds = io::ingest(ann, ses);
  const auto report = validate_dataset(ds);

  const fs::path out(a.out);
  io::write_dataset_jsonl(ds, out / "dataset.jsonl");
  io::write_validation_json(report, out / "validation.json");

  auto manifest = base_manifest("ingest", argv, 0);
  add_input(manifest, a.annotations);
  add_input(manifest, a.sessions);
  manifest.outputs = {"dataset.jsonl", "validation.json"};
  ordered_json cfg;
  cfg["tolerate_offgrid"] = a.tolerate_offgrid;
  cfg["lenient"] = a.lenient;
  cfg["dedup_count"] = ds.metadata["dedup_count"];
  cfg["time_encoding_annotations"] = ds.metadata["time_encoding_annotations"];
  cfg["time_encoding_sessions"] = ds.metadata["time_encoding_sessions"];
  manifest.config_json = cfg.dump();
  io::write_manifest(manifest, out);

  std::cout << "ingested " << ds.sequences.size() << " sessions, " << report.n_onsets
            << " onsets, " << report.violations.size() << " violations\n";
  if (!report.ok() && !a.lenient) {
    for (const auto& v : report.violations) std::cerr << "violation: " << v << '\n';
    return kExitInput;
  }
  return kExitOk;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string family, params_file, duration_file, out;
  std::size_t sessions = 1;
  double T = 0.0;
  std::uint64_t seed = 0;
  std::size_t max_events = 100000;
  double lookahead = 10.0;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const auto params = io::read_params_file(a.params_file);
  if (to_string(params.family()) != a.family)
    throw io::InputError("--family " + a.family + " does not match params file (" +
                         to_string(params.family()) + ")");

  std::vector<double> durations;
  if (!a.duration_file.empty()) {
    std::istringstream in(io::read_text_file(a.duration_file));
    double v = 0.0;
    while (in >> v) durations.push_back(v);
    if (durations.empty()) throw io::InputError(a.duration_file + ": no durations");
  } else {
    if (!(a.T > 0.0)) throw io::InputError("provide --T > 0 or --duration-file");
    durations.push_back(a.T);
  }

  SimConfig cfg;
  cfg.seed = a.seed;
  cfg.max_events = a.max_events;
  cfg.lookahead = a.lookahead;

  Dataset ds;
  for (std::size_t i = 0; i < a.sessions; ++i) {
    std::ostringstream id;
    id << "sim-" << std::setw(5) << std::setfill('0') << i;
    ds.sequences.push_back(
        thinning_simulate(params, durations[i % durations.size()], cfg, id.str()));
  }
  ds.metadata["provenance_family"] = to_string(params.family());
  ds.metadata["provenance_seed"] = std::to_string(a.seed);
  ds.metadata["provenance_theta"] = a.params_file;

  const fs::path out(a.out);
  io::write_dataset_jsonl(ds, out / "dataset.jsonl");

  auto manifest = base_manifest("simulate", argv, a.seed);
  add_input(manifest, a.params_file);
  if (!a.duration_file.empty()) add_input(manifest, a.duration_file);
  manifest.outputs = {"dataset.jsonl"};
  ordered_json cfgj;
  cfgj["provenance"] = {{"family", to_string(params.family())},
                        {"theta_source", a.params_file},
                        {"seed", a.seed}};
  cfgj["sessions"] = a.sessions;
  cfgj["max_events"] = a.max_events;
  cfgj["lookahead"] = a.lookahead;
  manifest.config_json = cfgj.dump();
  io::write_manifest(manifest, out);

  std::cout << "simulated " << ds.sequences.size() << " sessions (" << ds.total_events()
            << " onsets) from " << to_string(params.family()) << "\n";
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string dataset, family, prior_file, out, sampler = "nuts";
  ChainConfig chain;
  bool strict = false;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  const auto family = family_from_string(a.family);
  const auto ds = io::read_dataset_jsonl(a.dataset);
  if (ds.sequences.empty()) throw io::InputError(a.dataset + ": dataset has no sessions");
  auto prior = a.prior_file.empty() ? PriorSpec::defaults(family)
                                    : io::read_prior_file(a.prior_file, family);
  ChainConfig cfg = a.chain;
  cfg.sampler = a.sampler == "rwm" ? SamplerKind::RandomWalk : SamplerKind::Nuts;

  const auto samples = run_nuts(family, ds, prior, cfg);
  const fs::path out(a.out);
  io::write_archive(samples, cfg, prior, out);

  auto manifest = base_manifest("fit", argv, cfg.seed);
  add_input(manifest, a.dataset);
  if (!a.prior_file.empty()) add_input(manifest, a.prior_file);
  manifest.outputs = {"draws.csv", "diagnostics.csv", "config.json"};
  manifest.config_json = io::read_text_file(out / "config.json");
  io::write_manifest(manifest, out);

  double worst_rhat = 0.0;
  for (const auto& d : samples.diagnostics())
    if (d.defined) worst_rhat = std::max(worst_rhat, d.r_hat);
  std::cout << "fit " << to_string(family) << ": " << cfg.n_chains << " chains x " << cfg.draws
            << " draws, max r_hat " << io::fmt_g(worst_rhat, 6) << ", divergences "
            << samples.divergences() << "\n";
  if (a.strict && worst_rhat > 1.05)
    throw StrictDiagnosticError("r_hat " + io::fmt_g(worst_rhat, 6) + " exceeds 1.05");
  return kExitOk;
}

// ---- diagnose -----------------------------------------------------------------

struct DiagnoseArgs {
  std::string dataset, posterior, out;
  std::size_t trials = 40;
  std::uint64_t seed = 0;
  std::size_t ripley_min = 15;
  bool theta_draws = false;  // average diagnostics over posterior draws
};

int cmd_diagnose(const DiagnoseArgs& a, const std::vector<std::string>& argv) {
  const auto ds = io::read_dataset_jsonl(a.dataset);
  const auto samples = io::read_archive(a.posterior);
  const auto draws = samples.all_draws();

  DiagnosticConfig cfg;
  cfg.seed = a.seed;
  cfg.trials = a.trials;
  cfg.ripley_min_onsets = a.ripley_min;

  DiagnosticReport report;
  if (!a.theta_draws) {
    report = run_diagnostics(ds, samples.posterior_mean(), draws, cfg);
  } else {
    // Average the transform over a strided subsample of draws: tau and
    // Lambda(T) become posterior-averaged measures.
    const std::size_t stride = std::max<std::size_t>(1, draws.size() / 200);
    std::vector<ParamSet> subset;
    for (std::size_t i = 0; i < draws.size(); i += stride) subset.push_back(draws[i]);
    report = run_diagnostics_draw_averaged(ds, subset, draws, cfg);
  }
  report.posterior_ref = a.posterior;

  const fs::path out(a.out);
  io::write_diagnostic_report(report, out);

  auto manifest = base_manifest("diagnose", argv, a.seed);
  add_input(manifest, a.dataset);
  manifest.consumed_manifest_hash = io::sha256_file(fs::path(a.posterior) / "manifest.json");
  manifest.outputs = {"qq.csv",       "residuals.csv", "counts_model.csv",
                      "counts_empirical.csv", "kde.csv",       "ripley.csv",
                      "quantile_audit.csv",   "report.json"};
  ordered_json cfgj;
  cfgj["trials"] = a.trials;
  cfgj["ripley_min_onsets"] = a.ripley_min;
  cfgj["theta"] = a.theta_draws ? "draw_averaged" : "posterior_mean";
  manifest.config_json = cfgj.dump();
  io::write_manifest(manifest, out);

  std::cout << "diagnose: WD " << io::fmt_g(report.wd_mean, 6) << " +- "
            << io::fmt_g(report.wd_sd, 6) << " over " << a.trials << " trials\n";
  return kExitOk;
}

// ---- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string dataset, posterior, out;
  std::vector<double> dt_list = {1, 5, 10, 15, 20, 25};
  std::size_t starts = 25;
  std::size_t traj = 75;
  std::size_t roc_starts = 100;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  const auto ds = io::read_dataset_jsonl(a.dataset);
  const auto samples = io::read_archive(a.posterior);
  const auto draws = samples.all_draws();
  const auto point = samples.posterior_mean();

  const auto loglik = pointwise_loglik(samples.family(), draws, ds);
  std::vector<std::string> ids;
  std::vector<std::size_t> counts;
  for (const auto& seq : ds.sequences) {
    ids.push_back(seq.session_id());
    counts.push_back(seq.count());
  }
  const auto loo = psis_loo(loglik, ids, counts);

  const fs::path out(a.out);
  fs::create_directories(out);

  std::ostringstream loo_csv;
  loo_csv << "session_id,elpd,elpd_per_event,pareto_k,category\n";
  for (const auto& s : loo.sessions) {
    loo_csv << s.session_id << ',' << io::fmt_g(s.elpd, 9) << ','
            << io::fmt_g(s.elpd_per_event, 9) << ',';
    if (s.category != ParetoCategory::Undefined) loo_csv << io::fmt_g(s.pareto_k, 9);
    loo_csv << ',' << to_string(s.category) << '\n';
  }
  io::write_text_file(out / "loo.csv", loo_csv.str());

  ordered_json metrics;
  metrics["family"] = to_string(samples.family());
  metrics["sessions"] = ds.sequences.size();
  metrics["elpd"] = {{"total", loo.elpd_total},
                     {"se", loo.se},
                     {"pareto_good", loo.count(ParetoCategory::Good)},
                     {"pareto_ok", loo.count(ParetoCategory::Ok)},
                     {"pareto_bad", loo.count(ParetoCategory::Bad)},
                     {"pareto_undefined", loo.count(ParetoCategory::Undefined)}};
  metrics["wd"] = nullptr;  // reported by the diagnose command

  std::ostringstream windows_csv;
  windows_csv << "protocol,session_id,t_start,dt,true_count,label,predicted_median,"
                 "occupancy_prob\n";

  ordered_json mape_rows = ordered_json::array();
  ordered_json auc_rows = ordered_json::array();
  for (double dt : a.dt_list) {
    const auto mape = mape_protocol(samples.family(), draws, ds, dt, a.starts, a.traj, a.seed);
    mape_rows.push_back({{"dt", dt},
                         {"mape", mape.mape},
                         {"windows", mape.windows},
                         {"sessions_used", mape.sessions_used},
                         {"sessions_skipped", mape.sessions_skipped}});
    for (const auto& w : mape.samples) {
      windows_csv << "mape," << w.session_id << ',' << io::fmt_g(w.t_start, 9) << ','
                  << io::fmt_g(w.dt, 9) << ',' << w.true_count << ',' << w.label << ','
                  << io::fmt_g(w.predicted_median, 9) << ",\n";
    }

    const auto roc = rocauc_protocol(point, ds, dt, a.roc_starts, a.seed);
    auc_rows.push_back({{"dt", dt},
                        {"auc", roc.defined ? ordered_json(roc.auc) : ordered_json(nullptr)},
                        {"n_samples", roc.n_samples},
                        {"n_positive", roc.n_positive},
                        {"n_negative", roc.n_negative},
                        {"sessions_used", roc.sessions_used},
                        {"sessions_skipped", roc.sessions_skipped}});
    for (const auto& w : roc.samples) {
      windows_csv << "roc," << w.session_id << ',' << io::fmt_g(w.t_start, 9) << ','
                  << io::fmt_g(w.dt, 9) << ',' << w.true_count << ',' << w.label << ",,"
                  << io::fmt_g(w.occupancy_prob, 9) << '\n';
    }
  }
  metrics["mape"] = mape_rows;
  metrics["auc"] = auc_rows;
  io::write_text_file(out / "windows.csv", windows_csv.str());
  io::write_text_file(out / "metrics.json", metrics.dump(2) + "\n");

  auto manifest = base_manifest("evaluate", argv, a.seed);
  add_input(manifest, a.dataset);
  manifest.consumed_manifest_hash = io::sha256_file(fs::path(a.posterior) / "manifest.json");
  manifest.outputs = {"loo.csv", "windows.csv", "metrics.json"};
  ordered_json cfgj;
  cfgj["dt_list"] = a.dt_list;
  cfgj["starts"] = a.starts;
  cfgj["traj"] = a.traj;
  cfgj["roc_starts"] = a.roc_starts;
  manifest.config_json = cfgj.dump();
  io::write_manifest(manifest, out);

  std::cout << "evaluate: elpd " << io::fmt_g(loo.elpd_total, 9) << " +- "
            << io::fmt_g(loo.se, 6) << "\n";
  return kExitOk;
}

// ---- forecast ---------------------------------------------------------------------

struct ForecastArgs {
  std::string dataset, posterior, session, out;
  double t_start = 0.0;
  double dt = 0.0;
  std::size_t traj = 250;
  std::uint64_t seed = 0;
};

int cmd_forecast(const ForecastArgs& a, const std::vector<std::string>& argv) {
  const auto ds = io::read_dataset_jsonl(a.dataset);
  const auto samples = io::read_archive(a.posterior);
  const EventSequence* seq = nullptr;
  for (const auto& s : ds.sequences) {
    if (s.session_id() == a.session) seq = &s;
  }
  if (!seq) throw io::InputError("no session named " + a.session + " in " + a.dataset);

  SimConfig cfg;
  cfg.seed = a.seed;
  const auto fd = forecast_counts(samples.all_draws(), *seq, a.t_start, a.dt, a.traj, cfg);

  // Quantile bands of the cumulative forecast count on an even time grid.
  const std::size_t n_grid = 101;
  std::ostringstream csv;
  csv << "time,q5,q25,q50,q75,q95\n";
  for (std::size_t g = 0; g < n_grid; ++g) {
    const double t =
        a.t_start + a.dt * static_cast<double>(g) / static_cast<double>(n_grid - 1);
    std::vector<double> counts;
    counts.reserve(fd.trajectories.size());
    for (const auto& traj : fd.trajectories) {
      const auto n = std::upper_bound(traj.begin(), traj.end(), t) - traj.begin();
      counts.push_back(static_cast<double>(n));
    }
    std::sort(counts.begin(), counts.end());
    csv << io::fmt_g(t, 9);
    for (double p : {0.05, 0.25, 0.50, 0.75, 0.95})
      csv << ',' << io::fmt_g(stats::quantile_sorted(counts, p), 9);
    csv << '\n';
  }
  const fs::path out(a.out);
  io::write_text_file(out / "forecast.csv", csv.str());

  auto manifest = base_manifest("forecast", argv, a.seed);
  add_input(manifest, a.dataset);
  manifest.consumed_manifest_hash = io::sha256_file(fs::path(a.posterior) / "manifest.json");
  manifest.outputs = {"forecast.csv"};
  ordered_json cfgj;
  cfgj["session"] = a.session;
  cfgj["t_start"] = a.t_start;
  cfgj["dt"] = a.dt;
  cfgj["traj"] = a.traj;
  manifest.config_json = cfgj.dump();
  io::write_manifest(manifest, out);

  std::cout << "forecast " << a.session << " [" << a.t_start << ", " << a.t_start + a.dt
            << "): median count " << fd.median_count() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"temporal point process modeling toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "preprocess annotation CSVs into a dataset");
  ingest->add_option("--annotations", ingest_args.annotations)->required();
  ingest->add_option("--sessions", ingest_args.sessions)->required();
  ingest->add_option("--out", ingest_args.out)->required();
  ingest->add_flag("--tolerate-offgrid", ingest_args.tolerate_offgrid,
                   "round off-grid timestamps to the nearest 250 ms");
  ingest->add_flag("--lenient", ingest_args.lenient, "exit 0 despite validation violations");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "sample synthetic sessions by thinning");
  simulate->add_option("--family", sim_args.family)->required();
  simulate->add_option("--params-file", sim_args.params_file)->required();
  simulate->add_option("--sessions", sim_args.sessions)->required();
  simulate->add_option("--T", sim_args.T, "session duration in minutes");
  simulate->add_option("--duration-file", sim_args.duration_file,
                       "one duration per line, cycled across sessions");
  simulate->add_option("--seed", sim_args.seed)->required();
  simulate->add_option("--max-events", sim_args.max_events);
  simulate->add_option("--lookahead", sim_args.lookahead);
  simulate->add_option("--out", sim_args.out)->required();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Bayesian posterior sampling");
  fit->add_option("--dataset", fit_args.dataset)->required();
  fit->add_option("--family", fit_args.family)->required();
  fit->add_option("--prior-file", fit_args.prior_file);
  fit->add_option("--chains", fit_args.chain.n_chains);
  fit->add_option("--warmup", fit_args.chain.warmup);
  fit->add_option("--draws", fit_args.chain.draws);
  fit->add_option("--target-accept", fit_args.chain.target_accept);
  fit->add_option("--max-tree-depth", fit_args.chain.max_tree_depth);
  fit->add_option("--sampler", fit_args.sampler)
      ->check(CLI::IsMember({"nuts", "rwm"}))
      ->description("nuts (default) or the random-walk fallback");
  fit->add_option("--seed", fit_args.chain.seed)->required();
  fit->add_flag("--strict", fit_args.strict, "exit 4 when any r_hat exceeds 1.05");
  fit->add_option("--out", fit_args.out)->required();

  DiagnoseArgs diag_args;
  auto* diagnose = app.add_subcommand("diagnose", "goodness-of-fit report");
  diagnose->add_option("--dataset", diag_args.dataset)->required();
  diagnose->add_option("--posterior", diag_args.posterior)->required();
  diagnose->add_option("--trials", diag_args.trials);
  diagnose->add_option("--ripley-min", diag_args.ripley_min);
  diagnose->add_flag("--theta-draws", diag_args.theta_draws,
                     "average the RTC/residual diagnostics over posterior draws");
  diagnose->add_option("--seed", diag_args.seed)->required();
  diagnose->add_option("--out", diag_args.out)->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "predictive scoring (LOO, MAPE, ROC-AUC)");
  evaluate->add_option("--dataset", eval_args.dataset)->required();
  evaluate->add_option("--posterior", eval_args.posterior)->required();
  evaluate->add_option("--dt-list", eval_args.dt_list)->delimiter(',');
  evaluate->add_option("--starts", eval_args.starts);
  evaluate->add_option("--traj", eval_args.traj);
  evaluate->add_option("--roc-starts", eval_args.roc_starts);
  evaluate->add_option("--seed", eval_args.seed)->required();
  evaluate->add_option("--out", eval_args.out)->required();

  ForecastArgs fc_args;
  auto* forecast = app.add_subcommand("forecast", "conditional count forecast for one session");
  forecast->add_option("--dataset", fc_args.dataset)->required();
  forecast->add_option("--posterior", fc_args.posterior)->required();
  forecast->add_option("--session", fc_args.session)->required();
  forecast->add_option("--t-start", fc_args.t_start)->required();
  forecast->add_option("--dt", fc_args.dt)->required();
  forecast->add_option("--traj", fc_args.traj);
  forecast->add_option("--seed", fc_args.seed)->required();
  forecast->add_option("--out", fc_args.out)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_args, args);
    if (*simulate) return cmd_simulate(sim_args, args);
    if (*fit) return cmd_fit(fit_args, args);
    if (*diagnose) return cmd_diagnose(diag_args, args);
    if (*evaluate) return cmd_evaluate(eval_args, args);
    if (*forecast) return cmd_forecast(fc_args, args);
  } catch (const io::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const StrictDiagnosticError& e) {
    std::cerr << "diagnostic failure: " << e.what() << '\n';
    return kExitDiagnostics;
  } catch (const ExplosionError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::domain_error& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}

}  // namespace tpp::cli
