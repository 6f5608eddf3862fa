#include "fofreg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "fofreg/curve_table.hpp"
#include "fofreg/simulate.hpp"

namespace fofreg::cli {

namespace {

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumericalError;
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  return out;
}

std::string config_comment(const FitConfig& cfg, bool rescale_auto, std::uint64_t seed) {
  return "# config: t_nodes=" + std::to_string(cfg.t_nodes) +
         " s_nodes=" + std::to_string(cfg.s_nodes) + " lambda_min=" +
         format_double(cfg.lambda_min) + " lambda_max=" + format_double(cfg.lambda_max) +
         " lambda_count=" + std::to_string(cfg.lambda_count) +
         " fudge=" + format_double(cfg.fudge) + " seed=" + std::to_string(seed) +
         " rescale=" + (rescale_auto ? "auto" : "off");
}

struct PairedData {
  std::vector<Curve> x;
  std::vector<Curve> y;
  std::array<double, 2> x_range{0.0, 1.0};
  std::array<double, 2> y_range{0.0, 1.0};
};

// Pairs the two tables by curve_id (order of the predictor file) and maps
// the abscissae onto [0,1].
PairedData load_pairs(const std::string& x_csv, const std::string& y_csv, bool rescale_auto) {
  CurveTable xt = read_curve_table(x_csv);
  CurveTable yt = read_curve_table(y_csv);

  std::map<std::string, size_t> y_index;
  for (size_t i = 0; i < yt.curves.size(); ++i) y_index[yt.curves[i].label] = i;
  if (yt.curves.size() != xt.curves.size())
    throw std::invalid_argument("predictor and response files carry different curve_id sets");

  PairedData data;
  data.x = std::move(xt.curves);
  data.y.reserve(data.x.size());
  for (const Curve& xc : data.x) {
    const auto it = y_index.find(xc.label);
    if (it == y_index.end())
      throw std::invalid_argument("curve_id '" + xc.label + "' is missing from the response file");
    data.y.push_back(yt.curves[it->second]);
  }

  if (rescale_auto) {
    data.x_range = {xt.arg_min, xt.arg_max};
    data.y_range = {yt.arg_min, yt.arg_max};
    rescale_args(data.x, xt.arg_min, xt.arg_max);
    rescale_args(data.y, yt.arg_min, yt.arg_max);
  } else {
    if (xt.arg_min < 0.0 || xt.arg_max > 1.0 || yt.arg_min < 0.0 || yt.arg_max > 1.0)
      throw std::invalid_argument("rescale=off requires every arg in [0,1]");
  }
  return data;
}

}  // namespace

int cmd_fit(const FitOptions& opt) {
  return guarded([&] {
    PairedData data = load_pairs(opt.x_csv, opt.y_csv, opt.rescale_auto);
    FittedModel model = fit(data.x, data.y, opt.fit);
    model.x_arg_range = data.x_range;
    model.y_arg_range = data.y_range;
    save_model(model, opt.model_out);

    nlohmann::json line{{"lambda", model.lambda},
                        {"edf", model.gcv_trace.edf(model.gcv_trace.chosen)},
                        {"gcv", model.gcv_trace.chosen_score()}};
    std::cout << line.dump() << "\n";
    return kExitOk;
  });
}

int cmd_predict(const PredictOptions& opt) {
  return guarded([&] {
    if (opt.t_grid_size < 1) throw std::invalid_argument("t_grid_size must be >= 1");
    const FittedModel model = load_model(opt.model_path);
    CurveTable xt = read_curve_table(opt.x_csv);

    const auto [xlo, xhi] = model.x_arg_range;
    if (xhi > xlo && (xlo != 0.0 || xhi != 1.0)) rescale_args(xt.curves, xlo, xhi);

    Eigen::VectorXd t01(opt.t_grid_size);
    for (int i = 0; i < opt.t_grid_size; ++i) t01(i) = (i + 0.5) / opt.t_grid_size;
    const PredictionResult pred = predict(model, xt.curves, t01);

    const auto [ylo, yhi] = model.y_arg_range;
    std::ofstream out = open_output(opt.out_csv);
    out << "# config: model=" << opt.model_path << " t_grid_size=" << opt.t_grid_size << "\n";
    out << "curve_id,t,eta\n";
    for (size_t i = 0; i < pred.eta.size(); ++i)
      for (Eigen::Index j = 0; j < t01.size(); ++j)
        out << pred.eta[i].label << "," << format_double(ylo + t01(j) * (yhi - ylo)) << ","
            << format_double(pred.eta[i].values(j)) << "\n";
    return kExitOk;
  });
}

int cmd_gcv(const GcvOptions& opt) {
  return guarded([&] {
    PairedData data = load_pairs(opt.x_csv, opt.y_csv, opt.rescale_auto);
    const FittedModel model = fit(data.x, data.y, opt.fit);
    const GcvTrace& trace = model.gcv_trace;

    std::ofstream out = open_output(opt.out_csv);
    out << config_comment(opt.fit, opt.rescale_auto, opt.seed) << "\n";
    out << "lambda,gcv,edf,chosen\n";
    for (Eigen::Index i = 0; i < trace.lambdas.size(); ++i)
      out << format_double(trace.lambdas(i)) << "," << format_double(trace.scores(i)) << ","
          << format_double(trace.edf(i)) << "," << (i == trace.chosen ? 1 : 0) << "\n";
    return kExitOk;
  });
}

int cmd_simulate(const SimulateOptions& opt) {
  return guarded([&] {
    ScenarioSpec spec;
    spec.id = opt.scenario;
    spec.n = opt.n;
    spec.snr = opt.snr;
    spec.seed = opt.seed;
    const bool sparse = opt.sparsity > 0;
    spec.t_points = sparse ? 50 : 20;
    spec.s_points = sparse ? 50 : 20;
    if (sparse) spec.sparsity = opt.sparsity;
    const int test_size = opt.test_size > 0 ? opt.test_size : (sparse ? 50 : 30);

    const SimReport report =
        run_experiment(spec, opt.replicates, test_size, opt.fit, opt.presmooth);

    std::ofstream out = open_output(opt.out_csv);
    out << config_comment(opt.fit, true, opt.seed) << " scenario=" << spec.id << " n=" << spec.n
        << " snr=" << format_double(spec.snr) << " sparsity=" << opt.sparsity
        << " replicates=" << opt.replicates << " test_size=" << test_size
        << " presmooth=" << (report.presmoothed ? "true" : "false") << "\n";
    out << "scenario,snr,sparsity,seed,mise,log2_mise,chosen_lambda,runtime_ms";
    if (sparse) out << ",presmoothed";
    out << "\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const ReplicateRow& row : report.rows) {
      if (row.failed)
        std::cerr << "warning: replicate " << row.replicate << " failed: " << row.error << "\n";
      out << spec.id << "," << format_double(spec.snr) << "," << opt.sparsity << "," << row.seed
          << "," << format_double(row.failed ? nan : row.mise) << ","
          << format_double(row.failed ? nan : row.log2_mise) << ","
          << format_double(row.failed ? nan : row.lambda) << ","
          << format_double(opt.timing ? row.runtime_ms : 0.0);
      if (sparse) out << "," << (row.presmoothed ? "true" : "false");
      out << "\n";
    }

    nlohmann::json summary{{"scenario", spec.id},
                           {"n", spec.n},
                           {"snr", spec.snr},
                           {"sparsity", opt.sparsity},
                           {"replicates", opt.replicates},
                           {"test_size", test_size},
                           {"presmoothed", report.presmoothed},
                           {"failed", report.failed_count},
                           {"median_mise", report.median},
                           {"q1_mise", report.q1},
                           {"q3_mise", report.q3}};
    if (opt.timing) {
      double total = 0.0;
      for (const ReplicateRow& row : report.rows) total += row.runtime_ms;
      summary["runtime_ms_total"] = total;
    }
    std::cout << summary.dump() << "\n";
    return kExitOk;
  });
}

namespace {

void add_fit_flags(CLI::App* cmd, FitConfig& cfg, std::uint64_t& seed, std::string& rescale) {
  cmd->add_option("--t-nodes", cfg.t_nodes, "quadrature nodes on the response axis");
  cmd->add_option("--s-nodes", cfg.s_nodes, "quadrature nodes on the predictor axis");
  cmd->add_option("--lambda-min", cfg.lambda_min, "lower end of the lambda grid");
  cmd->add_option("--lambda-max", cfg.lambda_max, "upper end of the lambda grid");
  cmd->add_option("--lambda-count", cfg.lambda_count, "lambda grid size");
  cmd->add_option("--fudge", cfg.fudge, "GCV fudge factor (>= 1)");
  cmd->add_option("--seed", seed, "random seed (echoed into outputs)");
  cmd->add_option("--rescale", rescale, "arg rescaling: auto|off")
      ->check(CLI::IsMember({"auto", "off"}));
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"penalized function-on-function regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from an INI/TOML file");

  FitOptions fit_opt;
  GcvOptions gcv_opt;
  PredictOptions pred_opt;
  SimulateOptions sim_opt;
  std::string fit_rescale = "auto", gcv_rescale = "auto";

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model from paired curve CSVs");
  fit_cmd->add_option("-x,--x-csv", fit_opt.x_csv, "predictor curves")->required();
  fit_cmd->add_option("-y,--y-csv", fit_opt.y_csv, "response curves")->required();
  fit_cmd->add_option("-o,--out", fit_opt.model_out, "model JSON output path")->required();
  add_fit_flags(fit_cmd, fit_opt.fit, fit_opt.seed, fit_rescale);

  CLI::App* pred_cmd = app.add_subcommand("predict", "predict trajectories from a saved model");
  pred_cmd->add_option("-m,--model", pred_opt.model_path, "model JSON path")->required();
  pred_cmd->add_option("-x,--x-csv", pred_opt.x_csv, "predictor curves")->required();
  pred_cmd->add_option("-o,--out", pred_opt.out_csv, "predictions CSV output path")->required();
  pred_cmd->add_option("--t-grid-size", pred_opt.t_grid_size, "uniform output grid size");

  CLI::App* gcv_cmd = app.add_subcommand("gcv", "trace the GCV score over the lambda grid");
  gcv_cmd->add_option("-x,--x-csv", gcv_opt.x_csv, "predictor curves")->required();
  gcv_cmd->add_option("-y,--y-csv", gcv_opt.y_csv, "response curves")->required();
  gcv_cmd->add_option("-o,--out", gcv_opt.out_csv, "trace CSV output path")->required();
  add_fit_flags(gcv_cmd, gcv_opt.fit, gcv_opt.seed, gcv_rescale);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "run replicated scenario experiments");
  sim_cmd->add_option("--scenario", sim_opt.scenario, "scenario id (1, 2 or 3)")->required();
  sim_cmd->add_option("-n,--n", sim_opt.n, "training sample count");
  sim_cmd->add_option("--snr", sim_opt.snr, "signal-to-noise ratio");
  sim_cmd->add_option("--sparsity", sim_opt.sparsity, "points per curve (0 = dense design)");
  sim_cmd->add_option("--replicates", sim_opt.replicates, "number of replicates");
  sim_cmd->add_option("--seed", sim_opt.seed, "random seed");
  sim_cmd->add_option("--test-size", sim_opt.test_size, "test predictors per replicate (0 = default)");
  sim_cmd->add_flag("--presmooth,!--no-presmooth", sim_opt.presmooth,
                    "pre-smooth sparse curves before fitting");
  sim_cmd->add_flag("--timing", sim_opt.timing, "embed wall-clock times in the CSV");
  sim_cmd->add_option("-o,--out", sim_opt.out_csv, "per-replicate CSV output path")->required();
  std::string sim_rescale = "auto";
  add_fit_flags(sim_cmd, sim_opt.fit, sim_opt.seed, sim_rescale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUserError;
  }

  fit_opt.rescale_auto = fit_rescale == "auto";
  gcv_opt.rescale_auto = gcv_rescale == "auto";

  if (fit_cmd->parsed()) return cmd_fit(fit_opt);
  if (pred_cmd->parsed()) return cmd_predict(pred_opt);
  if (gcv_cmd->parsed()) return cmd_gcv(gcv_opt);
  if (sim_cmd->parsed()) return cmd_simulate(sim_opt);
  return kExitUserError;
}

}  // namespace fofreg::cli
