#include "fofreg/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace fofreg {

namespace {

void validate_config(const FitConfig& cfg) {
  if (cfg.t_nodes < 1 || cfg.t_nodes > 256 || cfg.s_nodes < 1 || cfg.s_nodes > 256)
    throw std::invalid_argument("fit: rule sizes must be in [1, 256]");
  if (!(cfg.lambda_min > 0.0) || !(cfg.lambda_max > cfg.lambda_min) || cfg.lambda_count < 1)
    throw std::invalid_argument("fit: lambda grid must satisfy 0 < min < max, count >= 1");
  if (!(cfg.fudge >= 1.0)) throw std::invalid_argument("fit: fudge factor must be >= 1");
}

// Values of the t-side basis factors [1, r1(t), (K1y Y_i)(t)] at one point.
Eigen::VectorXd t_factor_row(const FittedModel& model, double t) {
  const BasisCatalog& cat = model.catalog;
  const Eigen::Index n = cat.n, mt = cat.t_rule.size();
  Eigen::VectorXd kvec(mt);
  for (Eigen::Index l = 0; l < mt; ++l)
    kvec(l) = cat.ky.k1(t, cat.t_rule.nodes(l)) * cat.t_rule.weights(l);
  Eigen::VectorXd row(2 + n);
  row(0) = 1.0;
  row(1) = scaled_bernoulli(1, cat.ky.check_inside(t));
  row.tail(n) = cat.y_nodes.transpose() * kvec;
  return row;
}

Eigen::VectorXd s_factor_row(const FittedModel& model, double s) {
  const BasisCatalog& cat = model.catalog;
  const Eigen::Index n = cat.n, ms = cat.s_rule.size();
  Eigen::VectorXd kvec(ms);
  for (Eigen::Index l = 0; l < ms; ++l)
    kvec(l) = cat.kx.k1(s, cat.s_rule.nodes(l)) * cat.s_rule.weights(l);
  Eigen::VectorXd row(2 + n);
  row(0) = 1.0;
  row(1) = scaled_bernoulli(1, cat.kx.check_inside(s));
  row.tail(n) = cat.x_nodes.transpose() * kvec;
  return row;
}

// Integrals of the s-side factors against a centered predictor sampled at
// the s-rule nodes: [int Xc, int r1 Xc, int (K1x X_j) Xc].
Eigen::VectorXd centered_moments(const FittedModel& model, const Eigen::VectorXd& xc) {
  const BasisCatalog& cat = model.catalog;
  const Eigen::VectorXd wx = cat.s_rule.weights.cwiseProduct(xc);
  Eigen::VectorXd m(2 + cat.n);
  m(0) = wx.sum();
  double r1dot = 0.0;
  for (Eigen::Index l = 0; l < cat.s_rule.size(); ++l)
    r1dot += wx(l) * scaled_bernoulli(1, cat.s_rule.nodes(l));
  m(1) = r1dot;
  m.tail(cat.n) = cat.hx_nodes.transpose() * wx;
  return m;
}

Eigen::MatrixXd coef_from_dc(const Eigen::VectorXd& d, const Eigen::VectorXd& c, int n) {
  Eigen::MatrixXd coef(2 + n, 2 + n);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) coef(a, b) = d(2 * a + b);
  for (int j = 0; j < n; ++j) {
    coef(0, 2 + j) = c(j);
    coef(1, 2 + j) = c(n + j);
  }
  for (int i = 0; i < n; ++i) {
    coef(2 + i, 0) = c(2 * n + i);
    coef(2 + i, 1) = c(3 * n + i);
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) coef(2 + i, 2 + j) = c(4 * n + j * n + i);
  return coef;
}

}  // namespace

FittedModel fit(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                const FitConfig& config) {
  validate_config(config);
  if (x_curves.size() != y_curves.size())
    throw std::invalid_argument("fit: predictor/response curve counts differ");
  if (x_curves.size() < 2) throw std::invalid_argument("fit: need at least 2 curve pairs");
  for (const auto& c : x_curves) validate_curve(c);
  for (const auto& c : y_curves) validate_curve(c);

  const QuadratureRule t_rule = gauss_legendre(config.t_nodes);
  const QuadratureRule s_rule = gauss_legendre(config.s_nodes);

  const Eigen::Index n = static_cast<Eigen::Index>(x_curves.size());
  Eigen::MatrixXd x_nodes(s_rule.size(), n), y_nodes(t_rule.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x_nodes.col(i) = resample(x_curves[static_cast<size_t>(i)], s_rule.nodes);
    y_nodes.col(i) = resample(y_curves[static_cast<size_t>(i)], t_rule.nodes);
  }

  FittedModel model;
  model.x_mean = x_nodes.rowwise().mean();
  model.y_mean = y_nodes.rowwise().mean();
  x_nodes.colwise() -= model.x_mean;
  y_nodes.colwise() -= model.y_mean;

  model.catalog = build_catalog_from_nodes(std::move(x_nodes), std::move(y_nodes), t_rule, s_rule);

  const ReducedSolver solver(build_reduced(model.catalog));
  const Eigen::VectorXd grid =
      log_lambda_grid(config.lambda_min, config.lambda_max, config.lambda_count);
  model.gcv_trace = solver.select(grid, config.fudge);
  model.lambda = model.gcv_trace.chosen_lambda();
  model.fudge = config.fudge;

  ReducedSolver::Coefficients coefs = solver.solve(model.lambda);
  model.d = std::move(coefs.d);
  model.c = std::move(coefs.c);
  model.coef = std::move(coefs.coef);
  return model;
}

double eval_beta(const FittedModel& model, double t, double s) {
  return t_factor_row(model, t).dot(model.coef * s_factor_row(model, s));
}

Eigen::MatrixXd eval_beta_grid(const FittedModel& model, const Eigen::VectorXd& ts,
                               const Eigen::VectorXd& ss) {
  Eigen::MatrixXd a(ts.size(), model.coef.rows());
  for (Eigen::Index i = 0; i < ts.size(); ++i) a.row(i) = t_factor_row(model, ts(i));
  Eigen::MatrixXd b(ss.size(), model.coef.cols());
  for (Eigen::Index j = 0; j < ss.size(); ++j) b.row(j) = s_factor_row(model, ss(j));
  return a * model.coef * b.transpose();
}

PredictionResult predict(const FittedModel& model, const std::vector<Curve>& x_new,
                         const Eigen::VectorXd& t_grid) {
  const BasisCatalog& cat = model.catalog;
  const Eigen::VectorXd& eval_t = t_grid.size() > 0 ? t_grid : cat.t_rule.nodes;

  Eigen::MatrixXd a;
  Eigen::VectorXd mean_at_t;
  if (t_grid.size() == 0) {
    a = cat.t_factors;
    mean_at_t = model.y_mean;
  } else {
    a.resize(eval_t.size(), 2 + cat.n);
    for (Eigen::Index i = 0; i < eval_t.size(); ++i) a.row(i) = t_factor_row(model, eval_t(i));
    const Curve mean_curve{cat.t_rule.nodes, model.y_mean, "y_mean"};
    mean_at_t = resample(mean_curve, eval_t);
  }

  PredictionResult out;
  out.eta.reserve(x_new.size());
  out.eta_centered.reserve(x_new.size());
  for (const Curve& curve : x_new) {
    validate_curve(curve);
    const Eigen::VectorXd xc = resample(curve, cat.s_rule.nodes) - model.x_mean;
    const Eigen::VectorXd eta_c = a * (model.coef * centered_moments(model, xc));
    out.eta_centered.push_back(Curve{eval_t, eta_c, curve.label});
    out.eta.push_back(Curve{eval_t, eta_c + mean_at_t, curve.label});
  }
  return out;
}

double excess_risk(const FittedModel& model, const std::vector<Curve>& x_test,
                   const std::function<double(double, double)>& beta_true) {
  if (x_test.empty()) throw std::invalid_argument("excess_risk: no test curves");
  const BasisCatalog& cat = model.catalog;
  const Curve mean_curve{cat.s_rule.nodes, model.x_mean, "x_mean"};
  const QuadratureRule seg_rule = gauss_legendre(4, 0.0, 1.0);

  // Test curves usually share an abscissa grid; cache the surface values per
  // distinct grid since they dominate the cost.
  struct GridData {
    Eigen::VectorXd s_pts, s_wts;
    Eigen::MatrixXd delta;  // (beta_hat - beta_true) at t-nodes x s_pts
  };
  std::map<std::vector<double>, GridData> cache;

  double acc = 0.0;
  for (const Curve& curve : x_test) {
    validate_curve(curve);
    std::vector<double> key(curve.args.data(), curve.args.data() + curve.args.size());
    auto it = cache.find(key);
    if (it == cache.end()) {
      // Breakpoints: curve kinks plus the mean-curve grid, within [0,1].
      std::vector<double> brk{0.0, 1.0};
      for (Eigen::Index i = 0; i < curve.args.size(); ++i)
        if (curve.args(i) > 0.0 && curve.args(i) < 1.0) brk.push_back(curve.args(i));
      for (Eigen::Index i = 0; i < cat.s_rule.size(); ++i) brk.push_back(cat.s_rule.nodes(i));
      std::sort(brk.begin(), brk.end());
      brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

      GridData data;
      const Eigen::Index segs = static_cast<Eigen::Index>(brk.size()) - 1;
      data.s_pts.resize(segs * seg_rule.size());
      data.s_wts.resize(segs * seg_rule.size());
      for (Eigen::Index k = 0; k < segs; ++k) {
        const double a = brk[static_cast<size_t>(k)], b = brk[static_cast<size_t>(k) + 1];
        for (Eigen::Index g = 0; g < seg_rule.size(); ++g) {
          data.s_pts(k * seg_rule.size() + g) = a + (b - a) * seg_rule.nodes(g);
          data.s_wts(k * seg_rule.size() + g) = (b - a) * seg_rule.weights(g);
        }
      }
      data.delta = eval_beta_grid(model, cat.t_rule.nodes, data.s_pts);
      for (Eigen::Index j = 0; j < data.s_pts.size(); ++j)
        for (Eigen::Index i = 0; i < cat.t_rule.size(); ++i)
          data.delta(i, j) -= beta_true(cat.t_rule.nodes(i), data.s_pts(j));
      it = cache.emplace(std::move(key), std::move(data)).first;
    }

    const GridData& data = it->second;
    const Eigen::VectorXd xc =
        resample(curve, data.s_pts) - resample(mean_curve, data.s_pts);
    const Eigen::VectorXd diff = data.delta * data.s_wts.cwiseProduct(xc);
    acc += cat.t_rule.weights.dot(diff.cwiseAbs2());
  }
  return acc / static_cast<double>(x_test.size());
}

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i)))
      arr.push_back(nullptr);
    else
      arr.push_back(v(i));
  }
  return arr;
}

Eigen::VectorXd vec_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) =
        arr[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : arr[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(vec_to_json(m.col(c)));
  return arr;
}

Eigen::MatrixXd mat_from_json(const json& arr, Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(arr.size()));
  for (size_t c = 0; c < arr.size(); ++c) {
    const Eigen::VectorXd col = vec_from_json(arr[c]);
    if (col.size() != rows) throw std::invalid_argument("model file: ragged matrix block");
    m.col(static_cast<Eigen::Index>(c)) = col;
  }
  return m;
}

json rule_to_json(const QuadratureRule& rule) {
  return json{{"lo", rule.lo},
              {"hi", rule.hi},
              {"nodes", vec_to_json(rule.nodes)},
              {"weights", vec_to_json(rule.weights)}};
}

QuadratureRule rule_from_json(const json& j) {
  QuadratureRule rule;
  rule.lo = j.at("lo").get<double>();
  rule.hi = j.at("hi").get<double>();
  rule.nodes = vec_from_json(j.at("nodes"));
  rule.weights = vec_from_json(j.at("weights"));
  if (rule.nodes.size() != rule.weights.size() || rule.nodes.size() == 0)
    throw std::invalid_argument("model file: malformed quadrature rule");
  return rule;
}

constexpr const char* kModelFormat = "fofreg-model";
constexpr int kModelVersion = 1;

}  // namespace

std::string model_to_json(const FittedModel& model) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["n"] = model.catalog.n;
  j["lambda"] = model.lambda;
  j["fudge"] = model.fudge;
  j["t_rule"] = rule_to_json(model.catalog.t_rule);
  j["s_rule"] = rule_to_json(model.catalog.s_rule);
  j["x_mean"] = vec_to_json(model.x_mean);
  j["y_mean"] = vec_to_json(model.y_mean);
  j["x_nodes"] = mat_to_json(model.catalog.x_nodes);
  j["y_nodes"] = mat_to_json(model.catalog.y_nodes);
  j["d"] = vec_to_json(model.d);
  j["c"] = vec_to_json(model.c);
  j["gcv"] = json{{"lambdas", vec_to_json(model.gcv_trace.lambdas)},
                  {"scores", vec_to_json(model.gcv_trace.scores)},
                  {"edf", vec_to_json(model.gcv_trace.edf)},
                  {"chosen", model.gcv_trace.chosen},
                  {"fudge", model.gcv_trace.fudge}};
  j["x_arg_range"] = {model.x_arg_range[0], model.x_arg_range[1]};
  j["y_arg_range"] = {model.y_arg_range[0], model.y_arg_range[1]};
  return j.dump();
}

FittedModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.contains("format") || j.at("format").get<std::string>() != kModelFormat)
    throw std::invalid_argument("model file: unrecognized format tag");
  if (j.at("version").get<int>() != kModelVersion)
    throw std::invalid_argument("model file: unsupported version");

  FittedModel model;
  const int n = j.at("n").get<int>();
  const QuadratureRule t_rule = rule_from_json(j.at("t_rule"));
  const QuadratureRule s_rule = rule_from_json(j.at("s_rule"));
  Eigen::MatrixXd x_nodes = mat_from_json(j.at("x_nodes"), s_rule.size());
  Eigen::MatrixXd y_nodes = mat_from_json(j.at("y_nodes"), t_rule.size());
  if (x_nodes.cols() != n || y_nodes.cols() != n)
    throw std::invalid_argument("model file: sample count mismatch");
  model.catalog = build_catalog_from_nodes(std::move(x_nodes), std::move(y_nodes), t_rule, s_rule);

  model.lambda = j.at("lambda").get<double>();
  model.fudge = j.at("fudge").get<double>();
  model.x_mean = vec_from_json(j.at("x_mean"));
  model.y_mean = vec_from_json(j.at("y_mean"));
  if (model.x_mean.size() != s_rule.size() || model.y_mean.size() != t_rule.size())
    throw std::invalid_argument("model file: mean curve length mismatch");
  model.d = vec_from_json(j.at("d"));
  model.c = vec_from_json(j.at("c"));
  if (model.d.size() != 4 || model.c.size() != model.catalog.num_xi())
    throw std::invalid_argument("model file: coefficient length mismatch");
  model.coef = coef_from_dc(model.d, model.c, n);

  const json& g = j.at("gcv");
  model.gcv_trace.lambdas = vec_from_json(g.at("lambdas"));
  model.gcv_trace.scores = vec_from_json(g.at("scores"));
  model.gcv_trace.edf = vec_from_json(g.at("edf"));
  model.gcv_trace.chosen = g.at("chosen").get<Eigen::Index>();
  model.gcv_trace.fudge = g.at("fudge").get<double>();

  model.x_arg_range = {j.at("x_arg_range")[0].get<double>(), j.at("x_arg_range")[1].get<double>()};
  model.y_arg_range = {j.at("y_arg_range")[0].get<double>(), j.at("y_arg_range")[1].get<double>()};
  return model;
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open model file for writing: " + path);
  out << model_to_json(model) << "\n";
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace fofreg
