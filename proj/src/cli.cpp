#include "depthforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "depthforge/estimators.hpp"
#include "depthforge/io.hpp"
#include "depthforge/riemannian.hpp"
#include "depthforge/slacked.hpp"

namespace depthforge {

namespace {

const std::set<std::string> kTasks = {"depth", "rank", "fit", "deepest", "check"};
const std::set<std::string> kFamilies = {"location", "regression", "nonneg", "watson", "vmf",
                                         "vmf2", "watson2", "pc", "oc", "theta", "theta_sharp",
                                         "rrr", "sparse_rrr"};

// Settings accepted in config files; command-line options map onto the
// same keys ("kappa-sign" becomes kappa_sign).
const std::set<std::string> kKeys = {
    "task", "family", "data", "response", "param", "intercept", "lambda", "q", "rank", "rule",
    "loss", "seed", "restarts", "kappa_sign", "rho", "budget", "huber", "rule.aux",
    "solver.restarts", "solver.seed", "solver.surrogate", "solver.bandwidth_start",
    "solver.bandwidth_end", "solver.stages", "solver.max_iters", "solver.pair_seed_cap",
    "solver.threads", "solver.zero_tol", "fit.max_iters", "fit.tol"};

class Settings {
 public:
  explicit Settings(ConfigMap values) : values_(std::move(values)) {
    for (const auto& [k, v] : values_) {
      if (!kKeys.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& fallback = "") const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string required(const std::string& key, const std::string& why) const {
    if (!has(key) || text(key).empty()) throw ValidationError("missing " + key + " (" + why + ")");
    return text(key);
  }

  double number(const std::string& key) const {
    const std::string v = text(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (v.empty() || used != v.size() || !std::isfinite(out)) {
      throw ValidationError("invalid value for " + key + ": '" + v + "'");
    }
    return out;
  }

  long long integer(const std::string& key) const {
    const std::string v = text(key);
    std::size_t used = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (v.empty() || used != v.size()) {
      throw ValidationError("invalid value for " + key + ": '" + v + "' (expected an integer)");
    }
    return out;
  }

  std::optional<double> maybe_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::optional<long long> maybe_integer(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }

  const ConfigMap& values() const { return values_; }

 private:
  ConfigMap values_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ';')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ";") + s;
  return out;
}

SolverConfig solver_config(const Settings& s) {
  SolverConfig c;
  auto positive_int = [&](const std::string& key, int& target) {
    if (!s.has(key)) return;
    const long long v = s.integer(key);
    if (v < 1 || v > 1000000000) throw ValidationError(key + " must be a positive integer");
    target = static_cast<int>(v);
  };
  positive_int("solver.restarts", c.restarts);
  positive_int("restarts", c.restarts);
  positive_int("solver.stages", c.stages);
  positive_int("solver.max_iters", c.max_iters);
  positive_int("solver.pair_seed_cap", c.pair_seed_cap);
  positive_int("solver.threads", c.threads);
  for (const std::string key : {"solver.seed", "seed"}) {
    if (!s.has(key)) continue;
    const long long v = s.integer(key);
    if (v < 0) throw ValidationError(key + " must be nonnegative");
    c.seed = static_cast<std::uint64_t>(v);
  }
  if (s.has("solver.surrogate")) {
    const std::string v = s.text("solver.surrogate");
    if (v == "sigmoid") c.surrogate = Surrogate::sigmoid;
    else if (v == "smooth_ramp") c.surrogate = Surrogate::smooth_ramp;
    else throw ValidationError("invalid value for solver.surrogate: '" + v + "' (sigmoid|smooth_ramp)");
  }
  if (auto v = s.maybe_number("solver.bandwidth_start")) c.bandwidth_start = *v;
  if (auto v = s.maybe_number("solver.bandwidth_end")) c.bandwidth_end = *v;
  if (auto v = s.maybe_number("solver.zero_tol")) c.zero_tol = *v;
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("solver settings: ") + e.what());
  }
  return c;
}

IterationOptions iteration_options(const Settings& s) {
  IterationOptions o;
  if (auto v = s.maybe_integer("fit.max_iters")) {
    if (*v < 1) throw ValidationError("fit.max_iters must be positive");
    o.max_iters = static_cast<int>(*v);
  }
  if (auto v = s.maybe_number("fit.tol")) {
    if (!(*v > 0.0)) throw ValidationError("fit.tol must be positive");
    o.tol = *v;
  }
  return o;
}

Vector flatten(const Matrix& m, Index expected, const std::string& what) {
  if (m.cols() != 1 && m.rows() != 1) {
    throw ValidationError(what + " must be a vector, got " + std::to_string(m.rows()) + " x " +
                          std::to_string(m.cols()));
  }
  Vector v = vec(m);
  if (expected >= 0 && v.size() != expected) {
    throw ValidationError(what + " has length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(expected));
  }
  return v;
}

Index nonzeros(const Matrix& m) { return (m.array() != 0.0).count(); }

// Everything the families need, loaded and validated once per command.
struct Setup {
  Setup(std::string t, std::string f, Settings values)
      : task(std::move(t)), family(std::move(f)), settings(std::move(values)) {}

  std::string task;
  std::string family;
  Settings settings;
  Matrix data;
  std::optional<Matrix> response;
  std::vector<std::string> params;
  SolverConfig solver;
  PointwiseLoss loss;
  std::optional<Vector> intercept;
  // theta family: rho and the penalty level on the design's own scale
  double rho = 1.0;
  double lambda = 0.0;
  std::string rule_name = "soft";
  std::optional<double> rule_aux;

  ThresholdRule scaled_rule() const {
    ThresholdRule r = ThresholdRule::parse(rule_name, lambda / std::sqrt(rho));
    if (rule_aux) r.aux = *rule_aux;
    r.validate();
    return r;
  }

  const Matrix& y_matrix() const {
    if (!response) throw ValidationError("family " + family + " needs --response");
    return *response;
  }

  Vector y_vector() const {
    const Matrix& y = y_matrix();
    if (y.cols() != 1) {
      throw ValidationError("family " + family + " needs a single response column, got " +
                            std::to_string(y.cols()));
    }
    return y.col(0);
  }
};

bool uses_design(const std::string& family) {
  return family == "regression" || family == "nonneg" || family == "theta" ||
         family == "theta_sharp" || family == "rrr" || family == "sparse_rrr";
}

// Default penalty: the residual-scale formula applied to least-squares
// residuals, so that every candidate of a ranking sees the same level.
double lambda_default(const Matrix& x, const Vector& y) {
  Vector residuals;
  if (x.rows() > x.cols()) {
    residuals = y - x * fit_least_squares(x, Matrix(y)).coefficients();
  } else {
    Vector sorted = y;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const double med = sorted.size() % 2 ? sorted(sorted.size() / 2)
                                         : 0.5 * (sorted(sorted.size() / 2 - 1) + sorted(sorted.size() / 2));
    residuals = y.array() - med;
  }
  return default_lambda(residuals, x.cols());
}

Setup make_setup(const std::string& task, Settings settings) {
  Setup s(task, settings.required("family", "--family"), settings);
  if (!kFamilies.count(s.family)) throw ValidationError("unknown family '" + s.family + "'");
  s.solver = solver_config(settings);
  if (settings.has("loss")) {
    const double huber = settings.has("huber") ? settings.number("huber") : PointwiseLoss::kDefaultHuber;
    s.loss = PointwiseLoss::parse(settings.text("loss"));
    if (s.loss.kind() == PointwiseLoss::Kind::huber) s.loss = PointwiseLoss(PointwiseLoss::Kind::huber, huber);
  }
  s.data = load_csv(settings.required("data", "--data")).values;
  if (settings.has("response")) {
    s.response = load_csv(settings.text("response")).values;
    if (s.response->rows() != s.data.rows()) {
      throw ValidationError("--response has " + std::to_string(s.response->rows()) +
                            " rows but --data has " + std::to_string(s.data.rows()));
    }
  } else if (uses_design(s.family)) {
    throw ValidationError("missing response (--response) for family " + s.family);
  }
  s.params = split_list(settings.text("param"));
  if (settings.has("intercept")) {
    if (s.family != "pc" && s.family != "oc") {
      throw ValidationError("--intercept applies only to the pc and oc families");
    }
    s.intercept = flatten(load_parameter(settings.text("intercept")), -1, "--intercept");
  }
  if (s.family == "theta") {
    const Matrix& x = s.data;
    s.rho = settings.has("rho") ? settings.number("rho") : default_rho(x, s.loss);
    if (!(s.rho > 0.0)) throw ValidationError("rho must be positive");
    s.rule_name = settings.text("rule", "soft");
    if (settings.has("rule.aux")) s.rule_aux = settings.number("rule.aux");
    s.lambda = settings.has("lambda") ? settings.number("lambda") : lambda_default(x, s.y_vector());
    if (s.lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    s.scaled_rule();
  } else if (settings.has("lambda") || settings.has("rule")) {
    throw ValidationError("--lambda and --rule apply only to the theta family");
  }
  return s;
}

struct Evaluation {
  DepthResult result;
  std::vector<std::pair<std::string, std::string>> extras;
};

using Candidate = std::vector<Matrix>;

Index rank_setting(const Setup& s, const Matrix& b) {
  if (auto r = s.settings.maybe_integer("rank")) {
    if (*r < 1) throw ValidationError("rank must be at least 1");
    return static_cast<Index>(*r);
  }
  return certified_rank(b);
}

Index q_setting(const Setup& s, const Matrix& b) {
  if (auto q = s.settings.maybe_integer("q")) {
    if (*q < 1) throw ValidationError("q must be at least 1");
    return static_cast<Index>(*q);
  }
  return nonzeros(b);
}

int kappa_sign(const Setup& s) {
  if (!s.settings.has("kappa_sign")) return 1;
  const long long k = s.settings.integer("kappa_sign");
  if (k != 1 && k != -1) throw ValidationError("kappa_sign must be 1 or -1");
  return static_cast<int>(k);
}

Evaluation evaluate(const Setup& s, const Candidate& c) {
  const Matrix& z = s.data;
  const Index m = z.cols();
  const Matrix& p0 = c.front();
  Evaluation e;
  const std::string& f = s.family;
  if (f == "location") {
    e.result = solve_depth(DepthProblem::plain(location_influence(z, flatten(p0, m, "--param"))), s.solver);
  } else if (f == "regression") {
    const Matrix& y = s.y_matrix();
    if (p0.rows() != z.cols() || p0.cols() != y.cols()) {
      throw ValidationError("--param must be " + std::to_string(z.cols()) + " x " +
                            std::to_string(y.cols()) + ", got " + std::to_string(p0.rows()) +
                            " x " + std::to_string(p0.cols()));
    }
    const InfluenceSet inf = y.cols() == 1 ? regression_influence(z, y.col(0), p0.col(0))
                                           : rrr_influence(z, y, p0);
    e.result = solve_depth(DepthProblem::plain(inf), s.solver);
  } else if (f == "nonneg") {
    e.result = nonnegative_regression_depth(z, s.y_vector(), flatten(p0, z.cols(), "--param"), s.solver);
  } else if (f == "watson" || f == "vmf" || f == "vmf2" || f == "watson2") {
    const UnitVector mu(flatten(p0, m, "--param"));
    if (f == "watson") e.result = watson_depth(z, mu, s.solver);
    else if (f == "vmf") e.result = vmf_depth(z, mu, s.solver);
    else if (f == "vmf2") e.result = vmf_order2_depth(z, mu, s.solver);
    else {
      const int k = kappa_sign(s);
      e.result = watson_order2_depth(z, mu, k, s.solver);
      e.extras.emplace_back("kappa_sign", std::to_string(k));
    }
  } else if (f == "pc" || f == "oc") {
    const StiefelPoint u(p0);
    e.result = f == "pc" ? pc_depth(z, s.intercept, u, s.solver) : oc_depth(z, s.intercept, u, s.solver);
    e.extras.emplace_back("intercept", s.intercept ? "yes" : "no");
  } else if (f == "theta") {
    const Vector beta = flatten(p0, z.cols(), "--param");
    const ThresholdRule rule = s.scaled_rule();
    e.result = theta_depth(z, s.y_vector(), beta, rule, s.loss, s.solver, s.rho);
    e.extras.emplace_back("rule", rule.name());
    e.extras.emplace_back("lambda", format_number(s.lambda));
    e.extras.emplace_back("lambda_scaled", format_number(rule.lambda));
    e.extras.emplace_back("rho", format_number(s.rho));
    e.extras.emplace_back("loss", s.loss.name());
  } else if (f == "theta_sharp") {
    const Vector beta = flatten(p0, z.cols(), "--param");
    const Index q = q_setting(s, p0);
    e.result = theta_sharp_depth(z, s.y_vector(), beta, q, s.loss, s.solver);
    e.extras.emplace_back("q", std::to_string(q));
    e.extras.emplace_back("loss", s.loss.name());
  } else if (f == "rrr") {
    const Index r = rank_setting(s, p0);
    e.result = rrr_depth(z, s.y_matrix(), p0, r, s.solver);
    e.extras.emplace_back("rank", std::to_string(r));
  } else if (f == "sparse_rrr") {
    if (c.size() != 2) throw ValidationError("family sparse_rrr needs two parameters per candidate: A and U");
    const StiefelPoint u(c[1]);
    const Index q = q_setting(s, p0);
    e.result = sparse_rrr_depth(z, s.y_matrix(), p0, u, q, s.solver);
    e.extras.emplace_back("q", std::to_string(q));
  }
  return e;
}

std::vector<Candidate> candidates(const Setup& s) {
  if (s.params.empty()) throw ValidationError("missing param (--param)");
  const std::size_t group = s.family == "sparse_rrr" ? 2 : 1;
  if (s.params.size() % group != 0) {
    throw ValidationError("family sparse_rrr takes parameters in pairs (A then U)");
  }
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < s.params.size(); i += group) {
    Candidate c;
    for (std::size_t j = 0; j < group; ++j) c.push_back(load_parameter(s.params[i + j]));
    out.push_back(std::move(c));
  }
  return out;
}

std::string candidate_label(const Setup& s, std::size_t index) {
  const std::size_t group = s.family == "sparse_rrr" ? 2 : 1;
  std::vector<std::string> names(s.params.begin() + index * group,
                                 s.params.begin() + (index + 1) * group);
  return join_list(names);
}

// Settings echoed into outputs so they re-run to the same result.
std::vector<std::pair<std::string, std::string>> echo(const Setup& s) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : s.settings.values()) {
    if (k != "task") out.emplace_back(k, v);
  }
  out.emplace_back("task", s.task);
  return out;
}

void add_result(Report& report, const Setup& s, const Evaluation& e) {
  const DepthResult& r = e.result;
  report.add("family", s.family);
  report.add("n", std::to_string(r.samples));
  report.add("ambient_dim", std::to_string(r.diagnostics.ambient_dim));
  report.add("reduced_dim", std::to_string(r.diagnostics.reduced_dim));
  report.add("depth", format_number(r.value));
  report.add("normalized", format_number(r.normalized));
  report.add("certificate", to_string(r.certificate));
  report.add("seed", std::to_string(s.solver.seed));
  report.add("restarts", std::to_string(s.solver.restarts));
  report.add("restarts_used", std::to_string(r.diagnostics.restarts_used));
  report.add("evaluations", std::to_string(r.diagnostics.evaluations));
  for (const auto& [k, v] : e.extras) report.add(k, v);
  report.add("shift", format_number(r.shift));
  if (r.slack) {
    const double norm = r.slack->l.size() ? r.slack->l.norm() : r.slack->s.norm();
    const double maxabs = r.slack->l.size() ? r.slack->l.cwiseAbs().maxCoeff()
                                            : (r.slack->s.size() ? r.slack->s.cwiseAbs().maxCoeff() : 0.0);
    report.add("slack", r.slack->l.size() ? "spectral" : "vector");
    report.add("slack_norm", format_number(norm));
    report.add("slack_max_abs", format_number(maxabs));
  } else {
    report.add("slack", "none");
  }
  for (Index i = 0; i < r.direction.size(); ++i) {
    report.add("direction_" + std::to_string(i + 1), format_number(r.direction(i)));
  }
}

struct Outcome {
  std::string file;     // written to --out
  std::string summary;  // printed to stdout
};

Outcome cmd_depth(const Setup& s) {
  const auto cands = candidates(s);
  if (cands.size() != 1) throw ValidationError("task depth takes exactly one parameter (use rank for several)");
  const Evaluation e = evaluate(s, cands.front());
  Report report;
  report.config = echo(s);
  add_result(report, s, e);
  std::ostringstream sum;
  sum << "depth " << s.family << ": n=" << e.result.samples << " depth=" << format_number(e.result.value)
      << " normalized=" << format_number(e.result.normalized) << " certificate="
      << to_string(e.result.certificate) << " reduced_dim=" << e.result.diagnostics.reduced_dim;
  return {report.render(), sum.str()};
}

Outcome cmd_rank(const Setup& s) {
  const auto cands = candidates(s);
  if (cands.size() < 2) throw ValidationError("task rank needs at least two candidate parameters");
  for (std::size_t i = 1; i < cands.size(); ++i) {
    for (std::size_t j = 0; j < cands[i].size(); ++j) {
      if (cands[i][j].rows() != cands[0][j].rows() || cands[i][j].cols() != cands[0][j].cols()) {
        throw ValidationError("candidate '" + candidate_label(s, i) + "' has shape " +
                              std::to_string(cands[i][j].rows()) + " x " +
                              std::to_string(cands[i][j].cols()) + ", expected " +
                              std::to_string(cands[0][j].rows()) + " x " +
                              std::to_string(cands[0][j].cols()));
      }
    }
  }
  std::vector<Evaluation> evals;
  for (const auto& c : cands) evals.push_back(evaluate(s, c));
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return evals[a].result.normalized > evals[b].result.normalized;
  });
  Report report;
  report.config = echo(s);
  report.columns = {"rank", "candidate", "param", "depth", "normalized", "certificate"};
  std::ostringstream sum;
  sum << "rank " << s.family << ": " << cands.size() << " candidates\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    const DepthResult& r = evals[i].result;
    report.rows.push_back({std::to_string(k + 1), std::to_string(i + 1), candidate_label(s, i),
                           format_number(r.value), format_number(r.normalized), to_string(r.certificate)});
    sum << "  " << k + 1 << ". " << candidate_label(s, i) << "  normalized=" << format_number(r.normalized)
        << (k + 1 < order.size() ? "\n" : "");
  }
  return {report.render(), sum.str()};
}

std::string parameter_output(const Setup& s, const Matrix& parameter,
                             const std::vector<std::pair<std::string, std::string>>& notes) {
  const std::string body = format_parameter(parameter);
  const auto newline = body.find('\n');
  std::ostringstream os;
  os << body.substr(0, newline + 1);
  for (const auto& [k, v] : echo(s)) os << "# config." << k << '=' << v << '\n';
  for (const auto& [k, v] : notes) os << "# " << k << '=' << v << '\n';
  os << body.substr(newline + 1);
  return os.str();
}

FitResult run_fit(const Setup& s, std::vector<std::pair<std::string, std::string>>& notes) {
  const Matrix& x = s.data;
  const IterationOptions options = iteration_options(s.settings);
  if (s.family == "regression") return fit_least_squares(x, s.y_matrix());
  if (s.family == "rrr") {
    if (!s.settings.has("rank")) throw ValidationError("missing rank (--rank) for fitting family rrr");
    const Index r = rank_setting(s, Matrix());
    notes.emplace_back("fit.rank", std::to_string(r));
    return fit_rrr(x, s.y_matrix(), r);
  }
  if (s.family == "theta") {
    const ThresholdRule rule = s.scaled_rule();
    notes.emplace_back("fit.lambda", format_number(s.lambda));
    notes.emplace_back("fit.rho", format_number(s.rho));
    return fit_tisp(x, s.y_vector(), rule, s.loss, s.rho, options);
  }
  if (s.family == "theta_sharp") {
    if (!s.settings.has("q")) throw ValidationError("missing q (--q) for fitting family theta_sharp");
    const Index q = q_setting(s, Matrix());
    return fit_piq(x, s.y_vector(), q, s.loss, s.settings.maybe_number("rho"), options);
  }
  throw ValidationError("task fit is not available for family " + s.family +
                        " (regression, rrr, theta, theta_sharp)");
}

Outcome cmd_fit(const Setup& s) {
  if (!s.params.empty()) throw ValidationError("task fit takes no --param");
  std::vector<std::pair<std::string, std::string>> notes;
  const FitResult fit = run_fit(s, notes);
  notes.emplace_back("fit.iterations", std::to_string(fit.iterations));
  notes.emplace_back("fit.converged", fit.converged ? "yes" : "no");
  notes.emplace_back("fit.objective", format_number(fit.objective));
  notes.emplace_back("fit.residual", format_number(fit.residual));
  notes.emplace_back("fit.flagged", fit.flagged ? "yes" : "no");
  if (!fit.note.empty()) notes.emplace_back("fit.note", fit.note);
  std::ostringstream sum;
  sum << "fit " << s.family << ": " << fit.parameter.rows() << " x " << fit.parameter.cols()
      << " iterations=" << fit.iterations << " converged=" << (fit.converged ? "yes" : "no")
      << " residual=" << format_number(fit.residual) << (fit.flagged ? " flagged" : "");
  if (!fit.note.empty()) sum << " (" << fit.note << ")";
  return {parameter_output(s, fit.parameter, notes), sum.str()};
}

Outcome cmd_check(const Setup& s) {
  const auto cands = candidates(s);
  if (cands.size() != 1) throw ValidationError("task check takes exactly one parameter");
  const Matrix& b = cands.front().front();
  const Matrix& x = s.data;
  double residual = 0.0;
  bool near_jump = false;
  Report report;
  report.config = echo(s);
  report.add("family", s.family);
  if (s.family == "rrr") {
    const Index r = rank_setting(s, b);
    const double rho = s.settings.has("rho") ? s.settings.number("rho")
                                             : 1.01 * std::pow(x.jacobiSvd().singularValues()(0), 2);
    residual = check_rrr_fixed_point(b, x, s.y_matrix(), r, rho);
    report.add("rank", std::to_string(r));
    report.add("rho", format_number(rho));
  } else if (s.family == "theta") {
    const Vector beta = flatten(b, x.cols(), "--param");
    const double k = std::sqrt(s.rho);
    const ThresholdRule rule = s.scaled_rule();
    const FixedPointCheck c = check_theta_fixed_point(beta * k, x / k, s.y_vector(), s.loss, rule);
    residual = c.residual;
    near_jump = c.near_discontinuity;
    report.add("rule", rule.name());
    report.add("lambda", format_number(s.lambda));
    report.add("rho", format_number(s.rho));
  } else if (s.family == "theta_sharp") {
    const Vector beta = flatten(b, x.cols(), "--param");
    const Index q = q_setting(s, b);
    const double rho = s.settings.has("rho") ? s.settings.number("rho") : default_rho(x, s.loss);
    residual = check_quantile_fixed_point(beta, x, s.y_vector(), s.loss, q, rho);
    report.add("q", std::to_string(q));
    report.add("rho", format_number(rho));
  } else {
    throw ValidationError("task check is not available for family " + s.family + " (rrr, theta, theta_sharp)");
  }
  const bool pass = residual < kFixedPointTolerance;
  report.add("residual", format_number(residual));
  report.add("tolerance", format_number(kFixedPointTolerance));
  report.add("pass", pass ? "yes" : "no");
  report.add("near_discontinuity", near_jump ? "yes" : "no");
  std::ostringstream sum;
  sum << "check " << s.family << ": residual=" << format_number(residual) << ' '
      << (pass ? "PASS" : "FAIL") << (near_jump ? " (argument near a jump of the rule)" : "");
  return {report.render(), sum.str()};
}

Outcome cmd_deepest(const Setup& s) {
  const Matrix& x = s.data;
  long long budget = 500;
  if (auto v = s.settings.maybe_integer("budget")) budget = *v;
  if (budget < 1 || budget > 10000000) throw ValidationError("budget must be a positive integer");
  std::vector<std::pair<std::string, std::string>> notes;
  Matrix base;
  if (!s.params.empty()) {
    const auto cands = candidates(s);
    if (cands.size() != 1) throw ValidationError("task deepest takes at most one --param (the base)");
    base = cands.front().front();
  } else {
    base = run_fit(s, notes).parameter;
  }
  Sampler sampler;
  if (s.family == "rrr") {
    sampler = rrr_sampler(x, s.y_matrix(), base, rank_setting(s, base));
  } else if (s.family == "theta") {
    sampler = theta_sampler(x, s.y_vector(), flatten(base, x.cols(), "--param"), s.scaled_rule(), s.loss, s.rho);
  } else if (s.family == "theta_sharp") {
    sampler = sparse_sampler(x, s.y_vector(), flatten(base, x.cols(), "--param"), q_setting(s, base), s.loss);
  } else {
    throw ValidationError("task deepest is not available for family " + s.family + " (rrr, theta, theta_sharp)");
  }
  // The rank or sparsity level is fixed by the base for every candidate.
  Setup fixed = s;
  ConfigMap values = s.settings.values();
  if (s.family == "rrr") values["rank"] = std::to_string(rank_setting(s, base));
  if (s.family == "theta_sharp") values["q"] = std::to_string(q_setting(s, base));
  fixed.settings = Settings(values);
  const DepthFunction depth_fn = [&](const Matrix& p) { return evaluate(fixed, {p}).result; };
  const DeepestResult best = deepest_search(depth_fn, base, sampler, static_cast<int>(budget), s.solver.seed);
  notes.emplace_back("deepest.index", std::to_string(best.index));
  notes.emplace_back("deepest.depth", format_number(best.depth.value));
  notes.emplace_back("deepest.normalized", format_number(best.depth.normalized));
  notes.emplace_back("deepest.base_normalized", format_number(best.depths.front()));
  notes.emplace_back("deepest.evaluated", std::to_string(best.evaluated));
  notes.emplace_back("deepest.skipped", std::to_string(best.skipped));
  std::ostringstream sum;
  sum << "deepest " << s.family << ": candidate " << best.index << " of " << budget
      << " normalized=" << format_number(best.depth.normalized)
      << " (base " << format_number(best.depths.front()) << "), evaluated=" << best.evaluated
      << " skipped=" << best.skipped;
  return {parameter_output(s, best.parameter, notes), sum.str()};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized halfspace depth for estimators on manifolds and with slack"};
  app.set_version_flag("--version", "depthforge 0.1.0");
  std::string task;
  std::string config_path;
  std::string out_path;
  std::vector<std::string> params;
  ConfigMap cli_values;
  app.add_option("task", task, "depth | rank | fit | deepest | check")->required();
  app.add_option("--config", config_path, "key=value settings (a report also works)");
  app.add_option("--out", out_path, "report or parameter output path");
  app.add_option("--param", params, "parameter file(s); repeat for rank");
  struct Named {
    const char* flag;
    const char* key;
    const char* help;
  };
  const Named named[] = {
      {"--family", "family", "model family"},
      {"--data", "data", "data CSV (rows are samples)"},
      {"--response", "response", "response CSV"},
      {"--intercept", "intercept", "pc/oc intercept parameter file"},
      {"--lambda", "lambda", "theta penalty level"},
      {"--q", "q", "sparsity level"},
      {"--rank", "rank", "target rank"},
      {"--rule", "rule", "soft | hard | scad | mcp"},
      {"--loss", "loss", "squared | logistic | huber"},
      {"--seed", "seed", "random seed"},
      {"--restarts", "restarts", "solver restarts"},
      {"--kappa-sign", "kappa_sign", "watson2 concentration sign (1 or -1)"},
      {"--rho", "rho", "step constant for theta families and checks"},
      {"--budget", "budget", "deepest-search candidates"},
  };
  std::vector<std::string> raw(std::size(named));
  std::vector<CLI::Option*> opts;
  for (std::size_t i = 0; i < std::size(named); ++i) {
    opts.push_back(app.add_option(named[i].flag, raw[i], named[i].help));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (!kTasks.count(task)) throw ValidationError("unknown task '" + task + "' (depth|rank|fit|deepest|check)");
    ConfigMap values;
    if (!config_path.empty()) values = load_config(config_path);
    for (std::size_t i = 0; i < std::size(named); ++i) {
      if (opts[i]->count()) values[named[i].key] = raw[i];
    }
    if (!params.empty()) values["param"] = join_list(params);
    if (out_path.empty()) throw ValidationError("missing output path (--out)");
    const Setup setup = make_setup(task, Settings(values));
    Outcome outcome;
    if (task == "depth") outcome = cmd_depth(setup);
    else if (task == "rank") outcome = cmd_rank(setup);
    else if (task == "fit") outcome = cmd_fit(setup);
    else if (task == "deepest") outcome = cmd_deepest(setup);
    else outcome = cmd_check(setup);
    write_text_file(out_path, outcome.file);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << outcome.summary << '\n'
        << "wall time " << std::fixed << std::setprecision(3) << wall << " s, wrote " << out_path << '\n';
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace depthforge
