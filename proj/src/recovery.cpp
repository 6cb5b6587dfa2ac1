#include "rise/recovery.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rise/csv.hpp"
#include "rise/error.hpp"
#include "rise/models/decompose.hpp"
#include "rise/optim.hpp"

namespace rise::recovery {
namespace {

constexpr int kArgumentOffset = kHistoryMonths + 1;  // argument of the initial month

double value_at(const MonthlySeries& s, MonthKey m, const char* what) {
  const auto v = s.at(m);
  if (!v) {
    throw Error(ErrorCode::MissingMonth, std::string(what) + " for '" + s.name() + "' does not cover " + m.to_string());
  }
  return *v;
}

double factor_at(const SeasonalProfile& seasonal, MonthKey m) {
  const double f = seasonal.at(m);
  if (!(f > 0.0)) throw Error(ErrorCode::NonPositiveValue, "seasonal factor for " + m.to_string() + " is not positive");
  return f;
}

bool positive_path(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x > 0.0; });
}

}  // namespace

RecoveryCoefficient coefficient_from_scores(const DestinationScores& scores, const LineFit& line) {
  for (int s : {scores.policy, scores.distance, scores.recovery}) {
    if (s < 1 || s > 5) {
      throw Error(ErrorCode::OutOfRange, "scores for '" + scores.destination + "' must lie in 1..5");
    }
  }
  RecoveryCoefficient out;
  out.destination = scores.destination;
  out.source = CoefficientSource::Formula;
  const double r = line.intercept + line.slope * scores.average();
  out.r = std::clamp(r, std::numeric_limits<double>::min(), 1.0);
  return out;
}

RecoveryCoefficient coefficient_for(const DestinationScores& scores, bool prefer_table) {
  if (prefer_table && scores.r) {
    if (!(*scores.r > 0.0 && *scores.r <= 1.0)) {
      throw Error(ErrorCode::OutOfRange, "tabulated r for '" + scores.destination + "' must lie in (0, 1]");
    }
    return {scores.destination, *scores.r, CoefficientSource::Table};
  }
  return coefficient_from_scores(scores);
}

LineFit fit_anchor_regression(std::span<const std::pair<double, double>> average_r) {
  const auto n = static_cast<double>(average_r.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : average_r) {
    sx += x;
    sy += y;
  }
  const double mx = n > 0 ? sx / n : 0.0;
  const double my = n > 0 ? sy / n : 0.0;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : average_r) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (average_r.size() < 2 || !(sxx > 0.0)) {
    throw Error(ErrorCode::DegenerateX, "anchor regression needs at least two distinct score averages");
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

std::vector<DestinationScores> load_scores(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto dest = table.column("destination");
  const auto policy = table.column("policy");
  const auto distance = table.column("distance");
  const auto recovery = table.column("recovery");
  const auto r_col = table.find("r");
  std::vector<DestinationScores> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.lines[i];
    DestinationScores s;
    s.destination = row[dest];
    auto integer = [&](std::size_t col, const char* name) {
      const double v = csv::parse_number(row[col], line, name);
      if (v != std::floor(v)) {
        throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": " + name + " must be an integer");
      }
      return static_cast<int>(v);
    };
    s.policy = integer(policy, "policy");
    s.distance = integer(distance, "distance");
    s.recovery = integer(recovery, "recovery");
    if (r_col && !row[*r_col].empty()) s.r = csv::parse_number(row[*r_col], line, "r");
    out.push_back(std::move(s));
  }
  return out;
}

void write_coefficients_header(std::ostream& out) { out << "destination,policy,distance,recovery,average,r,source\n"; }

void write_coefficient(std::ostream& out, const DestinationScores& scores, const RecoveryCoefficient& c) {
  csv::write_row(out, {scores.destination, std::to_string(scores.policy), std::to_string(scores.distance),
                       std::to_string(scores.recovery), csv::format_number(scores.average()), csv::format_number(c.r),
                       c.source == CoefficientSource::Table ? "table" : "formula"});
}

SeasonalProfile SeasonalProfile::flat() {
  SeasonalProfile p;
  p.factor.fill(1.0);
  return p;
}

SeasonalProfile seasonal_profile(const MonthlySeries& history) {
  const auto y = history.dense();
  std::vector<double> logs(y.size());
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!(y[t] > 0.0)) {
      throw Error(ErrorCode::NonPositiveValue, "seasonal profile of '" + history.name() + "' needs positive values");
    }
    logs[t] = std::log(y[t]);
    lowest = std::min(lowest, logs[t]);
  }
  // The additive seasonal is unaffected by a level shift; keep values non-negative.
  if (lowest < 0.0) {
    for (auto& v : logs) v -= lowest;
  }
  const auto dec = models::decompose(MonthlySeries(history.name(), history.start(), logs),
                                     models::DecompositionMode::Additive);
  SeasonalProfile p;
  for (std::size_t m = 0; m < 12; ++m) p.factor[m] = std::exp(dec.seasonal_index[m]);
  return p;
}

Anchors make_anchors(const MonthlySeries& base, const MonthlySeries& reference, double r,
                     const SeasonalProfile& seasonal, MonthKey initial_month, MonthKey terminal_month) {
  Anchors a;
  a.initial = value_at(reference, initial_month, "reference path");
  a.terminal = value_at(base, terminal_month, "base path") * r;
  a.initial_detrended = a.initial / factor_at(seasonal, initial_month);
  a.terminal_detrended = a.terminal / factor_at(seasonal, terminal_month);
  return a;
}

std::vector<double> trend_linear(double initial, double terminal, int length) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) out.push_back(initial + (static_cast<double>(t) / length) * (terminal - initial));
  return out;
}

QuadraticFit fit_quadratic(std::span<const double> points, double terminal, double terminal_argument,
                           double weight) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 2) throw Error(ErrorCode::SeriesTooShort, "quadratic trend needs at least two points");
  if (!(weight > 0.0)) throw Error(ErrorCode::OutOfRange, "quadratic terminal weight must be positive");
  // Rows scaled by sqrt(weight) so QR on the design solves the weighted problem
  // without squaring its condition number.
  auto solve = [&](double center, QuadraticFit& fit) {
    Eigen::MatrixXd X(n + 1, 3);
    Eigen::VectorXd y(n + 1);
    auto set = [&](Eigen::Index i, double s, double v, double w) {
      const double u = s - center;
      const double sw = std::sqrt(w);
      X.row(i) << sw * u * u, sw * u, sw;
      y[i] = sw * v;
    };
    for (Eigen::Index i = 0; i < n; ++i) set(i, static_cast<double>(i + 1), points[static_cast<std::size_t>(i)], 1.0);
    set(n, terminal_argument, terminal, weight);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const auto sv = svd.singularValues();
    // Condition number of the normal equations X'X.
    fit.condition = sv[2] > 0.0 ? (sv[0] / sv[2]) * (sv[0] / sv[2]) : std::numeric_limits<double>::infinity();
    const auto qr = X.colPivHouseholderQr();
    if (qr.rank() < 3) throw Error(ErrorCode::IllConditioned, "quadratic trend design is rank deficient");
    const Eigen::Vector3d theta = qr.solve(y);
    fit.a = theta[0];
    fit.b = theta[1];
    fit.c = theta[2];
    fit.center = center;
  };
  QuadraticFit fit;
  solve(0.0, fit);
  if (fit.condition > 1e12) {
    double center = terminal_argument;
    for (Eigen::Index i = 0; i < n; ++i) center += static_cast<double>(i + 1);
    solve(center / static_cast<double>(n + 1), fit);
  }
  if (!std::isfinite(fit.a) || !std::isfinite(fit.b) || !std::isfinite(fit.c)) {
    throw Error(ErrorCode::IllConditioned, "quadratic trend fit is not finite");
  }
  return fit;
}

std::vector<double> trend_quadratic(std::span<const double> points, double terminal, double weight, int length) {
  const auto offset = static_cast<double>(points.size());
  const QuadraticFit fit = fit_quadratic(points, terminal, offset + length - 1, weight);
  std::vector<double> out;
  for (int t = 0; t < length; ++t) out.push_back(fit(t + offset));
  return out;
}

double LogisticFit::operator()(double s) const { return L / (1.0 + std::exp(-k * (s - t0))); }

LogisticFit fit_logistic(std::span<const std::pair<double, double>> points) {
  LogisticFit best;
  if (points.empty()) return best;
  double ymax = 0.0, ymin = std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : points) {
    ymax = std::max(ymax, y);
    ymin = std::min(ymin, y);
  }
  if (!(ymax > 0.0)) return best;
  if (ymax - ymin <= 1e-12 * ymax) {
    // Plateau: k is unidentifiable; place the midpoint far to the left.
    best.L = ymax;
    best.k = 1.0;
    best.t0 = -1e3;
    best.converged = true;
    return best;
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd xs(n), ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xs[i] = points[static_cast<std::size_t>(i)].first;
    ys[i] = points[static_cast<std::size_t>(i)].second / ymax;
  }
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = ys[i] - p[0] / (1.0 + std::exp(-p[1] * (xs[i] - p[2])));
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = std::exp(-p[1] * (xs[i] - p[2]));
      const double d = 1.0 + e;
      J(i, 0) = -1.0 / d;
      J(i, 1) = -p[0] * e * (xs[i] - p[2]) / (d * d);
      J(i, 2) = p[0] * e * p[1] / (d * d);
    }
    return J;
  };
  optim::LevenbergMarquardtOptions options;
  options.max_iterations = 500;
  options.gradient_tolerance = 1e-15;
  options.step_tolerance = 1e-14;
  options.cost_tolerance = 1e-16;
  best.sse = std::numeric_limits<double>::infinity();
  for (double L : {1.0, 2.0}) {
    for (double k : {0.1, 0.3, 0.6, 1.0}) {
      for (double t0 : {15.0, 25.0}) {
        const auto result = optim::levenberg_marquardt(residuals, Eigen::Vector3d(L, k, t0), options, jacobian);
        const auto& p = result.x;
        if (!result.converged || !p.allFinite() || !(p[0] > 0.0) || !std::isfinite(result.value)) continue;
        if (result.value < best.sse) {
          best.L = p[0] * ymax;
          best.k = p[1];
          best.t0 = p[2];
          best.sse = result.value;
          best.converged = true;
        }
      }
    }
  }
  if (best.converged) best.sse *= ymax * ymax;
  return best;
}

RecoveryCurve synthesize(const std::string& destination, MonthKey start, std::vector<double> linear,
                         std::vector<double> quadratic, std::vector<double> logistic, std::vector<double> seasonal) {
  const std::size_t n = linear.size();
  if (quadratic.size() != n || logistic.size() != n || seasonal.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "trend and seasonal paths must have equal length");
  }
  for (const auto* path : {&linear, &quadratic, &logistic}) {
    if (!positive_path(*path)) {
      throw Error(ErrorCode::NonPositiveTrend, "a trend path for '" + destination + "' is not positive");
    }
  }
  RecoveryCurve c;
  c.destination = destination;
  c.start = start;
  c.trend_mean.resize(n);
  c.point.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    c.trend_mean[t] = (linear[t] + quadratic[t] + logistic[t]) / 3.0;
    c.point[t] = c.trend_mean[t] * seasonal[t];
  }
  c.trend_linear = std::move(linear);
  c.trend_quadratic = std::move(quadratic);
  c.trend_logistic = std::move(logistic);
  c.seasonal = std::move(seasonal);
  return c;
}

RecoveryCurve build_curve(const CurveRequest& req, std::vector<std::string>* warnings) {
  const int length = req.terminal_month - req.initial_month + 1;
  if (length < 2) throw Error(ErrorCode::OutOfRange, "terminal month must follow the initial month");
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(req.destination + ": " + msg);
  };
  auto observed_or_reference = [&](MonthKey m) {
    if (const auto v = req.history.at(m)) return *v;
    return value_at(req.reference, m, "reference path");
  };
  auto detrended = [&](MonthKey m, double v) { return v / factor_at(req.seasonal, m); };

  const MonthKey first = req.initial_month - kHistoryMonths;
  const double initial = req.reference.covers(req.initial_month) ? value_at(req.reference, req.initial_month, "reference path")
                                                                   : observed_or_reference(req.initial_month);
  const double t0 = detrended(req.initial_month, initial);
  const double terminal = value_at(req.base, req.terminal_month, "base path") * req.r;
  const double t_end = detrended(req.terminal_month, terminal);

  std::vector<double> points;
  for (MonthKey m = first; m < req.initial_month; ++m) points.push_back(detrended(m, observed_or_reference(m)));
  points.push_back(t0);

  std::vector<double> linear = trend_linear(t0, t_end, length);

  std::vector<double> quadratic;
  try {
    quadratic = trend_quadratic(points, t_end, req.quadratic_weight, length);
  } catch (const Error& e) {
    warn(std::string("quadratic trend failed (") + e.what() + "), using the linear trend");
  }
  if (!quadratic.empty() && !positive_path(quadratic)) {
    warn("quadratic trend is not positive, using the linear trend");
    quadratic.clear();
  }
  if (quadratic.empty()) quadratic = linear;

  auto argument = [&](MonthKey m) { return static_cast<double>(m - req.initial_month + kArgumentOffset); };
  const MonthKey dec_initial(req.initial_month.year(), 12);
  const MonthKey dec_terminal(req.terminal_month.year(), 12);
  const std::vector<std::pair<double, double>> logistic_points{
      {1.0, points.front()},
      {static_cast<double>(kArgumentOffset), t0},
      {argument(dec_initial), detrended(dec_initial, value_at(req.base, dec_initial, "base path"))},
      {argument(req.terminal_month), detrended(req.terminal_month, value_at(req.base, req.terminal_month, "base path"))},
      {argument(dec_terminal), detrended(dec_terminal, value_at(req.base, dec_terminal, "base path"))},
  };
  const LogisticFit fit = fit_logistic(logistic_points);
  std::vector<double> logistic;
  if (fit.converged) {
    for (int t = 0; t < length; ++t) logistic.push_back(fit(t + kArgumentOffset));
  }
  if (!fit.converged) {
    warn("logistic trend did not converge, using the linear trend");
  } else if (!positive_path(logistic)) {
    warn("logistic trend is not positive, using the linear trend");
    logistic.clear();
  }
  if (logistic.empty()) logistic = linear;

  std::vector<double> seasonal;
  for (int t = 0; t < length; ++t) seasonal.push_back(factor_at(req.seasonal, req.initial_month + t));
  return synthesize(req.destination, req.initial_month, std::move(linear), std::move(quadratic), std::move(logistic),
                    std::move(seasonal));
}

IntervalCurves interval_path(const CurveRequest& request, const RecoveryCurve& point,
                             const std::vector<std::pair<MonthlySeries, MonthlySeries>>& model_bounds,
                             std::vector<std::string>* warnings) {
  if (model_bounds.empty()) throw Error(ErrorCode::NoBounds, "no model provides bounds for '" + request.destination + "'");
  MonthKey first = model_bounds.front().first.start();
  MonthKey last = model_bounds.front().first.end();
  for (const auto& [lo, hi] : model_bounds) {
    first = std::max({first, lo.start(), hi.start()});
    last = std::min({last, lo.end(), hi.end()});
  }
  if (last < first) throw Error(ErrorCode::NoBounds, "model bounds share no months");
  std::vector<double> lower, upper;
  for (MonthKey m = first; m <= last; ++m) {
    double lo_sum = 0.0, hi_sum = 0.0;
    for (const auto& [lo, hi] : model_bounds) {
      lo_sum += value_at(lo, m, "lower bound");
      hi_sum += value_at(hi, m, "upper bound");
    }
    lower.push_back(lo_sum / static_cast<double>(model_bounds.size()));
    upper.push_back(hi_sum / static_cast<double>(model_bounds.size()));
  }
  CurveRequest lo_req = request;
  lo_req.base = MonthlySeries(request.destination + "/lower80", first, lower);
  CurveRequest hi_req = request;
  hi_req.base = MonthlySeries(request.destination + "/upper80", first, upper);
  IntervalCurves out{build_curve(lo_req, warnings), build_curve(hi_req, warnings), false};
  for (std::size_t t = 0; t < point.point.size(); ++t) {
    const double a = out.lower.point[t];
    const double b = point.point[t];
    const double c = out.upper.point[t];
    const double lo = std::min({a, b, c});
    const double hi = std::max({a, b, c});
    if (lo != a || hi != c) out.reordered = true;
    out.lower.point[t] = lo;
    out.upper.point[t] = hi;
  }
  if (out.reordered && warnings) {
    warnings->push_back(request.destination + ": interval curves crossed the point curve and were reordered");
  }
  return out;
}

}  // namespace rise::recovery
