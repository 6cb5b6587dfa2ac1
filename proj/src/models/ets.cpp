#include "rise/models/ets.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rise/error.hpp"
#include "rise/optim.hpp"

namespace rise::models {
namespace {

constexpr double kMinParam = 1e-4;

struct Layout {
  bool trend;
  bool seasonal;
  int period;
  int size() const { return 1 + (trend ? 1 : 0) + (seasonal ? period - 1 : 0); }
};

Layout layout_for(EtsKind kind, int period) {
  return {kind != EtsKind::Ses, kind == EtsKind::HoltWinters, period};
}

struct RunState {
  double level = 0.0;
  double slope = 0.0;
  std::vector<double> season;  // circular, index t % period
};

// One pass of the error-correction recursions. `y` may be null (zeros).
RunState run(std::span<const double> y, std::size_t n, const Layout& layout, const Eigen::VectorXd& x0,
             double alpha, double beta, double gamma, std::vector<double>& errors) {
  RunState st;
  int idx = 0;
  st.level = x0[idx++];
  if (layout.trend) st.slope = x0[idx++];
  if (layout.seasonal) {
    st.season.assign(static_cast<std::size_t>(layout.period), 0.0);
    double sum = 0.0;
    for (int j = 0; j < layout.period - 1; ++j) {
      st.season[static_cast<std::size_t>(j)] = x0[idx++];
      sum += st.season[static_cast<std::size_t>(j)];
    }
    st.season[static_cast<std::size_t>(layout.period - 1)] = -sum;
  }
  errors.resize(n);
  const auto m = static_cast<std::size_t>(layout.period);
  for (std::size_t t = 0; t < n; ++t) {
    const double s = layout.seasonal ? st.season[t % m] : 0.0;
    const double fitted = st.level + st.slope + s;
    const double e = (y.empty() ? 0.0 : y[t]) - fitted;
    errors[t] = e;
    st.level = st.level + st.slope + alpha * e;
    if (layout.trend) st.slope += beta * e;
    if (layout.seasonal) st.season[t % m] = s + gamma * e;
  }
  return st;
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Params {
  double alpha, beta, gamma;
};

// Unconstrained -> admissible region alpha in (0,1), beta < alpha, gamma < 1 - alpha.
Params decode(const Eigen::VectorXd& u, EtsKind kind) {
  Params p{0.0, 0.0, 0.0};
  p.alpha = kMinParam + (1.0 - 2.0 * kMinParam) * sigmoid(u[0]);
  if (kind != EtsKind::Ses) p.beta = kMinParam + (p.alpha - 2.0 * kMinParam) * sigmoid(u[1]);
  if (kind == EtsKind::HoltWinters) p.gamma = kMinParam + (1.0 - p.alpha - 2.0 * kMinParam) * sigmoid(u[2]);
  return p;
}

}  // namespace

double ets_sse(std::span<const double> y, EtsKind kind, int period, double alpha, double beta,
               double gamma, EtsFit* fit) {
  const Layout layout = layout_for(kind, period);
  const std::size_t n = y.size();
  const int k = layout.size();
  std::vector<double> errors;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);
  run(y, n, layout, zero, alpha, beta, gamma, errors);
  Eigen::VectorXd free_errors = Eigen::Map<const Eigen::VectorXd>(errors.data(), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(k);
    unit[j] = 1.0;
    run({}, n, layout, unit, alpha, beta, gamma, errors);
    design.col(j) = Eigen::Map<const Eigen::VectorXd>(errors.data(), static_cast<Eigen::Index>(n));
  }
  // errors(x0) = free_errors + design * x0
  const Eigen::VectorXd x0 = design.colPivHouseholderQr().solve(-free_errors);
  const RunState st = run(y, n, layout, x0, alpha, beta, gamma, errors);
  double sse = 0.0;
  for (double e : errors) sse += e * e;
  if (fit) {
    fit->kind = kind;
    fit->period = period;
    fit->alpha = alpha;
    fit->beta = beta;
    fit->gamma = gamma;
    fit->level = st.level;
    fit->slope = st.slope;
    fit->seasonal.clear();
    if (layout.seasonal) {
      const auto m = static_cast<std::size_t>(period);
      for (std::size_t j = 0; j < m; ++j) fit->seasonal.push_back(st.season[(n + j) % m]);
    }
    fit->residuals = errors;
    fit->sse = sse;
    const int smoothing = 1 + (layout.trend ? 1 : 0) + (layout.seasonal ? 1 : 0);
    fit->parameter_count = smoothing + k;
    const double dof = std::max(1.0, static_cast<double>(n) - fit->parameter_count);
    fit->sigma2 = sse / dof;
  }
  return sse;
}

EtsFit fit_ets(std::span<const double> y, EtsKind kind, int period) {
  const Layout layout = layout_for(kind, period);
  const std::size_t needed = static_cast<std::size_t>(layout.size()) + 2;
  if (y.size() < needed || (layout.seasonal && y.size() < 2 * static_cast<std::size_t>(period))) {
    throw Error(ErrorCode::SeriesTooShort, "exponential smoothing needs at least " +
                                               std::to_string(std::max<std::size_t>(needed, layout.seasonal ? 2 * period : 0)) +
                                               " observations");
  }
  EtsFit fit;
  if (kind == EtsKind::Ses) {
    auto objective = [&](double a) { return ets_sse(y, kind, period, a, 0.0, 0.0); };
    // Coarse grid guards against local minima, golden section refines.
    double best_a = 0.5;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20; ++i) {
      const double a = kMinParam + (1.0 - 2.0 * kMinParam) * i / 20.0;
      const double v = objective(a);
      if (v < best_v) {
        best_v = v;
        best_a = a;
      }
    }
    const double lo = std::max(kMinParam, best_a - 0.05);
    const double hi = std::min(1.0 - kMinParam, best_a + 0.05);
    const double alpha = optim::golden_section(objective, lo, hi, 1e-7);
    ets_sse(y, kind, period, alpha, 0.0, 0.0, &fit);
    return fit;
  }

  const int dims = kind == EtsKind::Holt ? 2 : 3;
  auto objective = [&](const Eigen::VectorXd& u) {
    const Params p = decode(u, kind);
    return ets_sse(y, kind, period, p.alpha, p.beta, p.gamma);
  };
  // Start at alpha=0.3, beta=0.1*alpha, gamma=0.1*(1-alpha) like common defaults.
  Eigen::VectorXd start(dims);
  start[0] = logit((0.3 - kMinParam) / (1.0 - 2.0 * kMinParam));
  start[1] = logit(0.1);
  if (dims == 3) start[2] = logit(0.1);
  optim::NelderMeadOptions options;
  options.initial_step = 1.0;
  options.max_iterations = 600;
  auto result = optim::nelder_mead(objective, start, options);
  // A restart from the optimum shakes off premature simplex collapse.
  result = optim::nelder_mead(objective, result.x, options);
  const Params p = decode(result.x, kind);
  ets_sse(y, kind, period, p.alpha, p.beta, p.gamma, &fit);
  return fit;
}

MeanVariancePath ets_forecast(const EtsFit& fit, int horizon) {
  MeanVariancePath out;
  const bool seasonal = fit.kind == EtsKind::HoltWinters;
  const bool trend = fit.kind != EtsKind::Ses;
  double cumulative = 0.0;
  for (int h = 1; h <= horizon; ++h) {
    double mean = fit.level + (trend ? h * fit.slope : 0.0);
    if (seasonal) mean += fit.seasonal[static_cast<std::size_t>((h - 1) % fit.period)];
    out.mean.push_back(mean);
    out.variance.push_back(fit.sigma2 * (1.0 + cumulative));
    const int j = h;
    double c = fit.alpha + (trend ? fit.beta * j : 0.0);
    if (seasonal && j % fit.period == 0) c += fit.gamma;
    cumulative += c * c;
  }
  return out;
}

}  // namespace rise::models
