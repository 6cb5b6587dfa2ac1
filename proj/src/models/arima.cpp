#include "rise/models/arima.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rise/error.hpp"
#include "rise/models/decompose.hpp"
#include "rise/optim.hpp"

namespace rise::models {
namespace {

// Coefficients of a polynomial in B, index = power.
using Poly = std::vector<double>;

Poly multiply(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// 1 - sum c_i B^{i*step}  (sign = -1)  or  1 + sum c_i B^{i*step}  (sign = +1)
Poly lag_poly(const std::vector<double>& coefs, int step, double sign) {
  Poly out(coefs.size() * static_cast<std::size_t>(step) + 1, 0.0);
  out[0] = 1.0;
  for (std::size_t i = 0; i < coefs.size(); ++i) out[(i + 1) * static_cast<std::size_t>(step)] = sign * coefs[i];
  return out;
}

Poly differencing_poly(int d, int seasonal_d, int period) {
  Poly out{1.0};
  for (int i = 0; i < d; ++i) out = multiply(out, Poly{1.0, -1.0});
  for (int i = 0; i < seasonal_d; ++i) {
    Poly s(static_cast<std::size_t>(period) + 1, 0.0);
    s[0] = 1.0;
    s[static_cast<std::size_t>(period)] = -1.0;
    out = multiply(out, s);
  }
  return out;
}

std::vector<double> apply_poly(std::span<const double> y, const Poly& poly) {
  const std::size_t lag = poly.size() - 1;
  std::vector<double> out;
  if (y.size() <= lag) return out;
  out.reserve(y.size() - lag);
  for (std::size_t t = lag; t < y.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) acc += poly[k] * y[t - k];
    out.push_back(acc);
  }
  return out;
}

// All roots of 1 + sum c_i z^i outside the unit circle (sign already folded in).
bool roots_outside_unit_circle(const std::vector<double>& signed_coefs) {
  const auto p = static_cast<Eigen::Index>(signed_coefs.size());
  if (p == 0) return true;
  // Reciprocal roots are the eigenvalues of the companion of x^p + c1 x^{p-1} + ... + cp.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) companion(0, j) = -signed_coefs[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd eig = companion.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    if (std::abs(eig[i]) >= 0.999) return false;
  return true;
}

std::vector<double> negated(const std::vector<double>& v) {
  std::vector<double> out(v);
  for (auto& x : out) x = -x;
  return out;
}

struct Sparse {
  std::vector<int> lag;
  std::vector<double> coef;
};

Sparse sparse_from(const Poly& poly, double sign) {
  Sparse s;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    if (poly[i] != 0.0) {
      s.lag.push_back(static_cast<int>(i));
      s.coef.push_back(sign * poly[i]);
    }
  }
  return s;
}

struct Unpacked {
  std::vector<double> ar, ma, sar, sma;
  double constant = 0.0;
};

Unpacked unpack(const Eigen::VectorXd& x, const ArimaOrder& o) {
  Unpacked u;
  Eigen::Index k = 0;
  for (int i = 0; i < o.p; ++i) u.ar.push_back(x[k++]);
  for (int i = 0; i < o.q; ++i) u.ma.push_back(x[k++]);
  for (int i = 0; i < o.seasonal_p; ++i) u.sar.push_back(x[k++]);
  for (int i = 0; i < o.seasonal_q; ++i) u.sma.push_back(x[k++]);
  if (o.include_constant) u.constant = x[k++];
  return u;
}

// CSS residuals of the differenced series, zero before `conditioning`.
void css_residuals(const std::vector<double>& w, const Unpacked& u, const ArimaOrder& o, int conditioning,
                   std::vector<double>& e) {
  const Poly ar = multiply(lag_poly(u.ar, 1, -1.0), lag_poly(u.sar, o.period, -1.0));
  const Poly ma = multiply(lag_poly(u.ma, 1, 1.0), lag_poly(u.sma, o.period, 1.0));
  const Sparse ar_terms = sparse_from(ar, -1.0);  // w_t - mu = sum A_i (w_{t-i} - mu) + ...
  const Sparse ma_terms = sparse_from(ma, 1.0);
  const std::size_t n = w.size();
  e.assign(n, 0.0);
  const double mu = u.constant;
  for (std::size_t t = static_cast<std::size_t>(conditioning); t < n; ++t) {
    double pred = mu;
    for (std::size_t i = 0; i < ar_terms.lag.size(); ++i) {
      const auto lag = static_cast<std::size_t>(ar_terms.lag[i]);
      pred += ar_terms.coef[i] * (w[t - lag] - mu);
    }
    for (std::size_t j = 0; j < ma_terms.lag.size(); ++j) {
      const auto lag = static_cast<std::size_t>(ma_terms.lag[j]);
      if (t >= lag) pred += ma_terms.coef[j] * e[t - lag];
    }
    e[t] = w[t] - pred;
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double kpss_statistic(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 3) return 0.0;
  double mu = 0.0;
  for (double v : y) mu += v;
  mu /= static_cast<double>(n);
  std::vector<double> e(n);
  for (std::size_t t = 0; t < n; ++t) e[t] = y[t] - mu;
  double partial = 0.0;
  double eta = 0.0;
  for (double v : e) {
    partial += v;
    eta += partial * partial;
  }
  const auto nd = static_cast<double>(n);
  const int lags = static_cast<int>(std::trunc(4.0 * std::pow(nd / 100.0, 0.25)));
  double s2 = 0.0;
  for (double v : e) s2 += v * v;
  for (int s = 1; s <= lags; ++s) {
    double acc = 0.0;
    for (std::size_t t = static_cast<std::size_t>(s); t < n; ++t) acc += e[t] * e[t - static_cast<std::size_t>(s)];
    s2 += 2.0 * (1.0 - s / (lags + 1.0)) * acc;
  }
  s2 /= nd;
  if (!(s2 > 0.0)) return 0.0;
  return eta / (nd * nd * s2);
}

ArimaFit fit_arima(std::span<const double> y, const ArimaOrder& order, int conditioning) {
  ArimaFit fit;
  fit.order = order;
  fit.data.assign(y.begin(), y.end());
  fit.differenced = apply_poly(y, differencing_poly(order.d, order.seasonal_d, order.period));
  const int own_conditioning = order.p + order.period * order.seasonal_p;
  if (conditioning < own_conditioning) conditioning = own_conditioning;
  fit.conditioning = conditioning;
  const auto& w = fit.differenced;
  const int n_params = order.p + order.q + order.seasonal_p + order.seasonal_q + (order.include_constant ? 1 : 0);
  const int n_eff = static_cast<int>(w.size()) - conditioning;
  if (n_eff < n_params + 3) {
    throw Error(ErrorCode::SeriesTooShort, "not enough observations for the ARIMA order");
  }

  Eigen::VectorXd start = Eigen::VectorXd::Zero(n_params);
  if (order.include_constant) start[n_params - 1] = mean_of(w);

  std::vector<double> e;
  auto residual_fn = [&](const Eigen::VectorXd& x) {
    css_residuals(w, unpack(x, order), order, conditioning, e);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(e.data() + conditioning, n_eff));
  };

  Eigen::VectorXd best = start;
  if (n_params > 0) {
    optim::LevenbergMarquardtOptions options;
    options.max_iterations = 100;
    options.cost_tolerance = 1e-10;
    options.step_tolerance = 1e-9;
    best = optim::levenberg_marquardt(residual_fn, start, options).x;
  }
  const Unpacked u = unpack(best, order);
  if (!roots_outside_unit_circle(negated(u.ar)) || !roots_outside_unit_circle(negated(u.sar)) ||
      !roots_outside_unit_circle(u.ma) || !roots_outside_unit_circle(u.sma)) {
    throw Error(ErrorCode::NonConvergence, "ARIMA fit is not stationary/invertible");
  }
  css_residuals(w, u, order, conditioning, e);
  double sse = 0.0;
  for (std::size_t t = static_cast<std::size_t>(conditioning); t < w.size(); ++t) sse += e[t] * e[t];
  if (!std::isfinite(sse)) throw Error(ErrorCode::NonConvergence, "ARIMA residuals diverged");

  fit.ar = u.ar;
  fit.ma = u.ma;
  fit.seasonal_ar = u.sar;
  fit.seasonal_ma = u.sma;
  fit.constant = u.constant;
  fit.residuals = e;
  const double n = n_eff;
  fit.sigma2 = std::max(sse / n, 1e-300);
  const double k = n_params + 1.0;
  const double loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * fit.sigma2) + 1.0);
  fit.aicc = -2.0 * loglik + 2.0 * k + (n - k - 1.0 > 0.0 ? 2.0 * k * (k + 1.0) / (n - k - 1.0)
                                                         : std::numeric_limits<double>::infinity());
  return fit;
}

ArimaFit auto_arima(std::span<const double> y, const ArimaOptions& options) {
  const int period = options.period;
  int seasonal_d = 0;
  if (options.seasonal_d) {
    seasonal_d = *options.seasonal_d;
  } else if (y.size() >= 3 * static_cast<std::size_t>(period)) {
    seasonal_d = seasonal_strength(y, period) > 0.64 ? 1 : 0;
  }
  int d = 0;
  if (options.d) {
    d = *options.d;
  } else {
    const auto w = apply_poly(y, differencing_poly(0, seasonal_d, period));
    d = kpss_statistic(w) > 0.463 ? 1 : 0;
  }

  const int conditioning = options.max_p + period * options.max_seasonal_p;
  const bool constant_allowed = d + seasonal_d <= 1;
  ArimaFit best;
  bool have_best = false;
  for (int with_constant = 0; with_constant <= 1; ++with_constant) {
    if (with_constant && !constant_allowed) continue;
    if (!with_constant && d + seasonal_d == 0) continue;  // stationary models always carry a mean
    for (int p = 0; p <= options.max_p; ++p)
      for (int q = 0; q <= options.max_q; ++q)
        for (int sp = 0; sp <= options.max_seasonal_p; ++sp)
          for (int sq = 0; sq <= options.max_seasonal_q; ++sq) {
            if (p + q + sp + sq > options.max_order) continue;
            ArimaOrder order{p, d, q, sp, seasonal_d, sq, period, with_constant == 1};
            try {
              ArimaFit fit = fit_arima(y, order, conditioning);
              if (std::isfinite(fit.aicc) && (!have_best || fit.aicc < best.aicc)) {
                best = std::move(fit);
                have_best = true;
              }
            } catch (const Error&) {
              // rejected candidate
            }
          }
  }
  if (!have_best) {
    // Pure differencing model has no ARMA parameters and always fits.
    ArimaOrder order{0, d, 0, 0, seasonal_d, 0, period, constant_allowed};
    try {
      return fit_arima(y, order);
    } catch (const Error&) {
      throw Error(ErrorCode::NonConvergence, "no admissible ARIMA model for a series of length " +
                                                 std::to_string(y.size()));
    }
  }
  return best;
}

MeanVariancePath arima_forecast(const ArimaFit& fit, int horizon) {
  const auto& o = fit.order;
  const Poly ar = multiply(lag_poly(fit.ar, 1, -1.0), lag_poly(fit.seasonal_ar, o.period, -1.0));
  const Poly ma = multiply(lag_poly(fit.ma, 1, 1.0), lag_poly(fit.seasonal_ma, o.period, 1.0));
  const Poly diff = differencing_poly(o.d, o.seasonal_d, o.period);
  const Sparse ar_terms = sparse_from(ar, -1.0);
  const Sparse ma_terms = sparse_from(ma, 1.0);

  std::vector<double> w = fit.differenced;
  std::vector<double> e = fit.residuals;
  std::vector<double> y = fit.data;
  const std::size_t n_w = w.size();
  const double mu = fit.constant;
  MeanVariancePath out;
  for (int h = 1; h <= horizon; ++h) {
    const std::size_t t = n_w + static_cast<std::size_t>(h) - 1;
    double pred = mu;
    for (std::size_t i = 0; i < ar_terms.lag.size(); ++i) {
      const auto lag = static_cast<std::size_t>(ar_terms.lag[i]);
      pred += ar_terms.coef[i] * (w[t - lag] - mu);
    }
    for (std::size_t j = 0; j < ma_terms.lag.size(); ++j) {
      const auto lag = static_cast<std::size_t>(ma_terms.lag[j]);
      if (t >= lag && t - lag < n_w) pred += ma_terms.coef[j] * e[t - lag];
    }
    w.push_back(pred);
    e.push_back(0.0);
    // y_T = w_T - sum_{k>=1} diff_k y_{T-k}
    double level = pred;
    const std::size_t ty = y.size();
    for (std::size_t k = 1; k < diff.size(); ++k) level -= diff[k] * y[ty - k];
    y.push_back(level);
    out.mean.push_back(level);
  }

  // psi weights of ma(B) / (ar(B) diff(B))
  const Poly full_ar = multiply(ar, diff);
  std::vector<double> psi(static_cast<std::size_t>(std::max(horizon, 1)), 0.0);
  psi[0] = 1.0;
  for (std::size_t j = 1; j < psi.size(); ++j) {
    double v = j < ma.size() ? ma[j] : 0.0;
    for (std::size_t i = 1; i <= j && i < full_ar.size(); ++i) v += -full_ar[i] * psi[j - i];
    psi[j] = v;
  }
  double cumulative = 0.0;
  for (int h = 0; h < horizon; ++h) {
    cumulative += psi[static_cast<std::size_t>(h)] * psi[static_cast<std::size_t>(h)];
    out.variance.push_back(fit.sigma2 * cumulative);
  }
  return out;
}

}  // namespace rise::models
