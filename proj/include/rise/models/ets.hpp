#pragma once

#include <span>
#include <vector>

namespace rise::models {

enum class EtsKind { Ses, Holt, HoltWinters };

/// Additive-error exponential smoothing (ANN, AAN, AAA). Smoothing
/// parameters minimize in-sample SSE; for each candidate the initial states
/// are solved exactly by least squares, since one-step errors are affine in
/// the initial state.
struct EtsFit {
  EtsKind kind = EtsKind::Ses;
  int period = 12;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double level = 0.0;             // final state
  double slope = 0.0;
  std::vector<double> seasonal;   // seasonal[j] applies to forecast step h with (h-1) % period == j
  double sigma2 = 0.0;
  double sse = 0.0;
  std::vector<double> residuals;  // one-step errors
  int parameter_count = 0;
};

EtsFit fit_ets(std::span<const double> y, EtsKind kind, int period = 12);

/// SSE and one-step errors for fixed smoothing parameters with the
/// least-squares initial state. Exposed for the parameter search and tests.
double ets_sse(std::span<const double> y, EtsKind kind, int period, double alpha, double beta,
               double gamma, EtsFit* fit = nullptr);

struct MeanVariancePath {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Point forecast and forecast-error variance
///   sigma^2 * (1 + sum_{j<h} (alpha + beta j + gamma [j mod m == 0])^2).
MeanVariancePath ets_forecast(const EtsFit& fit, int horizon);

}  // namespace rise::models
