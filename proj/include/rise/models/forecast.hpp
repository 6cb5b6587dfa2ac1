#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rise/error.hpp"
#include "rise/series.hpp"

namespace rise::models {

/// Two-sided 80% Gaussian quantile.
inline constexpr double kZ80 = 1.2815515655446004;

struct ForecastResult {
  MonthKey origin;  // last training month
  int horizon = 0;
  std::vector<double> mean;
  std::optional<std::vector<double>> lower80;
  std::optional<std::vector<double>> upper80;
  std::string model_id;
  /// One-step in-sample errors where the family defines them (else empty).
  std::vector<double> residuals;

  bool has_bounds() const { return lower80.has_value() && upper80.has_value(); }
  MonthKey month_at(int step) const { return origin + 1 + step; }
  /// Point forecast for a calendar month; nullopt outside the horizon.
  std::optional<double> mean_at(MonthKey m) const;
};

enum class ModelFamily {
  SeasonalNaive,
  Naive,
  Drift,
  Arima,
  Ses,
  Holt,
  HoltWinters,
  StlA,
  StlB,
  StlC,
  BoxCoxHoltWinters,  // TBATS stand-in
  Nnar,
};

std::string_view family_name(ModelFamily family);
std::optional<ModelFamily> parse_family(std::string_view name);

struct ArimaOptions {
  int max_p = 3;
  int max_q = 3;
  int max_seasonal_p = 1;
  int max_seasonal_q = 1;
  int max_order = 5;  // cap on p + q + P + Q
  int period = 12;
  std::optional<int> d;  // forced differencing orders; chosen by tests otherwise
  std::optional<int> seasonal_d;
};

struct NnarOptions {
  int p = 12;         // non-seasonal lags 1..p
  int seasonal_p = 1; // seasonal lags 12, 24, ...
  int size = 7;       // hidden units
  int repeats = 20;
  int epochs = 300;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
};

struct ModelSpec {
  ModelFamily family = ModelFamily::SeasonalNaive;
  std::string id;  // defaults to the family name
  ArimaOptions arima;
  NnarOptions nnar;

  static ModelSpec of(ModelFamily family, std::string id = {});
  const std::string& model_id() const { return id; }
};

/// Minimum series length a family accepts.
std::size_t minimum_length(ModelFamily family);

/// Fits one model on a complete series and forecasts `horizon` months.
/// Point forecasts and bounds are clamped at 0. Throws SeriesTooShort,
/// NonConvergence, NonPositiveValue or AllMissing (incomplete series).
ForecastResult fit_forecast(const MonthlySeries& series, const ModelSpec& spec, int horizon);

using FitOutcome = std::variant<ForecastResult, Error>;

/// Fits several models on the same series, sharing intermediate fits (the
/// seasonal-adjustment ARIMA of the STL variants). Failures are returned
/// per model instead of thrown.
std::vector<FitOutcome> fit_forecasts(const MonthlySeries& series, std::span<const ModelSpec> specs,
                                      int horizon);

struct ValidationRow {
  std::string model_id;
  double rmse = 0.0;
  double mape = 0.0;
  double mase = 0.0;
  std::optional<std::string> error;  // set when the fit failed; metrics are NaN
};

/// Scores each spec on the validation window after fitting on `train`.
std::vector<ValidationRow> validate_models(const MonthlySeries& train, const MonthlySeries& validation,
                                           std::span<const ModelSpec> specs, int mase_season = 12);

/// Scores ready-made forecasts (e.g. reconciled ones) the same way.
ValidationRow score_forecast(const std::string& model_id, std::span<const double> forecast,
                             const MonthlySeries& train, const MonthlySeries& validation,
                             int mase_season = 12);

void write_validation_table(std::ostream& out, std::span<const ValidationRow> rows);

}  // namespace rise::models
