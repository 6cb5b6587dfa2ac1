#include "rise/models/forecast.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "rise/csv.hpp"
#include "rise/eval.hpp"
#include "rise/models/arima.hpp"
#include "rise/models/boxcox.hpp"
#include "rise/models/decompose.hpp"
#include "rise/models/ets.hpp"
#include "rise/models/nnar.hpp"

namespace rise::models {
namespace {

constexpr int kPeriod = 12;

struct FamilyName {
  ModelFamily family;
  std::string_view name;
};

constexpr std::array<FamilyName, 12> kFamilies{{
    {ModelFamily::SeasonalNaive, "seasonal_naive"},
    {ModelFamily::Naive, "naive"},
    {ModelFamily::Drift, "drift"},
    {ModelFamily::Arima, "arima"},
    {ModelFamily::Ses, "ses"},
    {ModelFamily::Holt, "holt"},
    {ModelFamily::HoltWinters, "holt_winters"},
    {ModelFamily::StlA, "stl_a"},
    {ModelFamily::StlB, "stl_b"},
    {ModelFamily::StlC, "stl_c"},
    {ModelFamily::BoxCoxHoltWinters, "bchw"},
    {ModelFamily::Nnar, "nnar"},
}};

double square(double x) { return x * x; }

ForecastResult gaussian(const MonthlySeries& series, const std::string& id, std::vector<double> mean,
                        const std::vector<double>& variance, std::vector<double> residuals) {
  ForecastResult r;
  r.origin = series.end();
  r.horizon = static_cast<int>(mean.size());
  r.model_id = id;
  std::vector<double> lower(mean.size()), upper(mean.size());
  for (std::size_t h = 0; h < mean.size(); ++h) {
    const double half = kZ80 * std::sqrt(std::max(variance[h], 0.0));
    lower[h] = mean[h] - half;
    upper[h] = mean[h] + half;
  }
  r.mean = std::move(mean);
  r.lower80 = std::move(lower);
  r.upper80 = std::move(upper);
  r.residuals = std::move(residuals);
  return r;
}

void require_length(const MonthlySeries& series, ModelFamily family) {
  const std::size_t need = minimum_length(family);
  if (series.size() < need) {
    throw Error(ErrorCode::SeriesTooShort, std::string(family_name(family)) + " on '" + series.name() +
                                               "' needs " + std::to_string(need) + " months, have " +
                                               std::to_string(series.size()));
  }
}

ForecastResult seasonal_naive(const MonthlySeries& s, const std::string& id, const std::vector<double>& y,
                              int horizon) {
  const std::size_t n = y.size();
  std::vector<double> res;
  for (std::size_t t = kPeriod; t < n; ++t) res.push_back(y[t] - y[t - kPeriod]);
  double sigma2 = 0.0;
  for (double e : res) sigma2 += e * e;
  sigma2 /= static_cast<double>(res.size());
  std::vector<double> mean, var;
  for (int h = 1; h <= horizon; ++h) {
    mean.push_back(y[n - kPeriod + static_cast<std::size_t>((h - 1) % kPeriod)]);
    var.push_back(sigma2 * ((h - 1) / kPeriod + 1));
  }
  return gaussian(s, id, std::move(mean), var, std::move(res));
}

ForecastResult naive(const MonthlySeries& s, const std::string& id, const std::vector<double>& y, int horizon) {
  const std::size_t n = y.size();
  std::vector<double> res;
  for (std::size_t t = 1; t < n; ++t) res.push_back(y[t] - y[t - 1]);
  double sigma2 = 0.0;
  for (double e : res) sigma2 += e * e;
  sigma2 /= static_cast<double>(res.size());
  std::vector<double> mean(static_cast<std::size_t>(horizon), y.back()), var;
  for (int h = 1; h <= horizon; ++h) var.push_back(sigma2 * h);
  return gaussian(s, id, std::move(mean), var, std::move(res));
}

ForecastResult drift(const MonthlySeries& s, const std::string& id, const std::vector<double>& y, int horizon) {
  const std::size_t n = y.size();
  const double nm1 = static_cast<double>(n - 1);
  const double slope = (y.back() - y.front()) / nm1;
  std::vector<double> res;
  double sse = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    res.push_back(y[t] - y[t - 1] - slope);
    sse += square(res.back());
  }
  const double sigma2 = n > 2 ? sse / static_cast<double>(n - 2) : 0.0;
  std::vector<double> mean, var;
  for (int h = 1; h <= horizon; ++h) {
    mean.push_back(y.back() + h * slope);
    var.push_back(sigma2 * h * (1.0 + h / nm1));
  }
  return gaussian(s, id, std::move(mean), var, std::move(res));
}

ForecastResult ets_family(const MonthlySeries& s, const std::string& id, const std::vector<double>& y,
                          EtsKind kind, int horizon) {
  const EtsFit fit = fit_ets(y, kind, kPeriod);
  auto path = ets_forecast(fit, horizon);
  return gaussian(s, id, std::move(path.mean), path.variance, fit.residuals);
}

std::vector<double> arima_residuals(const ArimaFit& fit) {
  return {fit.residuals.begin() + fit.conditioning, fit.residuals.end()};
}

ForecastResult arima_family(const MonthlySeries& s, const ModelSpec& spec, const std::vector<double>& y,
                            int horizon) {
  const ArimaFit fit = auto_arima(y, spec.arima);
  auto path = arima_forecast(fit, horizon);
  return gaussian(s, spec.model_id(), std::move(path.mean), path.variance, arima_residuals(fit));
}

// Seasonal adjustment and its ARIMA, shared by the three decomposition variants.
struct StlBase {
  Decomposition dec;
  MeanVariancePath adjusted;
  std::vector<double> residuals;  // on the original scale
  double residual_sd = 0.0;
};

StlBase stl_base(const MonthlySeries& s, const std::vector<double>& y, const ArimaOptions& options, int horizon) {
  StlBase base;
  base.dec = decompose(s, DecompositionMode::Multiplicative);
  std::vector<double> adjusted(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) adjusted[t] = y[t] / base.dec.seasonal[t];
  const ArimaFit fit = auto_arima(adjusted, options);
  base.adjusted = arima_forecast(fit, horizon);
  const std::size_t offset = y.size() - fit.residuals.size();
  double ss = 0.0;
  for (std::size_t i = static_cast<std::size_t>(fit.conditioning); i < fit.residuals.size(); ++i) {
    const double e = fit.residuals[i] * base.dec.seasonal[offset + i];
    base.residuals.push_back(e);
    ss += e * e;
  }
  const std::size_t m = base.residuals.size();
  base.residual_sd = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
  return base;
}

ForecastResult stl_variant(const MonthlySeries& s, const std::string& id, const StlBase& base,
                           SeasonalVariant variant, int horizon) {
  const auto factors = seasonal_variant(base.dec, variant, horizon);
  std::vector<double> mean, var;
  for (int h = 1; h <= horizon; ++h) {
    const auto i = static_cast<std::size_t>(h - 1);
    mean.push_back(base.adjusted.mean[i] * factors[i]);
    var.push_back(square(base.residual_sd * factors[i]) * h);
  }
  return gaussian(s, id, std::move(mean), var, base.residuals);
}

ForecastResult bchw(const MonthlySeries& s, const std::string& id, const std::vector<double>& y, int horizon) {
  const double lambda = guerrero_lambda(y, kPeriod);
  std::vector<double> z(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) z[t] = lambda == 1.0 ? y[t] - 1.0 : box_cox(y[t], lambda);
  const EtsFit fit = fit_ets(z, EtsKind::HoltWinters, kPeriod);
  const auto path = ets_forecast(fit, horizon);
  double ss = 0.0;
  for (double e : fit.residuals) ss += e * e;
  const double sd = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(fit.residuals.size() - 1, 1)));
  auto back = [&](double x) { return lambda == 1.0 ? x + 1.0 : inverse_box_cox(x, lambda); };
  ForecastResult r;
  r.origin = s.end();
  r.horizon = horizon;
  r.model_id = id;
  std::vector<double> lower, upper;
  for (int h = 1; h <= horizon; ++h) {
    const double m = path.mean[static_cast<std::size_t>(h - 1)];
    const double half = kZ80 * sd * std::sqrt(static_cast<double>(h));
    r.mean.push_back(back(m));
    lower.push_back(back(m - half));
    upper.push_back(back(m + half));
  }
  r.lower80 = std::move(lower);
  r.upper80 = std::move(upper);
  // Residuals on the original scale: observed minus back-transformed fit.
  for (std::size_t t = 0; t < y.size(); ++t) r.residuals.push_back(y[t] - back(z[t] - fit.residuals[t]));
  return r;
}

ForecastResult nnar(const MonthlySeries& s, const ModelSpec& spec, const std::vector<double>& y, int horizon) {
  auto f = nnar_forecast(y, spec.nnar, horizon);
  ForecastResult r;
  r.origin = s.end();
  r.horizon = horizon;
  r.model_id = spec.model_id();
  r.mean = std::move(f.mean);
  r.residuals = std::move(f.residuals);
  return r;
}

void clamp(ForecastResult& r) {
  for (auto& v : r.mean) v = std::max(v, 0.0);
  if (r.lower80) {
    for (auto& v : *r.lower80) v = std::max(v, 0.0);
  }
  if (r.upper80) {
    for (auto& v : *r.upper80) v = std::max(v, 0.0);
  }
  for (double v : r.mean) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonConvergence, r.model_id + " produced a non-finite forecast");
    }
  }
}

bool is_stl(ModelFamily f) {
  return f == ModelFamily::StlA || f == ModelFamily::StlB || f == ModelFamily::StlC;
}

SeasonalVariant variant_of(ModelFamily f) {
  return f == ModelFamily::StlA ? SeasonalVariant::A : f == ModelFamily::StlB ? SeasonalVariant::B : SeasonalVariant::C;
}

ForecastResult dispatch(const MonthlySeries& series, const ModelSpec& spec, int horizon, const StlBase* shared) {
  if (horizon < 1) throw Error(ErrorCode::OutOfRange, "forecast horizon must be at least 1");
  require_length(series, spec.family);
  const auto y = series.dense();
  const std::string& id = spec.model_id();
  ForecastResult r;
  switch (spec.family) {
    case ModelFamily::SeasonalNaive: r = seasonal_naive(series, id, y, horizon); break;
    case ModelFamily::Naive: r = naive(series, id, y, horizon); break;
    case ModelFamily::Drift: r = drift(series, id, y, horizon); break;
    case ModelFamily::Arima: r = arima_family(series, spec, y, horizon); break;
    case ModelFamily::Ses: r = ets_family(series, id, y, EtsKind::Ses, horizon); break;
    case ModelFamily::Holt: r = ets_family(series, id, y, EtsKind::Holt, horizon); break;
    case ModelFamily::HoltWinters: r = ets_family(series, id, y, EtsKind::HoltWinters, horizon); break;
    case ModelFamily::StlA:
    case ModelFamily::StlB:
    case ModelFamily::StlC: {
      if (shared) {
        r = stl_variant(series, id, *shared, variant_of(spec.family), horizon);
      } else {
        const StlBase base = stl_base(series, y, spec.arima, horizon);
        r = stl_variant(series, id, base, variant_of(spec.family), horizon);
      }
      break;
    }
    case ModelFamily::BoxCoxHoltWinters: r = bchw(series, id, y, horizon); break;
    case ModelFamily::Nnar: r = nnar(series, spec, y, horizon); break;
  }
  clamp(r);
  return r;
}

}  // namespace

std::optional<double> ForecastResult::mean_at(MonthKey m) const {
  const int step = (m - origin) - 1;
  if (step < 0 || step >= horizon) return std::nullopt;
  return mean[static_cast<std::size_t>(step)];
}

std::string_view family_name(ModelFamily family) {
  for (const auto& f : kFamilies) {
    if (f.family == family) return f.name;
  }
  return "unknown";
}

std::optional<ModelFamily> parse_family(std::string_view name) {
  for (const auto& f : kFamilies) {
    if (f.name == name) return f.family;
  }
  if (name == "snaive") return ModelFamily::SeasonalNaive;
  if (name == "hw") return ModelFamily::HoltWinters;
  return std::nullopt;
}

ModelSpec ModelSpec::of(ModelFamily family, std::string id) {
  ModelSpec spec;
  spec.family = family;
  spec.id = id.empty() ? std::string(family_name(family)) : std::move(id);
  return spec;
}

std::size_t minimum_length(ModelFamily family) {
  switch (family) {
    case ModelFamily::Naive:
    case ModelFamily::Drift:
    case ModelFamily::Ses:
    case ModelFamily::Holt:
    case ModelFamily::Arima:
      return 3;
    case ModelFamily::StlA:
      return 36;
    case ModelFamily::StlB:
    case ModelFamily::StlC:
      return 25;
    case ModelFamily::SeasonalNaive:
    case ModelFamily::HoltWinters:
    case ModelFamily::BoxCoxHoltWinters:
    case ModelFamily::Nnar:
      return 24;
  }
  return 3;
}

ForecastResult fit_forecast(const MonthlySeries& series, const ModelSpec& spec, int horizon) {
  return dispatch(series, spec, horizon, nullptr);
}

std::vector<FitOutcome> fit_forecasts(const MonthlySeries& series, std::span<const ModelSpec> specs, int horizon) {
  std::vector<FitOutcome> out;
  out.reserve(specs.size());
  std::optional<StlBase> shared;
  std::optional<Error> shared_error;
  for (const auto& spec : specs) {
    try {
      if (is_stl(spec.family)) {
        require_length(series, spec.family);
        if (!shared && !shared_error) {
          try {
            shared = stl_base(series, series.dense(), spec.arima, horizon);
          } catch (const Error& e) {
            shared_error = e;
          }
        }
        if (shared_error) throw *shared_error;
        out.emplace_back(dispatch(series, spec, horizon, &*shared));
      } else {
        out.emplace_back(dispatch(series, spec, horizon, nullptr));
      }
    } catch (const Error& e) {
      out.emplace_back(e);
    }
  }
  return out;
}

ValidationRow score_forecast(const std::string& model_id, std::span<const double> forecast,
                             const MonthlySeries& train, const MonthlySeries& validation, int mase_season) {
  ValidationRow row;
  row.model_id = model_id;
  try {
    const auto actual = validation.dense();
    const auto insample = train.dense();
    if (forecast.size() < actual.size()) {
      throw Error(ErrorCode::LengthMismatch, "forecast shorter than the validation window");
    }
    const auto f = forecast.first(actual.size());
    row.rmse = eval::rmse(f, actual);
    row.mape = eval::mape(f, actual).value;
    row.mase = eval::mase(f, actual, insample, mase_season);
  } catch (const Error& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.rmse = row.mape = row.mase = nan;
    row.error = e.what();
  }
  return row;
}

std::vector<ValidationRow> validate_models(const MonthlySeries& train, const MonthlySeries& validation,
                                           std::span<const ModelSpec> specs, int mase_season) {
  if (validation.size() == 0) throw Error(ErrorCode::EmptyTable, "validation window is empty");
  const auto outcomes = fit_forecasts(train, specs, static_cast<int>(validation.size()));
  std::vector<ValidationRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (const auto* fit = std::get_if<ForecastResult>(&outcomes[i])) {
      rows.push_back(score_forecast(specs[i].model_id(), fit->mean, train, validation, mase_season));
    } else {
      ValidationRow row;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.model_id = specs[i].model_id();
      row.rmse = row.mape = row.mase = nan;
      row.error = std::get<Error>(outcomes[i]).what();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_validation_table(std::ostream& out, std::span<const ValidationRow> rows) {
  out << "model_id,rmse,mape,mase\n";
  for (const auto& row : rows) {
    csv::write_row(out, {row.model_id, csv::format_number(row.rmse), csv::format_number(row.mape),
                         csv::format_number(row.mase)});
  }
}

}  // namespace rise::models
