#pragma once

#include <array>
#include <span>
#include <vector>

#include "rise/series.hpp"

namespace rise::models {

enum class DecompositionMode { Multiplicative, Additive };

/// Classical decomposition: centered 2x12 moving-average trend (linearly
/// extended over the first and last six months), per-calendar-month medians
/// of detrended values as a strictly periodic seasonal, remainder by
/// division (multiplicative) or subtraction (additive).
struct Decomposition {
  MonthKey start;
  std::vector<double> trend;
  std::vector<double> seasonal;
  std::vector<double> remainder;
  DecompositionMode mode = DecompositionMode::Multiplicative;
  /// Seasonal factor per calendar month (index 0 = January).
  std::array<double, 12> seasonal_index{};

  std::size_t size() const { return trend.size(); }
  /// seasonal * remainder (or +): the year-specific seasonal factor.
  double detrended(std::size_t t) const;
};

/// Throws NonPositiveValue (multiplicative with values <= 0), SeriesTooShort
/// (fewer than 25 months) or AllMissing.
Decomposition decompose(const MonthlySeries& series, DecompositionMode mode);

enum class SeasonalVariant {
  A,  // mean of the last three years per calendar month
  B,  // last year's factors
  C,  // AR(1) forecast of each calendar month's factor series
};

/// Seasonal factors for the `horizon` months following the decomposition.
/// Throws InsufficientHistory (A: 36 months, B: 12, C: 24).
std::vector<double> seasonal_variant(const Decomposition& dec, SeasonalVariant variant, int horizon);

/// Seasonal strength max(0, 1 - var(R) / var(S + R)) from an additive
/// moving-average decomposition, on the log scale when all values are positive.
double seasonal_strength(const MonthlySeries& series);
double seasonal_strength(std::span<const double> y, int period);

}  // namespace rise::models
