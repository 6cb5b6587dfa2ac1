#include "rise/series.hpp"

#include <algorithm>
#include <cmath>

#include "rise/error.hpp"

namespace rise {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateObservation: return "DuplicateObservation";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::MalformedTree: return "MalformedTree";
    case ErrorCode::BadProportions: return "BadProportions";
    case ErrorCode::SingularW: return "SingularW";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::ModelSetMismatch: return "ModelSetMismatch";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::NoKeywordPasses: return "NoKeywordPasses";
    case ErrorCode::ZeroIndex: return "ZeroIndex";
    case ErrorCode::NoFlightData: return "NoFlightData";
    case ErrorCode::NoSignal: return "NoSignal";
    case ErrorCode::DegenerateX: return "DegenerateX";
    case ErrorCode::MissingMonth: return "MissingMonth";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NonPositiveTrend: return "NonPositiveTrend";
    case ErrorCode::NoBounds: return "NoBounds";
    case ErrorCode::ZeroScale: return "ZeroScale";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::ZeroMeanActual: return "ZeroMeanActual";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

MonthlySeries::MonthlySeries(std::string name, MonthKey start,
                             std::vector<std::optional<double>> values)
    : name_(std::move(name)), start_(start), values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::OutOfRange, "series '" + name_ + "' must have at least one month");
  }
  for (const auto& v : values_) {
    if (v && (!std::isfinite(*v) || *v < 0.0)) {
      throw Error(ErrorCode::SchemaError,
                  "series '" + name_ + "' contains a negative or non-finite value");
    }
  }
}

MonthlySeries::MonthlySeries(std::string name, MonthKey start, const std::vector<double>& values)
    : MonthlySeries(std::move(name), start,
                    std::vector<std::optional<double>>(values.begin(), values.end())) {}

std::optional<double> MonthlySeries::at(MonthKey m) const {
  if (!covers(m)) return std::nullopt;
  return values_[static_cast<std::size_t>(m - start_)];
}

bool MonthlySeries::complete() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); });
}

std::size_t MonthlySeries::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); }));
}

std::optional<MonthKey> MonthlySeries::last_observed() const {
  for (std::size_t i = values_.size(); i-- > 0;) {
    if (values_[i]) return start_ + static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<double> MonthlySeries::dense() const {
  std::vector<double> out;
  out.reserve(values_.size());
  for (const auto& v : values_) {
    if (!v) throw Error(ErrorCode::AllMissing, "series '" + name_ + "' has missing values");
    out.push_back(*v);
  }
  return out;
}

MonthlySeries MonthlySeries::slice(MonthKey from, MonthKey to) const {
  if (from > to || !covers(from) || !covers(to)) {
    throw Error(ErrorCode::OutOfRange, "slice " + from.to_string() + ".." + to.to_string() +
                                           " outside span of '" + name_ + "'");
  }
  const auto first = values_.begin() + (from - start_);
  const auto last = values_.begin() + (to - start_) + 1;
  return MonthlySeries(name_, from, std::vector<std::optional<double>>(first, last));
}

MonthlySeries MonthlySeries::renamed(std::string name) const {
  MonthlySeries copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

std::pair<MonthlySeries, MonthlySeries> split(const MonthlySeries& series, const SplitSpec& spec) {
  if (spec.train_end >= spec.validation_end) {
    throw Error(ErrorCode::OutOfRange, "train_end must precede validation_end");
  }
  if (!series.covers(spec.train_end) || !series.covers(spec.validation_end)) {
    throw Error(ErrorCode::OutOfRange, "split boundaries " + spec.train_end.to_string() + "/" +
                                           spec.validation_end.to_string() +
                                           " outside span of '" + series.name() + "'");
  }
  return {series.slice(series.start(), spec.train_end),
          series.slice(spec.train_end + 1, spec.validation_end)};
}

}  // namespace rise
