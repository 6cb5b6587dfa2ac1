#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rise/month.hpp"

namespace rise {

/// Monthly observation vector indexed from `start`. Values may be missing;
/// present values are non-negative.
class MonthlySeries {
 public:
  MonthlySeries(std::string name, MonthKey start, std::vector<std::optional<double>> values);
  MonthlySeries(std::string name, MonthKey start, const std::vector<double>& values);

  const std::string& name() const { return name_; }
  MonthKey start() const { return start_; }
  /// Last month covered (inclusive).
  MonthKey end() const { return start_ + static_cast<int>(values_.size()) - 1; }
  std::size_t size() const { return values_.size(); }

  const std::vector<std::optional<double>>& values() const { return values_; }
  const std::optional<double>& operator[](std::size_t i) const { return values_[i]; }

  bool covers(MonthKey m) const { return m >= start_ && m <= end(); }
  /// Missing when the month is outside the span or not observed.
  std::optional<double> at(MonthKey m) const;

  bool complete() const;
  std::size_t present_count() const;
  /// Latest month with an observed value, if any.
  std::optional<MonthKey> last_observed() const;

  /// Dense copy of the values; throws AllMissing if any value is missing.
  std::vector<double> dense() const;

  /// Inclusive sub-range. Throws OutOfRange if the range leaves the span.
  MonthlySeries slice(MonthKey from, MonthKey to) const;

  MonthlySeries renamed(std::string name) const;

  bool operator==(const MonthlySeries&) const = default;

 private:
  std::string name_;
  MonthKey start_;
  std::vector<std::optional<double>> values_;
};

struct SplitSpec {
  MonthKey train_end;
  MonthKey validation_end;
};

/// Train covers start..train_end, validation covers train_end+1..validation_end.
std::pair<MonthlySeries, MonthlySeries> split(const MonthlySeries& series, const SplitSpec& spec);

}  // namespace rise
