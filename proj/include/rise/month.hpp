#pragma once

#include <compare>
#include <string>

namespace rise {

/// Calendar month stored as a single integer (year * 12 + month - 1) so that
/// arithmetic never has to reason about year boundaries.
class MonthKey {
 public:
  constexpr MonthKey() = default;
  constexpr MonthKey(int year, int month) : index_(year * 12 + (month - 1)) {}

  static constexpr MonthKey from_index(int index) {
    MonthKey key;
    key.index_ = index;
    return key;
  }

  /// Parses "YYYY-MM" or "YYYYMM". Throws rise::Error(SchemaError) otherwise.
  static MonthKey parse(const std::string& text);

  constexpr int index() const { return index_; }
  constexpr int year() const { return floor_div(index_, 12); }
  constexpr int month() const { return index_ - floor_div(index_, 12) * 12 + 1; }

  constexpr MonthKey operator+(int months) const { return from_index(index_ + months); }
  constexpr MonthKey operator-(int months) const { return from_index(index_ - months); }
  constexpr int operator-(MonthKey other) const { return index_ - other.index_; }
  constexpr MonthKey& operator++() {
    ++index_;
    return *this;
  }

  constexpr auto operator<=>(const MonthKey&) const = default;

  /// "YYYY-MM"
  std::string to_string() const;

 private:
  static constexpr int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

  int index_ = 0;
};

}  // namespace rise
