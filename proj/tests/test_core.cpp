#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "rise/csv.hpp"
#include "rise/error.hpp"
#include "rise/impute.hpp"
#include "rise/io.hpp"
#include "rise/month.hpp"
#include "rise/rng.hpp"
#include "rise/series.hpp"

namespace rise {
namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "rise_test_core";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Month, ArithmeticCrossesYearBoundaries) {
  const MonthKey dec(2019, 12);
  EXPECT_EQ((dec + 1).year(), 2020);
  EXPECT_EQ((dec + 1).month(), 1);
  EXPECT_EQ(MonthKey(2024, 7) - MonthKey(2023, 6), 13);
  EXPECT_EQ((MonthKey(2020, 1) - 13).to_string(), "2018-12");
  EXPECT_LT(MonthKey(2023, 1), MonthKey(2023, 2));
}

TEST(Month, ParsesBothFormats) {
  EXPECT_EQ(MonthKey::parse("2023-06"), MonthKey(2023, 6));
  EXPECT_EQ(MonthKey::parse("202306"), MonthKey(2023, 6));
  expect_code(ErrorCode::SchemaError, [] { MonthKey::parse("2023-13"); });
  expect_code(ErrorCode::SchemaError, [] { MonthKey::parse("June"); });
}

TEST(Series, RejectsNegativeValues) {
  expect_code(ErrorCode::SchemaError, [] { MonthlySeries("x", MonthKey(2020, 1), std::vector<double>{1.0, -1.0}); });
}

TEST(Series, SliceAndSplit) {
  std::vector<double> v(36);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const MonthlySeries s("x", MonthKey(2017, 1), v);
  const auto [train, valid] = split(s, SplitSpec{MonthKey(2017, 12), MonthKey(2019, 12)});
  EXPECT_EQ(train.size(), 12u);
  EXPECT_EQ(valid.size(), 24u);
  EXPECT_EQ(*valid[0], 12.0);
  expect_code(ErrorCode::OutOfRange, [&] { s.slice(MonthKey(2016, 12), MonthKey(2017, 3)); });
}

TEST(Series, DenseThrowsOnGaps) {
  const MonthlySeries s("x", MonthKey(2020, 1), std::vector<std::optional<double>>{1.0, std::nullopt, 3.0});
  EXPECT_FALSE(s.complete());
  EXPECT_EQ(s.present_count(), 2u);
  expect_code(ErrorCode::AllMissing, [&] { s.dense(); });
}

TEST(Csv, QuotedFieldsRoundTrip) {
  std::ostringstream out;
  csv::write_row(out, {"Hong Kong, China", "say \"hi\"", "3"});
  const auto table = csv::parse("a,b,c\n" + out.str());
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0][0], "Hong Kong, China");
  EXPECT_EQ(table.rows[0][1], "say \"hi\"");
}

TEST(Csv, NumbersRoundTripExactly) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::exp(rng.uniform(-20.0, 20.0));
    EXPECT_EQ(csv::parse_number(csv::format_number(v), 1, "v"), v);
  }
  EXPECT_EQ(csv::format_number(-0.0), "0");
}

TEST(Io, LoadsLongFormatWithGaps) {
  const auto path = temp_file("arrivals.csv",
                              "destination,year,month,arrivals\n"
                              "Canada,2019,1,100\nCanada,2019,2,\nCanada,2019,4,130\n"
                              "\"Hong Kong, China\",2019,1,5\n");
  const auto data = load_arrivals(path);
  ASSERT_EQ(data.size(), 2u);
  const auto& canada = data.at("Canada");
  EXPECT_EQ(canada.size(), 4u);
  EXPECT_FALSE(canada.at(MonthKey(2019, 2)).has_value());
  EXPECT_FALSE(canada.at(MonthKey(2019, 3)).has_value());
  EXPECT_EQ(*canada.at(MonthKey(2019, 4)), 130.0);
  EXPECT_TRUE(data.count("Hong Kong, China"));
}

TEST(Io, SchemaErrorsCarryLineNumbers) {
  const auto bad = temp_file("bad.csv", "destination,year,month,arrivals\nCanada,2019,1,abc\n");
  try {
    load_arrivals(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  const auto dup = temp_file("dup.csv", "destination,year,month,arrivals\nCanada,2019,1,1\nCanada,2019,1,2\n");
  expect_code(ErrorCode::DuplicateObservation, [&] { load_arrivals(dup); });
  const auto missing = temp_file("missing.csv", "destination,year,arrivals\nCanada,2019,1\n");
  expect_code(ErrorCode::SchemaError, [&] { load_arrivals(missing); });
}

TEST(Io, WriteMarksImputedMonths) {
  const std::map<std::string, MonthlySeries> observed{
      {"A", MonthlySeries("A", MonthKey(2020, 1), std::vector<std::optional<double>>{1.0, std::nullopt, 3.0})}};
  const std::map<std::string, MonthlySeries> filled{{"A", MonthlySeries("A", MonthKey(2020, 1), std::vector<double>{1, 2, 3})}};
  std::ostringstream out;
  write_arrivals(out, filled, &observed);
  EXPECT_NE(out.str().find("A,2020,2,2,imputed"), std::string::npos);
  EXPECT_NE(out.str().find("A,2020,1,1,actual"), std::string::npos);
}

// Smoothed states of the local linear trend model are the minimizer of the
// stacked least-squares problem over all states, including the prior on the
// first state. Solved densely here.
std::vector<double> batch_smoother(const MonthlySeries& s, const LocalTrendVariances& v, double kappa,
                                   double first_value) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const Eigen::Index k = 2 * n;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  auto add = [&](const Eigen::VectorXd& row, double target, double var) {
    A += row * row.transpose() / var;
    b += row * target / var;
  };
  for (Eigen::Index d = 0; d < 2; ++d) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k);
    row[d] = 1.0;
    add(row, d == 0 ? first_value : 0.0, kappa);
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    if (const auto& y = s[static_cast<std::size_t>(t)]) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(k);
      row[2 * t] = 1.0;
      add(row, *y, v.observation);
    }
    if (t + 1 < n) {
      Eigen::VectorXd level = Eigen::VectorXd::Zero(k);
      level[2 * (t + 1)] = 1.0;
      level[2 * t] = -1.0;
      level[2 * t + 1] = -1.0;
      add(level, 0.0, v.level);
      Eigen::VectorXd slope = Eigen::VectorXd::Zero(k);
      slope[2 * (t + 1) + 1] = 1.0;
      slope[2 * t + 1] = -1.0;
      add(slope, 0.0, v.slope);
    }
  }
  const Eigen::VectorXd x = A.ldlt().solve(b);
  std::vector<double> levels(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) levels[static_cast<std::size_t>(t)] = x[2 * t];
  return levels;
}

TEST(Impute, MatchesBatchLeastSquaresSmoother) {
  Rng rng(11);
  std::vector<std::optional<double>> values;
  double level = 100.0, slope = 1.0;
  for (int t = 0; t < 40; ++t) {
    slope += rng.normal(0.0, 0.2);
    level += slope + rng.normal(0.0, 1.0);
    values.push_back(level + rng.normal(0.0, 2.0));
  }
  for (int t : {5, 6, 17, 30, 31, 32}) values[static_cast<std::size_t>(t)].reset();
  const MonthlySeries s("x", MonthKey(2015, 1), values);
  const LocalTrendVariances v{4.0, 1.0, 0.04};
  const auto fast = smoothed_levels(s, v);
  double scale = 0.0;
  for (const auto& y : values) scale += y ? std::abs(*y) : 0.0;
  scale /= static_cast<double>(s.present_count());
  const auto oracle = batch_smoother(s, v, 1e7 * scale * scale, *values[0]);
  for (std::size_t t = 0; t < fast.size(); ++t) EXPECT_NEAR(fast[t], oracle[t], 1e-6 * scale) << t;
}

TEST(Impute, LeavesObservedValuesAndFillsLinearGap) {
  std::vector<std::optional<double>> values;
  for (int t = 0; t < 24; ++t) values.push_back(10.0 + 2.0 * t);
  values[10].reset();
  values[11].reset();
  const MonthlySeries s("x", MonthKey(2015, 1), values);
  const auto filled = impute(s);
  ASSERT_TRUE(filled.complete());
  EXPECT_EQ(*filled[9], 28.0);
  EXPECT_NEAR(*filled[10], 30.0, 1e-3);
  EXPECT_NEAR(*filled[11], 32.0, 1e-3);
}

TEST(Impute, NeedsTwoObservations) {
  const MonthlySeries s("x", MonthKey(2015, 1), std::vector<std::optional<double>>{std::nullopt, 1.0, std::nullopt});
  expect_code(ErrorCode::AllMissing, [&] { impute(s); });
}

TEST(Rng, SubstreamsAreStableAndIndependent) {
  auto a = Rng::substream(5, "nnar/Canada/final");
  auto b = Rng::substream(5, "nnar/Canada/final");
  auto c = Rng::substream(5, "nnar/Chile/final");
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
}

TEST(Properties, ArrivalsCsvRoundTrip) {
  Rng rng(21);
  std::map<std::string, MonthlySeries> data;
  for (const std::string name : {"Alpha", "Beta, Gamma", "Delta \"D\""}) {
    std::vector<std::optional<double>> v;
    for (int t = 0; t < 30; ++t) {
      if (t > 0 && t < 29 && rng.uniform() < 0.2) {
        v.emplace_back();
      } else {
        v.emplace_back(std::round(rng.uniform(0.0, 1e6)) + rng.uniform());
      }
    }
    data.emplace(name, MonthlySeries(name, MonthKey(2015, 3), v));
  }
  const auto path = std::filesystem::temp_directory_path() / "rise_roundtrip.csv";
  write_arrivals(path, data);
  const auto loaded = load_arrivals(path);
  std::filesystem::remove(path);
  ASSERT_EQ(loaded.size(), data.size());
  for (const auto& [name, series] : data) {
    const auto& back = loaded.at(name);
    EXPECT_EQ(back.start(), series.start());
    EXPECT_EQ(back.values(), series.values()) << name;
  }
}

TEST(Properties, ImputeIsIdempotent) {
  Rng rng(22);
  std::vector<std::optional<double>> v;
  for (int t = 0; t < 60; ++t) {
    if (t % 7 == 3 || (t > 30 && t < 36)) {
      v.emplace_back();
    } else {
      v.emplace_back(1000.0 + 10.0 * t + rng.normal(0.0, 50.0));
    }
  }
  const MonthlySeries s("x", MonthKey(2012, 1), v);
  const auto once = impute(s);
  EXPECT_TRUE(once.complete());
  EXPECT_EQ(impute(once), once);
}

TEST(Properties, SplitPreservesObservations) {
  Rng rng(23);
  std::vector<std::optional<double>> v;
  for (int t = 0; t < 96; ++t) v.emplace_back(rng.uniform(0.0, 1e5));
  const MonthlySeries s("x", MonthKey(2012, 1), v);
  const auto [train, validation] = split(s, {MonthKey(2017, 12), MonthKey(2019, 12)});
  ASSERT_EQ(train.size() + validation.size(), s.size());
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(train[i], s[i]);
  for (std::size_t i = 0; i < validation.size(); ++i) EXPECT_EQ(validation[i], s[train.size() + i]);
  EXPECT_EQ(validation.start(), MonthKey(2018, 1));
}

}  // namespace
}  // namespace rise
