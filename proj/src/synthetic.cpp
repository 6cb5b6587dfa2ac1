#include "rise/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "rise/config.hpp"
#include "rise/csv.hpp"
#include "rise/error.hpp"
#include "rise/rng.hpp"

namespace rise::synthetic {
namespace {

DestinationProfile profile(std::string name, std::string region, int policy, int distance, int recovery, double r,
                           std::vector<std::string> keywords, bool has_flights = true) {
  DestinationProfile p;
  p.scores.destination = name;
  p.scores.policy = policy;
  p.scores.distance = distance;
  p.scores.recovery = recovery;
  p.scores.r = r;
  p.name = std::move(name);
  p.region = std::move(region);
  p.keywords = std::move(keywords);
  p.has_flights = has_flights;
  return p;
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  return out;
}

void write_long(std::ostream& out, const std::vector<std::string>& keys, const MonthlySeries& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const MonthKey m = series.start() + static_cast<int>(i);
    auto row = keys;
    row.push_back(std::to_string(m.year()));
    row.push_back(std::to_string(m.month()));
    row.push_back(csv::format_optional(series[i]));
    csv::write_row(out, row);
  }
}

}  // namespace

std::string_view shape_name(RecoveryShape shape) {
  switch (shape) {
    case RecoveryShape::Linear: return "linear";
    case RecoveryShape::Quadratic: return "quadratic";
    case RecoveryShape::Logistic: return "logistic";
  }
  return "unknown";
}

std::optional<RecoveryShape> parse_shape(std::string_view name) {
  for (auto s : {RecoveryShape::Linear, RecoveryShape::Quadratic, RecoveryShape::Logistic}) {
    if (shape_name(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<DestinationProfile> default_destinations() {
  return {
      profile("Canada", "America", 3, 1, 2, 0.65, {"Canada travel", "Canada visa", "Air Canada", "Vancouver"}),
      profile("Chile", "America", 3, 1, 3, 0.7, {"Chile travel", "Chile visa", "Santiago"}, false),
      profile("Mexico", "America", 5, 1, 5, 1.0, {"Mexico travel", "Mexico visa"}, false),
      profile("USA", "America", 2, 1, 3, 0.65,
              {"USA travel", "USA travel guide", "USA airlines", "USA visa", "Los Angeles", "San Francisco"}),
      profile("Chinese Taipei", "East Asia", 1, 5, 1, 0.6,
              {"Chinese Taipei travel", "Chinese Taipei travel guide", "Chinese Taipei hotel", "Chinese Taipei visa",
               "Chinese Taipei cuisine", "Chinese Taipei snacks", "Chinese Taipei shopping"}),
      profile("Hong Kong, China", "East Asia", 5, 5, 3, 0.85,
              {"Hong Kong travel guide", "Hong Kong airlines", "Hong Kong hotel", "Hong Kong visa", "Hong Kong cuisine",
               "Hong Kong snacks", "Hong Kong shopping", "Hong Kong travel map", "Hong Kong tourist attractions",
               "Hong Kong and Macao travel permit"}),
      profile("Macao, China", "East Asia", 5, 5, 3, 0.85,
              {"Macao travel", "Macao travel guide", "Macao airlines", "Macao hotel", "Macao cuisine",
               "Hong Kong and Macao travel permit"}),
      profile("Korea (ROK)", "East Asia", 4, 5, 2, 0.8,
              {"Korea travel", "Korea travel guide", "Korea hotel", "Korea visa", "Korea cuisine", "Korea shopping",
               "Korea tourist attractions", "Seoul", "Jeju Island"}),
      profile("Japan", "East Asia", 4, 5, 2, 0.8,
              {"Japan travel", "Japan travel guide", "Japan airlines", "Japan visa", "Japanese cuisine",
               "Japan shopping", "Japan travel map", "Japan tourist attractions", "Osaka", "Nagoya"}),
      profile("Thailand", "Southeast Asia", 5, 3, 4, 0.8,
              {"Thailand travel", "Thailand airlines", "Thailand hotel", "Thailand visa", "Bangkok", "Chiang Mai",
               "Koh Samui", "Phuket"}),
      profile("Cambodia", "Southeast Asia", 5, 3, 3, 0.8, {"Cambodia travel", "Cambodia visa", "Angkor Wat"}),
      profile("Indonesia", "Southeast Asia", 4, 3, 4, 0.8, {"Indonesia travel", "Indonesia visa", "Bali"}),
      profile("Singapore", "Southeast Asia", 4, 3, 3, 0.8,
              {"Singapore travel", "Singapore travel guide", "Singapore airlines", "Singapore visa"}),
      profile("Maldives", "Southeast Asia", 4, 3, 5, 0.8, {"Maldives travel", "Maldives travel guide", "Maldives visa"}),
      profile("New Zealand", "Pacific", 3, 1, 3, 0.7,
              {"New Zealand travel", "New Zealand travel guide", "New Zealand airlines", "New Zealand visa"}),
      profile("Australia", "Pacific", 4, 2, 3, 0.75, {"Australia travel guide", "Australia visa", "Sydney", "Melbourne"}),
      profile("Hawaii", "Pacific", 3, 2, 4, 0.75, {"Hawaii travel", "Hawaii travel guide"}, false),
      profile("Turkey", "West Asia", 4, 2, 3, 0.75,
              {"Turkey travel", "Turkey travel guide", "Turkish airlines", "Turkey hotel", "Turkey visa"}),
      profile("Austria", "Europe", 2, 2, 2, 0.65, {"Austria travel", "Austrian airlines", "Austria visa"}),
      profile("Czech Republic", "Europe", 2, 2, 2, 0.65, {"Czech Republic travel", "Czech Republic visa"}, false),
  };
}

std::vector<Region> regions_of(const std::vector<DestinationProfile>& destinations) {
  std::vector<Region> out;
  for (const auto& d : destinations) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Region& r) { return r.name == d.region; });
    if (it == out.end()) {
      out.push_back(Region{d.region, {}});
      it = out.end() - 1;
    }
    it->destinations.push_back(d.name);
  }
  return out;
}

double recovery_fraction(RecoveryShape shape, int step, int span, double initial, double terminal) {
  if (step >= span) return terminal;
  const double u = std::max(0.0, static_cast<double>(step) / static_cast<double>(span));
  double progress = u;
  switch (shape) {
    case RecoveryShape::Linear:
      break;
    case RecoveryShape::Quadratic:
      progress = 1.0 - (1.0 - u) * (1.0 - u);
      break;
    case RecoveryShape::Logistic: {
      auto s = [](double x) { return 1.0 / (1.0 + std::exp(-10.0 * (x - 0.4))); };
      progress = (s(u) - s(0.0)) / (s(1.0) - s(0.0));
      break;
    }
  }
  return initial + (terminal - initial) * progress;
}

SyntheticData generate(const SyntheticSpec& spec) {
  const MonthKey start = spec.history_start();
  if (!(start < spec.break_month && spec.break_month < spec.recovery_start &&
        spec.recovery_start < spec.terminal_month && spec.observed_end <= spec.signal_end &&
        spec.signal_end < spec.data_end && spec.terminal_month <= spec.data_end)) {
    throw Error(ErrorCode::ConfigError, "synthetic timeline is out of order");
  }
  const int months = (spec.data_end - start) + 1;
  const int span = spec.terminal_month - spec.recovery_start;
  SyntheticData data;
  for (const auto& dest : spec.destinations) {
    auto rng = Rng::substream(spec.seed, "synthetic/" + dest.name);
    const double level = std::exp(rng.uniform(std::log(20000.0), std::log(400000.0)));
    const double growth = rng.uniform(0.03, 0.10);
    const double a1 = rng.uniform(0.10, 0.30);
    const double phase1 = rng.uniform(0.0, 12.0);
    const double a2 = rng.uniform(0.0, 0.12);
    const double phase2 = rng.uniform(0.0, 12.0);
    const double initial_fraction = rng.uniform(0.10, 0.20);

    std::vector<double> mean(static_cast<std::size_t>(months));
    std::vector<double> fraction(static_cast<std::size_t>(months));
    std::vector<double> actual(static_cast<std::size_t>(months));
    for (int t = 0; t < months; ++t) {
      const MonthKey m = start + t;
      const double mo = static_cast<double>(m.month());
      const double season = spec.seasonal_amplitude *
                            (a1 * std::cos(2.0 * std::numbers::pi * (mo - phase1) / 12.0) +
                             a2 * std::cos(4.0 * std::numbers::pi * (mo - phase2) / 12.0));
      const auto i = static_cast<std::size_t>(t);
      mean[i] = level * std::pow(1.0 + growth, t / 12.0) * std::exp(season);
      if (m < spec.break_month) {
        fraction[i] = 1.0;
      } else if (m == spec.break_month) {
        fraction[i] = 0.4;
      } else if (m < spec.recovery_start) {
        fraction[i] = spec.collapse * std::exp(0.3 * rng.normal());
      } else {
        fraction[i] = recovery_fraction(spec.shape, m - spec.recovery_start,
                                        span, initial_fraction, spec.suppression);
      }
      actual[i] = std::round(mean[i] * fraction[i] * std::exp(spec.noise * rng.normal()));
    }

    std::set<int> missing;
    const int lo = (spec.break_month + 2) - start;
    const int hi = (spec.recovery_start - 2) - start;
    while (hi > lo && static_cast<int>(missing.size()) < std::min(spec.missing_months, hi - lo + 1)) {
      missing.insert(lo + static_cast<int>(rng.uniform() * (hi - lo + 1)));
    }
    std::vector<std::optional<double>> observed;
    for (int t = 0; t <= spec.observed_end - start; ++t) {
      observed.push_back(missing.count(t) ? std::nullopt : std::optional<double>(actual[static_cast<std::size_t>(t)]));
    }
    data.arrivals.emplace(dest.name, MonthlySeries(dest.name, start, std::move(observed)));
    data.actuals.emplace(dest.name, MonthlySeries(dest.name, start, actual));
    data.counterfactual.emplace(dest.name, MonthlySeries(dest.name, start, mean));
    data.fraction.emplace(dest.name, fraction);

    const int signal_months = (spec.signal_end - start) + 1;
    auto& keywords = data.keywords[dest.name];
    for (std::size_t k = 0; k < dest.keywords.size(); ++k) {
      auto krng = Rng::substream(spec.seed, "synthetic/" + dest.name + "/keyword/" + dest.keywords[k]);
      const double scale = krng.uniform(0.2, 2.0) * 1000.0 / level;
      const bool informative = k == 0 || krng.uniform() < 0.75;
      std::vector<double> volume(static_cast<std::size_t>(signal_months));
      double ar = 0.0;
      for (int t = 0; t < signal_months; ++t) {
        if (informative) {
          const double next = actual[static_cast<std::size_t>(t + 1)];
          volume[static_cast<std::size_t>(t)] = std::round(scale * next * std::exp(spec.keyword_noise * krng.normal()));
        } else {
          ar = 0.8 * ar + 0.1 * krng.normal();
          volume[static_cast<std::size_t>(t)] = std::round(scale * level * 0.3 * std::exp(ar));
        }
      }
      keywords.push_back({dest.keywords[k], MonthlySeries(dest.name + "/" + dest.keywords[k], start, volume)});
    }

    if (spec.flights && dest.has_flights) {
      auto frng = Rng::substream(spec.seed, "synthetic/" + dest.name + "/flights");
      const double seats = frng.uniform(150.0, 250.0);
      std::vector<double> flights(static_cast<std::size_t>(signal_months));
      for (int t = 0; t < signal_months; ++t) {
        flights[static_cast<std::size_t>(t)] =
            std::round(actual[static_cast<std::size_t>(t)] / seats * std::exp(0.03 * frng.normal()));
      }
      data.flights.emplace(dest.name, MonthlySeries(dest.name, start, flights));
    }
  }
  return data;
}

void write_scores(const std::filesystem::path& path, const std::vector<DestinationProfile>& destinations,
                  std::optional<double> r) {
  auto out = open(path);
  csv::write_row(out, {"destination", "policy", "distance", "recovery", "average", "r"});
  for (const auto& d : destinations) {
    const auto& s = d.scores;
    const auto value = r ? r : s.r;
    csv::write_row(out, {d.name, std::to_string(s.policy), std::to_string(s.distance), std::to_string(s.recovery),
                         csv::format_number(std::round(s.average() * 10.0) / 10.0), csv::format_optional(value)});
  }
}

std::vector<std::filesystem::path> write_dataset(const SyntheticData& data, const SyntheticSpec& spec,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;

  {
    auto out = open(dir / "arrivals.csv");
    csv::write_row(out, {"destination", "year", "month", "arrivals"});
    for (const auto& [name, series] : data.arrivals) write_long(out, {name}, series);
    files.push_back(dir / "arrivals.csv");
  }
  {
    auto out = open(dir / "actuals.csv");
    csv::write_row(out, {"destination", "year", "month", "arrivals"});
    for (const auto& [name, series] : data.actuals) write_long(out, {name}, series);
    files.push_back(dir / "actuals.csv");
  }
  {
    auto out = open(dir / "keywords.csv");
    csv::write_row(out, {"destination", "keyword", "year", "month", "volume"});
    for (const auto& [name, list] : data.keywords) {
      for (const auto& kw : list) write_long(out, {name, kw.keyword}, kw.series);
    }
    files.push_back(dir / "keywords.csv");
  }
  if (!data.flights.empty()) {
    auto out = open(dir / "flights.csv");
    csv::write_row(out, {"destination", "year", "month", "flights"});
    for (const auto& [name, series] : data.flights) write_long(out, {name}, series);
    files.push_back(dir / "flights.csv");
  }
  write_scores(dir / "scores.csv", spec.destinations);
  files.push_back(dir / "scores.csv");
  {
    auto out = open(dir / "truth.csv");
    csv::write_row(out, {"destination", "year", "month", "counterfactual", "fraction", "arrivals"});
    for (const auto& [name, cf] : data.counterfactual) {
      const auto& frac = data.fraction.at(name);
      const auto& act = data.actuals.at(name);
      for (std::size_t i = 0; i < cf.size(); ++i) {
        const MonthKey m = cf.start() + static_cast<int>(i);
        csv::write_row(out, {name, std::to_string(m.year()), std::to_string(m.month()), csv::format_optional(cf[i]),
                             csv::format_number(frac[i]), csv::format_optional(act[i])});
      }
    }
    files.push_back(dir / "truth.csv");
  }
  {
    auto text = default_config_text(spec.seed, regions_of(spec.destinations));
    if (data.flights.empty()) {
      const std::string line = "  flights: flights.csv\n";
      text.erase(text.find(line), line.size());
    }
    auto out = open(dir / "config.yaml");
    out << text;
    files.push_back(dir / "config.yaml");
  }
  return files;
}

}  // namespace rise::synthetic
