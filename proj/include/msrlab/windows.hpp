#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "msrlab/csv.hpp"
#include "msrlab/error.hpp"

namespace msrlab::windows {

enum class Unit { months, weeks };

struct LengthSpec {
  Unit unit = Unit::months;
  double amount = 3;

  static LengthSpec months(double n) { return {Unit::months, n}; }
  static LengthSpec weeks(double n) { return {Unit::weeks, n}; }
  bool operator==(const LengthSpec&) const = default;
};

inline std::string to_string(const LengthSpec& l) {
  return csv::format_double(l.amount) + (l.unit == Unit::months ? " months" : " weeks");
}

struct TimeWindow {
  std::int64_t index = 0;
  std::int64_t start = 0;  // inclusive, UTC seconds
  std::int64_t end = 0;    // exclusive
  LengthSpec length;
  bool partial = false;    // clipped at the range end

  bool contains(std::int64_t t) const noexcept { return t >= start && t < end; }
};

inline constexpr std::int64_t kDay = 86400;

namespace detail {

using namespace std::chrono;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Adds whole calendar months with day clamping, keeping the time of day.
inline std::int64_t add_whole_months(std::int64_t t, std::int64_t n) {
  std::int64_t day_index = floor_div(t, kDay);
  std::int64_t tod = t - day_index * kDay;
  year_month_day ymd{sys_days{days{day_index}}};
  auto ym = year_month{ymd.year(), ymd.month()} + months{n};
  auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
  auto d = std::min(ymd.day(), last);
  sys_days out{year_month_day{ym.year(), ym.month(), d}};
  return static_cast<std::int64_t>(out.time_since_epoch().count()) * kDay + tod;
}

inline unsigned days_in_month(std::int64_t t) {
  year_month_day ymd{sys_days{days{floor_div(t, kDay)}}};
  return static_cast<unsigned>(year_month_day_last{ymd.year(), month_day_last{ymd.month()}}.day());
}

}  // namespace detail

// t advanced by a possibly fractional number of calendar months: whole months
// first (day clamped), then floor(fraction * days of the landing month) days.
inline std::int64_t add_months(std::int64_t t, double amount) {
  double whole = std::floor(amount);
  double frac = amount - whole;
  std::int64_t r = detail::add_whole_months(t, static_cast<std::int64_t>(whole));
  if (frac > 0) r += static_cast<std::int64_t>(std::floor(frac * detail::days_in_month(r))) * kDay;
  return r;
}

inline std::int64_t advance(std::int64_t origin, Unit unit, double amount) {
  if (unit == Unit::months) return add_months(origin, amount);
  return origin + static_cast<std::int64_t>(std::llround(amount * 7 * kDay));
}

// Windows of `length` starting at start + k*step (step defaults to length),
// every offset measured from `start` so fractional steps do not drift.
inline std::vector<TimeWindow> split_windows(std::int64_t start, std::int64_t end, const LengthSpec& length,
                                             std::optional<double> overlap_step = std::nullopt) {
  if (end <= start) throw InvalidArgumentError("window range end must be after start");
  if (!(length.amount > 0)) throw InvalidArgumentError("window length must be positive");
  double step = overlap_step.value_or(length.amount);
  if (!(step > 0) || step > length.amount)
    throw InvalidArgumentError("overlap step must be positive and at most the window length");
  std::vector<TimeWindow> out;
  for (std::int64_t k = 0;; ++k) {
    std::int64_t s = advance(start, length.unit, step * static_cast<double>(k));
    if (s >= end) break;
    std::int64_t e = advance(start, length.unit, step * static_cast<double>(k) + length.amount);
    TimeWindow w{k, s, e, length, false};
    if (e > end) {
      w.end = end;
      w.partial = true;
    }
    out.push_back(w);
  }
  return out;
}

// Indices of every window whose half-open range holds t.
inline std::vector<std::int64_t> assign(std::int64_t t, const std::vector<TimeWindow>& windows) {
  std::vector<std::int64_t> out;
  for (const auto& w : windows)
    if (w.contains(t)) out.push_back(w.index);
  return out;
}

inline std::string iso8601(std::int64_t t) {
  using namespace std::chrono;
  std::int64_t day_index = detail::floor_div(t, kDay);
  std::int64_t tod = t - day_index * kDay;
  year_month_day ymd{sys_days{days{day_index}}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(tod / 3600),
                static_cast<int>((tod / 60) % 60), static_cast<int>(tod % 60));
  return buf;
}

// Seconds since the epoch for a UTC calendar date.
inline std::int64_t utc(int year, unsigned month, unsigned day, int hour = 0, int minute = 0, int second = 0) {
  using namespace std::chrono;
  sys_days d{year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}};
  return static_cast<std::int64_t>(d.time_since_epoch().count()) * kDay + hour * 3600 + minute * 60 + second;
}

inline std::string windows_csv(const std::vector<TimeWindow>& ws) {
  csv::Writer w({"index", "start_iso8601", "end_iso8601"});
  for (const auto& win : ws) w.row({std::to_string(win.index), iso8601(win.start), iso8601(win.end)});
  return w.str();
}

}  // namespace msrlab::windows
