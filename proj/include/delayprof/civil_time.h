#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace delayprof {

// Wall-clock instant as reported by the AVL feed. No timezone conversion is
// ever applied; the value is the local civil time stored as seconds.
struct civil_time {
  using duration = std::chrono::seconds;
  using time_point = std::chrono::local_seconds;

  civil_time() = default;
  explicit civil_time(time_point tp) : tp_{tp} {}

  static civil_time from_fields(int year, unsigned month, unsigned day,
                                int hour, int minute, int second);

  // "YYYY-MM-DD HH:MM:SS"; throws std::invalid_argument on anything else.
  static civil_time parse(std::string_view s);

  std::string to_string() const;

  time_point point() const { return tp_; }
  std::int64_t seconds_since_epoch() const {
    return tp_.time_since_epoch().count();
  }

  std::chrono::year_month_day date() const;
  std::chrono::weekday weekday() const;
  bool is_weekday() const;  // Monday to Friday

  int hour() const;
  int minute() const;
  int second() const;

  // seconds since local midnight
  int time_of_day() const;

  civil_time operator+(duration d) const { return civil_time{tp_ + d}; }
  duration operator-(civil_time const& o) const { return tp_ - o.tp_; }

  friend auto operator<=>(civil_time const&, civil_time const&) = default;
  friend bool operator==(civil_time const&, civil_time const&) = default;

private:
  time_point tp_{};
};

}  // namespace delayprof
