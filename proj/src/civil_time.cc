#include "delayprof/civil_time.h"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace delayprof {

namespace {

int parse_digits(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) {
    throw std::invalid_argument("timestamp too short");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') {
      throw std::invalid_argument("non-digit in timestamp");
    }
    value = value * 10 + (s[i] - '0');
  }
  return value;
}

void expect_char(std::string_view s, std::size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c) {
    throw std::invalid_argument("unexpected separator in timestamp");
  }
}

}  // namespace

civil_time civil_time::from_fields(int year, unsigned month, unsigned day,
                                   int hour, int minute, int second) {
  using namespace std::chrono;
  auto const ymd = std::chrono::year{year} / std::chrono::month{month} /
                   std::chrono::day{day};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date");
  }
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 ||
      second > 59) {
    throw std::invalid_argument("invalid time of day");
  }
  return civil_time{local_days{ymd} + hours{hour} + minutes{minute} +
                    seconds{second}};
}

civil_time civil_time::parse(std::string_view s) {
  if (s.size() != 19) {
    throw std::invalid_argument("timestamp must be YYYY-MM-DD HH:MM:SS");
  }
  auto const year = parse_digits(s, 0, 4);
  expect_char(s, 4, '-');
  auto const month = parse_digits(s, 5, 2);
  expect_char(s, 7, '-');
  auto const day = parse_digits(s, 8, 2);
  expect_char(s, 10, ' ');
  auto const hour = parse_digits(s, 11, 2);
  expect_char(s, 13, ':');
  auto const minute = parse_digits(s, 14, 2);
  expect_char(s, 16, ':');
  auto const second = parse_digits(s, 17, 2);
  return from_fields(year, static_cast<unsigned>(month),
                     static_cast<unsigned>(day), hour, minute, second);
}

std::string civil_time::to_string() const {
  auto const ymd = date();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), hour(), minute(), second());
  return buf;
}

std::chrono::year_month_day civil_time::date() const {
  return std::chrono::year_month_day{
      std::chrono::floor<std::chrono::days>(tp_)};
}

std::chrono::weekday civil_time::weekday() const {
  return std::chrono::weekday{std::chrono::floor<std::chrono::days>(tp_)};
}

bool civil_time::is_weekday() const {
  auto const wd = weekday().c_encoding();  // 0 = Sunday
  return wd >= 1 && wd <= 5;
}

int civil_time::time_of_day() const {
  auto const midnight = std::chrono::floor<std::chrono::days>(tp_);
  return static_cast<int>((tp_ - midnight).count());
}

int civil_time::hour() const { return time_of_day() / 3600; }
int civil_time::minute() const { return (time_of_day() / 60) % 60; }
int civil_time::second() const { return time_of_day() % 60; }

}  // namespace delayprof
