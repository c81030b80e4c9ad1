#pragma once

#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace facepsy {

// Error categories map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (exit 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad command line or configuration (exit 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Internal invariant breach (exit 4).
class InvariantError : public Error {
 public:
  using Error::Error;
};

#define FACEPSY_ENSURE(cond, msg)                                        \
  do {                                                                   \
    if (!(cond)) throw ::facepsy::InvariantError(std::string(msg));      \
  } while (0)

// Numeric matrices mark missing cells with quiet NaN. Parsed records use
// std::optional instead; NaN never appears in a FrameRecord.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// A local calendar date, stored as days since 1970-01-01.
class LocalDate {
 public:
  constexpr LocalDate() = default;
  constexpr explicit LocalDate(std::int32_t days) : days_(days) {}

  static LocalDate from_ymd(int y, unsigned m, unsigned d);
  // Accepts YYYY-MM-DD; throws DataError otherwise.
  static LocalDate parse(std::string_view iso);
  // Date containing the given local-clock millisecond instant.
  static LocalDate from_local_ms(std::int64_t local_ms);

  constexpr std::int32_t days() const { return days_; }
  std::string to_string() const;

  constexpr LocalDate operator+(int n) const { return LocalDate(days_ + n); }
  constexpr int operator-(LocalDate o) const { return days_ - o.days_; }
  constexpr auto operator<=>(const LocalDate&) const = default;

 private:
  std::int32_t days_ = 0;
};

inline constexpr std::int64_t kMsPerDay = 86'400'000;

// Shortest round-trip decimal form of a double; NaN prints as "".
std::string format_double(double v);
// Parses the whole string as a double; throws DataError otherwise.
double parse_double(std::string_view s);

// Milliseconds since local midnight for a local-clock instant.
inline std::int64_t ms_of_day(std::int64_t local_ms) {
  std::int64_t r = local_ms % kMsPerDay;
  return r < 0 ? r + kMsPerDay : r;
}

}  // namespace facepsy
