#include "facepsy/common.hpp"

#include <charconv>
#include <cstdio>

namespace facepsy {

namespace chr = std::chrono;

LocalDate LocalDate::from_ymd(int y, unsigned m, unsigned d) {
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw DataError("invalid calendar date");
  return LocalDate(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

LocalDate LocalDate::parse(std::string_view iso) {
  auto bad = [&] { return DataError("invalid date '" + std::string(iso) + "', expected YYYY-MM-DD"); };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
    if (ec != std::errc() || p != iso.data() + pos + len) throw bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw bad();
  return LocalDate(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

LocalDate LocalDate::from_local_ms(std::int64_t local_ms) {
  std::int64_t d = local_ms / kMsPerDay;
  if (local_ms % kMsPerDay < 0) --d;
  return LocalDate(static_cast<std::int32_t>(d));
}

std::string LocalDate::to_string() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InvariantError("format_double failed");
  return std::string(buf, p);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace facepsy
