// SPDX-License-Identifier: Apache-2.0
#include "labelcost/money.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "labelcost/errors.hpp"

namespace labelcost {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kInfeasiblePlan: return "infeasible-plan";
    case ErrorKind::kUnsupportedStrategy: return "unsupported-strategy";
    case ErrorKind::kPromptTooLong: return "prompt-too-long";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kMalformedResponse: return "malformed-response";
    case ErrorKind::kUnmappableLabel: return "unmappable-label";
    case ErrorKind::kSimulationImpossible: return "simulation-impossible";
    case ErrorKind::kBudgetExhausted: return "budget-exhausted";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kDivergence: return "divergence";
  }
  return "unknown";
}

Money Money::from_dollars(double dollars) {
  if (!std::isfinite(dollars)) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite dollar amount");
  }
  return Money(std::llround(dollars * 1e6));
}

Money Money::parse(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorKind::kParse, "invalid dollar amount '" + std::string(text) + "'");
  };
  std::size_t pos = 0;
  bool negative = false;
  if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) {
    negative = text[pos] == '-';
    ++pos;
  }
  std::int64_t whole = 0;
  std::size_t whole_digits = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
    if (whole > (std::numeric_limits<std::int64_t>::max() / 10 - 9) / 1000000) throw fail();
    whole = whole * 10 + (text[pos] - '0');
    ++pos;
    ++whole_digits;
  }
  std::int64_t frac = 0;
  std::size_t frac_digits = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (++frac_digits > 6) throw fail();
      frac = frac * 10 + (text[pos] - '0');
      ++pos;
    }
  }
  if (pos != text.size() || (whole_digits == 0 && frac_digits == 0)) throw fail();
  for (std::size_t i = frac_digits; i < 6; ++i) frac *= 10;
  const std::int64_t micros = whole * 1000000 + frac;
  return Money(negative ? -micros : micros);
}

Money Money::scaled_floor(double fraction) const {
  return Money(static_cast<std::int64_t>(
      std::floor(static_cast<double>(micros_) * fraction + 1e-9)));
}

std::string format_fixed(Money amount, int fractional_digits) {
  std::int64_t m = amount.micros();
  const bool negative = m < 0;
  if (negative) m = -m;
  std::string whole = std::to_string(m / 1000000);
  std::string frac = std::to_string(m % 1000000);
  frac.insert(0, 6 - frac.size(), '0');
  if (fractional_digits < 6) {
    // Half-up on the dropped digits.
    std::int64_t unit = 1;
    for (int i = fractional_digits; i < 6; ++i) unit *= 10;
    std::int64_t rounded = (m + unit / 2) / unit * unit;
    whole = std::to_string(rounded / 1000000);
    frac = std::to_string(rounded % 1000000);
    frac.insert(0, 6 - frac.size(), '0');
    frac.resize(static_cast<std::size_t>(fractional_digits));
  }
  std::string out = negative ? "-" : "";
  out += whole;
  if (!frac.empty()) out += "." + frac;
  return out;
}

std::string format_sig2(Money amount) {
  std::int64_t m = amount.micros();
  if (m == 0) return "0";
  std::string sign = m < 0 ? "-" : "";
  if (m < 0) m = -m;

  int digits = static_cast<int>(std::to_string(m).size());
  std::int64_t leading = m;
  if (digits > 2) {
    std::int64_t unit = 1;
    for (int i = 0; i < digits - 2; ++i) unit *= 10;
    leading = m / unit;
    if ((m % unit) * 2 >= unit) ++leading;
    if (leading == 100) {
      leading = 10;
      ++digits;
    }
  } else if (digits == 1) {
    leading *= 10;
  }
  // leading is a two-digit integer d1d2; the value is d1.d2 x 10^exponent.
  const int exponent = digits - 1 - 6;
  const char d1 = static_cast<char>('0' + leading / 10);
  const char d2 = static_cast<char>('0' + leading % 10);
  if (exponent <= -2) {
    return sign + d1 + "." + d2 + "e-" + std::to_string(-exponent);
  }
  if (exponent == -1) return sign + "0." + d1 + d2;
  if (exponent == 0) return sign + d1 + "." + d2;
  std::string out = sign + d1 + d2;
  out.append(static_cast<std::size_t>(exponent - 1), '0');
  return out;
}

}  // namespace labelcost
