// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace labelcost {

/// Exact monetary amount in integer micro-dollars (1e-6 $).
///
/// All budget and cost arithmetic runs on this type; conversion to decimal
/// text happens only at report time.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_micros(std::int64_t micros) { return Money(micros); }
  /// Rounds to the nearest micro-dollar.
  static Money from_dollars(double dollars);
  /// Parses a decimal dollar string with at most 6 fractional digits.
  static Money parse(std::string_view text);

  constexpr std::int64_t micros() const { return micros_; }
  double dollars() const { return static_cast<double>(micros_) / 1e6; }

  constexpr Money operator+(Money o) const { return Money(micros_ + o.micros_); }
  constexpr Money operator-(Money o) const { return Money(micros_ - o.micros_); }
  constexpr Money& operator+=(Money o) { micros_ += o.micros_; return *this; }
  constexpr Money& operator-=(Money o) { micros_ -= o.micros_; return *this; }
  constexpr Money operator*(std::int64_t k) const { return Money(micros_ * k); }

  /// floor(amount * fraction), for budget splits.
  Money scaled_floor(double fraction) const;

  constexpr auto operator<=>(const Money&) const = default;

 private:
  constexpr explicit Money(std::int64_t micros) : micros_(micros) {}
  std::int64_t micros_ = 0;
};

/// Fixed-point rendering, e.g. "1.100000".
std::string format_fixed(Money amount, int fractional_digits = 6);

/// Two significant figures, half-up. Values below 0.1 use the mantissa form
/// "2.5e-3"; larger values render positionally ("0.11", "1.1", "28").
std::string format_sig2(Money amount);

}  // namespace labelcost
