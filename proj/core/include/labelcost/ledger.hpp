// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "labelcost/money.hpp"

namespace labelcost {

enum class LabelerKind { kLlm, kHuman };

std::string_view to_string(LabelerKind kind);

struct LedgerEntry {
  std::string example_id;
  LabelerKind kind;
  Money amount;

  bool operator==(const LedgerEntry&) const = default;
};

struct ReservationToken {
  std::uint64_t id = 0;
};

/// Observable ledger state. Two ledgers with equal snapshots are
/// indistinguishable to callers.
struct LedgerSnapshot {
  Money total;
  Money reserved;
  Money settled;
  std::vector<LedgerEntry> entries;
  struct Hold {
    std::uint64_t token;
    std::string example_id;
    LabelerKind kind;
    Money remaining;
    bool operator==(const Hold&) const = default;
  };
  std::vector<Hold> holds;

  bool operator==(const LedgerSnapshot&) const = default;
};

/// Reserve/settle accounting against a fixed total budget.
///
/// Invariant: reserved + settled <= total after every operation. All
/// operations are serialized on an internal mutex, so the ledger can be
/// shared with concurrent labeling workers.
class BudgetLedger {
 public:
  explicit BudgetLedger(Money total);

  BudgetLedger(const BudgetLedger&) = delete;
  BudgetLedger& operator=(const BudgetLedger&) = delete;

  /// Holds `amount` for one labeling request. Returns nullopt (the
  /// budget-exhausted signal) if the hold would overdraw the budget.
  std::optional<ReservationToken> reserve(Money amount, std::string example_id,
                                          LabelerKind kind);

  /// Charges `actual` against the hold. The token stays open with the
  /// remainder until released.
  void settle(ReservationToken token, Money actual);

  /// Returns whatever is still held under `token` and closes it.
  void release(ReservationToken token);

  /// settle() followed by release().
  void settle_and_close(ReservationToken token, Money actual);

  Money total() const;
  Money reserved() const;
  Money settled() const;
  Money available() const;
  Money settled_for(LabelerKind kind) const;
  std::size_t open_holds() const;
  std::vector<LedgerEntry> entries() const;
  LedgerSnapshot snapshot() const;

 private:
  struct Hold {
    std::string example_id;
    LabelerKind kind;
    Money remaining;
  };

  mutable std::mutex mu_;
  Money total_;
  Money reserved_;
  Money settled_;
  std::vector<LedgerEntry> entries_;
  std::map<std::uint64_t, Hold> holds_;
  std::uint64_t next_token_ = 1;
};

}  // namespace labelcost
