// SPDX-License-Identifier: Apache-2.0
#include "labelcost/ledger.hpp"

#include "labelcost/errors.hpp"

namespace labelcost {

std::string_view to_string(LabelerKind kind) {
  return kind == LabelerKind::kLlm ? "llm" : "human";
}

BudgetLedger::BudgetLedger(Money total) : total_(total) {
  if (total.micros() < 0) {
    throw Error(ErrorKind::kInvalidArgument, "ledger total must be non-negative");
  }
}

std::optional<ReservationToken> BudgetLedger::reserve(Money amount, std::string example_id,
                                                      LabelerKind kind) {
  if (amount.micros() < 0) {
    throw Error(ErrorKind::kInvalidArgument, "reservation amount must be non-negative");
  }
  std::lock_guard lock(mu_);
  if (reserved_ + settled_ + amount > total_) return std::nullopt;
  const std::uint64_t id = next_token_++;
  holds_.emplace(id, Hold{std::move(example_id), kind, amount});
  reserved_ += amount;
  return ReservationToken{id};
}

void BudgetLedger::settle(ReservationToken token, Money actual) {
  std::lock_guard lock(mu_);
  auto it = holds_.find(token.id);
  if (it == holds_.end()) {
    throw Error(ErrorKind::kInvalidArgument, "unknown or closed reservation");
  }
  if (actual.micros() < 0 || actual > it->second.remaining) {
    throw Error(ErrorKind::kInvalidArgument,
                "settle amount " + format_fixed(actual) + " exceeds hold of " +
                    format_fixed(it->second.remaining) + " for '" + it->second.example_id + "'");
  }
  if (actual.micros() == 0) return;
  it->second.remaining -= actual;
  reserved_ -= actual;
  settled_ += actual;
  entries_.push_back(LedgerEntry{it->second.example_id, it->second.kind, actual});
}

void BudgetLedger::release(ReservationToken token) {
  std::lock_guard lock(mu_);
  auto it = holds_.find(token.id);
  if (it == holds_.end()) {
    throw Error(ErrorKind::kInvalidArgument, "unknown or closed reservation");
  }
  reserved_ -= it->second.remaining;
  holds_.erase(it);
}

void BudgetLedger::settle_and_close(ReservationToken token, Money actual) {
  settle(token, actual);
  release(token);
}

Money BudgetLedger::total() const {
  std::lock_guard lock(mu_);
  return total_;
}

Money BudgetLedger::reserved() const {
  std::lock_guard lock(mu_);
  return reserved_;
}

Money BudgetLedger::settled() const {
  std::lock_guard lock(mu_);
  return settled_;
}

Money BudgetLedger::available() const {
  std::lock_guard lock(mu_);
  return total_ - reserved_ - settled_;
}

Money BudgetLedger::settled_for(LabelerKind kind) const {
  std::lock_guard lock(mu_);
  Money sum;
  for (const auto& e : entries_) {
    if (e.kind == kind) sum += e.amount;
  }
  return sum;
}

std::size_t BudgetLedger::open_holds() const {
  std::lock_guard lock(mu_);
  return holds_.size();
}

std::vector<LedgerEntry> BudgetLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

LedgerSnapshot BudgetLedger::snapshot() const {
  std::lock_guard lock(mu_);
  LedgerSnapshot snap{total_, reserved_, settled_, entries_, {}};
  for (const auto& [id, hold] : holds_) {
    snap.holds.push_back({id, hold.example_id, hold.kind, hold.remaining});
  }
  return snap;
}

}  // namespace labelcost
