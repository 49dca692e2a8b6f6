#include "noisetensor/budget.hpp"

#include <cstdlib>

namespace noisetensor {

namespace {

std::size_t read_budget_from_env() {
  const char* raw = std::getenv("NOISETENSOR_BUDGET_MB");
  if (raw == nullptr) return std::size_t{512} << 20;
  char* end = nullptr;
  const long long mb = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0' || mb <= 0) {
    throw std::invalid_argument("NOISETENSOR_BUDGET_MB must be a positive integer");
  }
  return static_cast<std::size_t>(mb) << 20;
}

}  // namespace

std::size_t memory_budget_bytes() {
  // Read once; budget changes mid-process are not honored.
  static const std::size_t budget = read_budget_from_env();
  return budget;
}

void require_budget(std::size_t bytes, const char* what) {
  if (bytes > memory_budget_bytes()) {
    throw BudgetExceeded(std::string(what) + ": " + std::to_string(bytes) +
                         " bytes exceeds budget of " +
                         std::to_string(memory_budget_bytes()) + " bytes");
  }
}

}  // namespace noisetensor
