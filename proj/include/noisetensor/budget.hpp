#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noisetensor {

// Thrown when an allocation would exceed the configured memory budget.
// The CLI maps this to its own exit code.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

// Budget in bytes, read once from NOISETENSOR_BUDGET_MB (default 512 MB).
std::size_t memory_budget_bytes();

// Throws BudgetExceeded if `bytes` does not fit the budget.
void require_budget(std::size_t bytes, const char* what);

}  // namespace noisetensor
