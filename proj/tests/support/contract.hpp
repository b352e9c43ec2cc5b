#pragma once

// Behavioral contract every Executor implementation must satisfy. Each check
// starts its own session through the factory.

#include "dynact/executor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace contract {

using Factory = std::function<std::unique_ptr<dynact::Executor>(const std::vector<dynact::ActionRecord>&)>;

struct CheckResult {
    std::string name;
    bool passed;
    std::string detail;  // first failed expectation, empty on success
};

std::vector<CheckResult> run_executor_contract(const Factory& start);

}  // namespace contract
