// SPDX-License-Identifier: Apache-2.0
//
// Fast invariant checks bundled into the library for `smsim selftest`.

#pragma once

#include <string>
#include <vector>

namespace smsim {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<CheckResult> run_selftest();

}  // namespace smsim
