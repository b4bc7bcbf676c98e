#pragma once

#include <stdexcept>
#include <string>

namespace pvclust {

// Bad configuration: unknown keys, out-of-range values, missing required
// settings. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent data: parse failures, invariant violations in input
// files, dimension mismatches. The CLI maps this to exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace pvclust
