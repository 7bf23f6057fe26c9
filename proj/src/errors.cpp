#include "wncs/errors.hpp"

namespace wncs {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out = "validation failed:";
    for (const auto& s : items) out += "\n  - " + s;
    return out;
}

} // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : ConfigError(join(violations)), violations_(std::move(violations)) {}

} // namespace wncs
