#pragma once

#include <string>

#include <json.hpp>

namespace facepipe {

/// Canonical form shared by every JSON artifact: nlohmann::json keeps object
/// keys sorted, dump() emits minimal separators and shortest round-trip
/// numbers, and we terminate with one newline. Parse-then-dump of a
/// canonical document reproduces it byte for byte.
inline std::string dump_canonical(const nlohmann::json& j) {
    return j.dump() + "\n";
}

} // namespace facepipe
