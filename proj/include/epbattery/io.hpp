#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace epbattery {

/// Shortest-round-trip-safe text for a double: 17 significant digits,
/// "nan" / "inf" / "-inf" for non-finite values. Locale independent.
[[nodiscard]] std::string format_double(double v);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results into pre-sized slots so output
/// order never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace epbattery
