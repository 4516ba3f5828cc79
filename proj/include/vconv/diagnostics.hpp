#pragma once

#include <functional>
#include <string>

namespace vconv {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink; returns the previous one.
/// The default writes one JSON object per line to std::clog.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

} // namespace vconv
