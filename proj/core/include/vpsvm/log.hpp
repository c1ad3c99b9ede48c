#pragma once

#include <functional>
#include <string_view>

namespace vpsvm {

using warning_sink = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink and returns the previous one.
/// The default sink writes "warning: <message>" to stderr.
warning_sink set_warning_sink(warning_sink sink);

void warn(std::string_view message);

}  // namespace vpsvm
