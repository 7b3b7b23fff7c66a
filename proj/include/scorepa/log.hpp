#pragma once

#include <functional>
#include <string>

namespace scorepa {

/// Non-fatal diagnostics. Defaults to stderr; tests may capture them.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace scorepa
