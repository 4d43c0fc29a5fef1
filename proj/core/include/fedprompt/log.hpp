#pragma once

#include <string>

namespace fedprompt {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level comes from the FEDPROMPT_LOG environment variable
/// ("error", "info", "debug"; default "info"), read once per process.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace fedprompt
