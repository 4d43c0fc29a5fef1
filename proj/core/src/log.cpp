#include "fedprompt/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace fedprompt {

namespace {

LogLevel read_env_level() {
  const char* env = std::getenv("FEDPROMPT_LOG");
  if (env == nullptr) return LogLevel::info;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

std::mutex g_mutex;

void emit(const char* tag, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << tag << msg << "\n";
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = read_env_level();
  return level;
}

void log_error(const std::string& msg) { emit("[error] ", msg); }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) emit("[info] ", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) emit("[debug] ", msg);
}

}  // namespace fedprompt
