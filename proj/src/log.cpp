#include "rwflow/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace rwflow::log {

namespace {

Level parse_env() {
  const char* env = std::getenv("RWFLOW_LOG");
  if (!env) return Level::Warn;
  const std::string v(env);
  if (v == "error" || v == "0") return Level::Error;
  if (v == "info" || v == "2") return Level::Info;
  if (v == "debug" || v == "3") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(parse_env())};
  return lvl;
}

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }
bool enabled(Level lvl) { return static_cast<int>(lvl) <= current().load(); }

void write(Level lvl, const std::string& msg) {
  if (!enabled(lvl)) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[rwflow " << tag(lvl) << "] " << msg << '\n';
}

}  // namespace rwflow::log
