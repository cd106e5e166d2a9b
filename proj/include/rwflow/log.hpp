#pragma once

// Minimal stderr logger. Verbosity comes from RWFLOW_LOG
// (error, warn, info, debug or 0-3); the default is warn.

#include <string>

namespace rwflow::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level level();
void set_level(Level lvl);
bool enabled(Level lvl);
void write(Level lvl, const std::string& msg);

inline void error(const std::string& msg) { write(Level::Error, msg); }
inline void warn(const std::string& msg) { write(Level::Warn, msg); }
inline void info(const std::string& msg) { write(Level::Info, msg); }
inline void debug(const std::string& msg) { write(Level::Debug, msg); }

}  // namespace rwflow::log
