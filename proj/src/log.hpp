#pragma once

#include <iostream>
#include <mutex>
#include <string_view>

namespace f2c::detail {

inline void warn(std::string_view message) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "f2c: warning: " << message << '\n';
}

}  // namespace f2c::detail
