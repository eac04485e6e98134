#pragma once

#include <map>
#include <string_view>

namespace f2c::embedded {

// Files from data/, keyed by their path relative to that directory.
const std::map<std::string_view, std::string_view>& files();

}  // namespace f2c::embedded
