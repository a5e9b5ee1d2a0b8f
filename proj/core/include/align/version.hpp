#pragma once

#include <string_view>

namespace align {

std::string_view build_version();

}  // namespace align
