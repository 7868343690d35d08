#pragma once

#include <string>

namespace genaff {

// UTC wall clock as "YYYY-MM-DDTHH:MM:SSZ".
std::string now_iso8601();

} // namespace genaff
