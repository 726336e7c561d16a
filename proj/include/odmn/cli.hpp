#pragma once

#include <string>
#include <vector>

namespace odmn {

/// Entry point behind the odmn binary. Returns the process exit code:
/// 0 success, 1 usage/config error, 2 data error.
int cli_main(const std::vector<std::string>& args);

}  // namespace odmn
