#pragma once

#include <string>
#include <vector>

namespace untangle {

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs argv[0] (PATH lookup) without a shell and captures both streams.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace untangle
