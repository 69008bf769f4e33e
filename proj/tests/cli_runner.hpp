#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace nref::test {

struct CliResult {
    int code = -1;
    std::string out;
};

/// Runs the CLI with a shell-quoted argument string; stderr is discarded.
inline CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(NREF_CLI_PATH) + " " + args + " 2>/dev/null";
    CliResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::filesystem::path cli_scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("nref_cli_" + std::to_string(::getpid())) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace nref::test
