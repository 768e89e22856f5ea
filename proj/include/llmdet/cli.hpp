#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace llmdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

// "2:2000,3:100" -> {2: 2000, 3: 100}
std::map<int, std::size_t> parse_level_map(const std::string& s);

// Resolves a dictionary argument: as given if it exists, else under
// LLMDET_DICT_PATH (with ".dict" appended when it has no extension).
std::string resolve_dict_path(const std::string& arg);

}  // namespace llmdet::cli
