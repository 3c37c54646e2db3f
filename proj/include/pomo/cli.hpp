#pragma once

// The `pomo` command-line client as a library, so it can run in-process.
//
// Settings come from flags, then environment variables, then a key=value
// config file:
//
//   # read from --config <file> or $POMO_CONFIG
//   server = 127.0.0.1:7878
//   session = team
//   member = alice
//   token = s3cret
//   role = Developer
//   archive = /var/lib/pomod/team.jsonl
//
// Environment: POMO_SERVER, POMO_TOKEN, POMO_SESSION, POMO_MEMBER,
// POMO_CONFIG.

#include <chrono>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pomo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConnection = 3;

inline constexpr const char* kConfigKeys[] = {"server", "session", "member", "token", "role", "name", "archive"};

/// Parses the config format above. Throws Error{InvalidArgument} naming the
/// line on unknown keys or lines without '='.
std::map<std::string, std::string> parse_config(std::string_view text);

struct CliEnv
{
    std::ostream& out;
    std::ostream& err;
    std::function<std::optional<std::string>(const std::string&)> getenv;
    std::chrono::milliseconds timeout{std::chrono::seconds(5)};
};

/// Runs one invocation. `args` excludes the program name. Returns the exit
/// code: 0 ok, 1 domain error, 2 usage error, 3 connection failure.
int run_cli(const std::vector<std::string>& args, const CliEnv& env);

/// The environment of the current process.
std::optional<std::string> process_env(const std::string& name);

} // namespace pomo
