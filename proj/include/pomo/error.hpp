#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pomo {

/// Domain and protocol error codes. The names travel verbatim on the wire
/// (see to_string) and the CLI maps them onto exit codes.
enum class Errc {
    InvalidConfig,
    StartWhileActive,
    InterruptOutsideWork,
    NoActivePhase,
    InvalidHistory,
    DuplicateMember,
    UnknownMember,
    NotIdle,
    NotAllReady,
    RotateDuringWork,
    UntrackedStory,
    NegativeEstimate,
    SplitRequired,
    UnknownStory,
    InvalidStory,
    VoidedPomodoro,
    PomodoroNotCompleted,
    DuplicateMark,
    InvalidEffort,
    UnknownIteration,
    CorruptArchive,
    MalformedMessage,
    UnsupportedVersion,
    UnknownSession,
    SessionExists,
    Unauthorized,
    NotSubscribed,
    UnknownCommand,
    InvalidArgument,
};

std::string_view to_string(Errc code);

/// Returns false for names not in the catalog.
bool errc_from_string(std::string_view name, Errc& out);

class Error : public std::runtime_error
{
  public:
    Error(Errc code, const std::string& reason)
        : std::runtime_error(reason)
        , code_(code)
    {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

} // namespace pomo
