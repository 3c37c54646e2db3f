#include "pomo/error.hpp"

#include <array>
#include <utility>

namespace pomo {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 29> kNames{{
    {Errc::InvalidConfig, "InvalidConfig"},
    {Errc::StartWhileActive, "StartWhileActive"},
    {Errc::InterruptOutsideWork, "InterruptOutsideWork"},
    {Errc::NoActivePhase, "NoActivePhase"},
    {Errc::InvalidHistory, "InvalidHistory"},
    {Errc::DuplicateMember, "DuplicateMember"},
    {Errc::UnknownMember, "UnknownMember"},
    {Errc::NotIdle, "NotIdle"},
    {Errc::NotAllReady, "NotAllReady"},
    {Errc::RotateDuringWork, "RotateDuringWork"},
    {Errc::UntrackedStory, "UntrackedStory"},
    {Errc::NegativeEstimate, "NegativeEstimate"},
    {Errc::SplitRequired, "SplitRequired"},
    {Errc::UnknownStory, "UnknownStory"},
    {Errc::InvalidStory, "InvalidStory"},
    {Errc::VoidedPomodoro, "VoidedPomodoro"},
    {Errc::PomodoroNotCompleted, "PomodoroNotCompleted"},
    {Errc::DuplicateMark, "DuplicateMark"},
    {Errc::InvalidEffort, "InvalidEffort"},
    {Errc::UnknownIteration, "UnknownIteration"},
    {Errc::CorruptArchive, "CorruptArchive"},
    {Errc::MalformedMessage, "MalformedMessage"},
    {Errc::UnsupportedVersion, "UnsupportedVersion"},
    {Errc::UnknownSession, "UnknownSession"},
    {Errc::SessionExists, "SessionExists"},
    {Errc::Unauthorized, "Unauthorized"},
    {Errc::NotSubscribed, "NotSubscribed"},
    {Errc::UnknownCommand, "UnknownCommand"},
    {Errc::InvalidArgument, "InvalidArgument"},
}};

} // namespace

std::string_view to_string(Errc code)
{
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Unknown";
}

bool errc_from_string(std::string_view name, Errc& out)
{
    for (const auto& [c, n] : kNames) {
        if (n == name) {
            out = c;
            return true;
        }
    }
    return false;
}

} // namespace pomo
