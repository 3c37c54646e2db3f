#include "pomo/ledger.hpp"

#include "pomo/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace pomo {

namespace {

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

} // namespace

std::string render_pomodoros(Effort effort)
{
    const std::int64_t u = effort.units;
    const bool negative = u < 0;
    const std::int64_t a = negative ? -u : u;
    std::string out = negative ? "-" : "";
    out += std::to_string(a / 2);
    out += (a % 2) ? ".5" : ".0";
    return out;
}

std::optional<Effort> parse_pomodoros(std::string_view text)
{
    if (text.empty()) return std::nullopt;
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    std::int64_t n = 0;
    if (whole.empty()) return std::nullopt;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), n);
    if (ec != std::errc{} || p != whole.data() + whole.size() || n < 0) return std::nullopt;
    std::int64_t half = 0;
    if (dot != std::string_view::npos) {
        const std::string_view frac = text.substr(dot + 1);
        if (frac == "5") {
            half = 1;
        } else if (frac.empty() || frac.find_first_not_of('0') != std::string_view::npos) {
            return std::nullopt;
        }
    }
    return Effort{n * 2 + half};
}

TeamCapacity capacity(std::int64_t pairs, std::int64_t per_pair_per_day)
{
    if (pairs < 0 || per_pair_per_day < 0) throw Error(Errc::InvalidArgument, "capacity counts must be non-negative");
    return TeamCapacity{pairs, per_pair_per_day, pairs * per_pair_per_day};
}

Effort meeting_effort(std::int64_t people, std::int64_t slots)
{
    if (people < 0 || slots < 0) throw Error(Errc::InvalidArgument, "meeting counts must be non-negative");
    return Effort{people * slots};
}

EstimateAdvice classify_estimate(Effort estimate, const EstimationRules& rules)
{
    if (estimate.units > rules.split_required_above) return EstimateAdvice::SplitRequired;
    if (estimate.units > rules.split_suggested_above) return EstimateAdvice::SplitSuggested;
    if (estimate.units > 0 && estimate.units < rules.combine_below) return EstimateAdvice::CombineSuggested;
    return EstimateAdvice::Ok;
}

EstimateResult estimate_story(const Story& story, Effort estimate, const EstimationRules& rules)
{
    if (!story.tracked) throw Error(Errc::UntrackedStory, "story " + story.id + " is untracked exploration");
    if (estimate.units < 0) throw Error(Errc::NegativeEstimate, "estimate must be non-negative");
    EstimateResult result{story, classify_estimate(estimate, rules)};
    if (result.advice != EstimateAdvice::SplitRequired) result.story.estimate = estimate;
    return result;
}

Ledger::Ledger()
    : types_{"Analyzing", "Coding", "Refactoring", "Testing", "Meeting", "Spike"}
{}

Story* Ledger::find_mutable(std::string_view id)
{
    auto it = std::find_if(stories_.begin(), stories_.end(), [&](const Story& s) { return s.id == id; });
    return it == stories_.end() ? nullptr : &*it;
}

const Story* Ledger::find_story(std::string_view id) const
{
    auto it = std::find_if(stories_.begin(), stories_.end(), [&](const Story& s) { return s.id == id; });
    return it == stories_.end() ? nullptr : &*it;
}

void Ledger::upsert_story(const Story& story)
{
    if (story.id.empty()) throw Error(Errc::InvalidStory, "story id must not be empty");
    if (story.estimate.units < 0) throw Error(Errc::NegativeEstimate, "estimate must be non-negative");
    if (!story.tracked && story.estimate.units != 0) {
        throw Error(Errc::InvalidStory, "untracked story " + story.id + " cannot carry an estimate");
    }
    if (Story* existing = find_mutable(story.id)) {
        if (!story.tracked && actual(story.id).units != 0) {
            throw Error(Errc::InvalidStory, "story " + story.id + " already has tracked effort");
        }
        *existing = story;
        return;
    }
    stories_.push_back(story);
}

void Ledger::set_status(std::string_view story_id, StoryStatus status)
{
    Story* s = find_mutable(story_id);
    if (!s) throw Error(Errc::UnknownStory, "no story " + std::string(story_id));
    s->status = status;
}

EstimateResult Ledger::estimate(std::string_view story_id, Effort units)
{
    Story* s = find_mutable(story_id);
    if (!s) throw Error(Errc::UnknownStory, "no story " + std::string(story_id));
    EstimateResult r = estimate_story(*s, units, rules_);
    if (r.advice != EstimateAdvice::SplitRequired) *s = r.story;
    return r;
}

void Ledger::track(const TrackMark& mark)
{
    Story* s = find_mutable(mark.story_id);
    if (!s) throw Error(Errc::UnknownStory, "no story " + mark.story_id);
    if (!s->tracked) throw Error(Errc::UntrackedStory, "story " + s->id + " is not tracked in pomodoros");
    if (mark.effort.units != 1 && mark.effort.units != 2) {
        throw Error(Errc::InvalidEffort, "a mark is worth 1 (half) or 2 (full pair-pomodoro) units");
    }
    auto outcome = pomodoros_.find(mark.pomodoro_seq);
    if (outcome == pomodoros_.end()) {
        throw Error(Errc::PomodoroNotCompleted, "pomodoro #" + std::to_string(mark.pomodoro_seq) + " is unknown");
    }
    if (outcome->second == PomodoroOutcome::Voided) {
        throw Error(Errc::VoidedPomodoro,
                    "pomodoro #" + std::to_string(mark.pomodoro_seq) + " was voided and earns no credit");
    }
    if (outcome->second != PomodoroOutcome::Completed) {
        throw Error(Errc::PomodoroNotCompleted, "pomodoro #" + std::to_string(mark.pomodoro_seq) + " is still running");
    }
    if (!mark.owner.empty()) {
        const bool dup = std::any_of(marks_.begin(), marks_.end(), [&](const TrackMark& m) {
            return m.pomodoro_seq == mark.pomodoro_seq && m.owner == mark.owner;
        });
        if (dup) {
            throw Error(Errc::DuplicateMark, mark.owner + " already marked pomodoro #" + std::to_string(mark.pomodoro_seq));
        }
    }

    TrackMark stored = mark;
    stored.ptype = register_type(mark.ptype);
    marks_.push_back(stored);
    if (s->status == StoryStatus::Planned) s->status = StoryStatus::InProgress;
}

void Ledger::note_pomodoro(std::uint64_t seq, PomodoroOutcome outcome)
{
    pomodoros_[seq] = outcome;
}

std::string Ledger::register_type(std::string_view name)
{
    if (name.empty()) throw Error(Errc::InvalidArgument, "pomodoro type must not be empty");
    for (const auto& t : types_) {
        if (iequals(t, name)) return t;
    }
    types_.emplace_back(name);
    return types_.back();
}

Effort Ledger::actual(std::string_view story_id) const
{
    Effort total;
    for (const auto& m : marks_) {
        if (m.story_id == story_id) total += m.effort;
    }
    return total;
}

bool Ledger::has_iteration(std::string_view iteration_id) const
{
    return std::any_of(stories_.begin(), stories_.end(),
                       [&](const Story& s) { return s.iteration_id == iteration_id; });
}

IterationBalance Ledger::iteration_balance(std::string_view iteration_id, bool allow_empty) const
{
    if (!allow_empty && !has_iteration(iteration_id)) {
        throw Error(Errc::UnknownIteration, "no iteration " + std::string(iteration_id));
    }
    IterationBalance b;
    for (const auto& s : stories_) {
        if (s.iteration_id != iteration_id || !s.tracked) continue;
        const Effort act = actual(s.id);
        b.total_estimate += s.estimate;
        b.total_actual += act;
        if (s.status != StoryStatus::Done && s.estimate > act) b.remaining += s.estimate - act;
    }
    return b;
}

bool Ledger::mark_in_period(const TrackMark& mark, const Period& period) const
{
    if (period.from && mark.at < *period.from) return false;
    if (period.to && mark.at >= *period.to) return false;
    if (period.iteration_id) {
        const Story* s = find_story(mark.story_id);
        if (!s || s->iteration_id != *period.iteration_id) return false;
    }
    return true;
}

std::map<std::string, Effort> Ledger::type_breakdown(const Period& period) const
{
    std::map<std::string, Effort> out;
    for (const auto& m : marks_) {
        if (mark_in_period(m, period)) out[m.ptype] += m.effort;
    }
    return out;
}

std::optional<std::uint64_t> Ledger::last_completed_pomodoro() const
{
    for (auto it = pomodoros_.rbegin(); it != pomodoros_.rend(); ++it) {
        if (it->second == PomodoroOutcome::Completed) return it->first;
    }
    return std::nullopt;
}

const char* to_string(StoryStatus status)
{
    switch (status) {
    case StoryStatus::Planned: return "Planned";
    case StoryStatus::InProgress: return "InProgress";
    case StoryStatus::Done: return "Done";
    }
    return "?";
}

const char* to_string(EstimateAdvice advice)
{
    switch (advice) {
    case EstimateAdvice::Ok: return "Ok";
    case EstimateAdvice::CombineSuggested: return "CombineSuggested";
    case EstimateAdvice::SplitSuggested: return "SplitSuggested";
    case EstimateAdvice::SplitRequired: return "SplitRequired";
    }
    return "?";
}

} // namespace pomo
