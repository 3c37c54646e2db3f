#pragma once

#include "pomo/timer.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pomo {

/// Effort in half-pomodoro units: one pair-pomodoro is 2 units, one person in
/// a pomodoro-length slot is 1 unit. Never stored as a fraction.
struct Effort
{
    std::int64_t units{0};

    auto operator<=>(const Effort&) const = default;
    Effort& operator+=(Effort other)
    {
        units += other.units;
        return *this;
    }
    friend Effort operator+(Effort a, Effort b) { return a += b; }
    friend Effort operator-(Effort a, Effort b) { return Effort{a.units - b.units}; }
};

/// Renders units as pomodoros with one fractional digit: 5 -> "2.5", 6 -> "3.0".
std::string render_pomodoros(Effort effort);

/// Parses "3", "2.5" or "2.0" into units; rejects anything that is not a
/// whole or half pomodoro. Returns nullopt on failure.
std::optional<Effort> parse_pomodoros(std::string_view text);

struct TeamCapacity
{
    std::int64_t pairs{0};
    std::int64_t pomodoros_per_pair_per_day{0};
    std::int64_t total{0}; // pair-pomodoros per day

    bool operator==(const TeamCapacity&) const = default;
};

TeamCapacity capacity(std::int64_t pairs, std::int64_t per_pair_per_day);

/// One unit per person per pomodoro-length slot.
Effort meeting_effort(std::int64_t people, std::int64_t slots);

enum class StoryStatus { Planned, InProgress, Done };

struct Story
{
    std::string id;
    std::string title;
    Effort estimate;
    bool tracked{true};
    StoryStatus status{StoryStatus::Planned};
    std::string iteration_id;
    std::string legacy_points; // recorded only, never used in arithmetic

    bool operator==(const Story&) const = default;
};

enum class EstimateAdvice { Ok, CombineSuggested, SplitSuggested, SplitRequired };

/// Thresholds in half-pomodoro units. A story is too big above 5 pomodoros
/// (advisory) and above 7 (hard), too small below one pomodoro.
struct EstimationRules
{
    std::int64_t split_suggested_above{10};
    std::int64_t split_required_above{14};
    std::int64_t combine_below{2};

    bool operator==(const EstimationRules&) const = default;
};

EstimateAdvice classify_estimate(Effort estimate, const EstimationRules& rules = {});

struct EstimateResult
{
    Story story; // unchanged when advice is SplitRequired
    EstimateAdvice advice{EstimateAdvice::Ok};
};

/// Throws UntrackedStory / NegativeEstimate. SplitRequired is returned as
/// advice and the estimate is not stored.
EstimateResult estimate_story(const Story& story, Effort estimate, const EstimationRules& rules = {});

struct TrackMark
{
    std::string story_id;
    std::uint64_t pomodoro_seq{0};
    std::string ptype;
    Effort effort{2};
    std::string owner; // pair key ("a+b") or solo member id; empty when unattributed
    Timestamp at{};

    bool operator==(const TrackMark&) const = default;
};

enum class PomodoroOutcome { Running, Completed, Voided };

struct IterationBalance
{
    Effort total_estimate;
    Effort total_actual;
    Effort remaining;

    bool operator==(const IterationBalance&) const = default;
};

/// Selects marks for breakdowns. Empty fields do not filter. Time bounds are
/// half-open [from, to).
struct Period
{
    std::optional<std::string> iteration_id;
    std::optional<Timestamp> from;
    std::optional<Timestamp> to;
};

class Ledger
{
  public:
    Ledger();

    /// Creates or updates a story. Turning a story untracked is refused once it
    /// carries an estimate or marks.
    void upsert_story(const Story& story);
    void set_status(std::string_view story_id, StoryStatus status);
    EstimateResult estimate(std::string_view story_id, Effort units);

    /// Validates then appends. The referenced pomodoro must have completed.
    void track(const TrackMark& mark);

    void note_pomodoro(std::uint64_t seq, PomodoroOutcome outcome);

    /// Canonical (first-registered) spelling; types match case-insensitively.
    std::string register_type(std::string_view name);

    const Story* find_story(std::string_view id) const;
    Effort actual(std::string_view story_id) const;
    bool has_iteration(std::string_view iteration_id) const;

    /// Throws UnknownIteration when no story belongs to it, unless `allow_empty`.
    IterationBalance iteration_balance(std::string_view iteration_id, bool allow_empty = false) const;
    std::map<std::string, Effort> type_breakdown(const Period& period = {}) const;

    std::optional<std::uint64_t> last_completed_pomodoro() const;

    const std::vector<Story>& stories() const { return stories_; }
    const std::vector<TrackMark>& marks() const { return marks_; }
    const std::vector<std::string>& types() const { return types_; }
    const std::map<std::uint64_t, PomodoroOutcome>& pomodoros() const { return pomodoros_; }
    const EstimationRules& rules() const { return rules_; }
    void set_rules(const EstimationRules& rules) { rules_ = rules; }

    bool operator==(const Ledger&) const = default;

  private:
    friend struct LedgerCodec;

    Story* find_mutable(std::string_view id);
    bool mark_in_period(const TrackMark& mark, const Period& period) const;

    std::vector<Story> stories_;
    std::vector<TrackMark> marks_;
    std::vector<std::string> types_;
    std::map<std::uint64_t, PomodoroOutcome> pomodoros_;
    EstimationRules rules_;
};

const char* to_string(StoryStatus status);
const char* to_string(EstimateAdvice advice);

} // namespace pomo
