#include "pomo/cli.hpp"

#include "pomo/archive.hpp"
#include "pomo/error.hpp"
#include "pomo/hub.hpp"
#include "pomo/mirror.hpp"
#include "pomo/net.hpp"
#include "pomo/presence.hpp"
#include "pomo/reports.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pomo {

namespace {

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// An error message from the server (or a local domain failure).
struct DomainFailure : std::runtime_error
{
    json payload;
    DomainFailure(json p, const std::string& text)
        : std::runtime_error(text)
        , payload(std::move(p))
    {}
};

struct Settings
{
    std::string server;
    std::string session;
    std::string member;
    std::string token;
    std::string role;
    std::string name;
    std::string archive;
    bool json{false};
};

Timestamp local_now()
{
    return at_ms(std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count());
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string pairing_text(const json& pairing)
{
    std::string out;
    for (const auto& p : pairing.at("pairs")) {
        if (!out.empty()) out += ", ";
        out += p.at(0).get<std::string>() + "+" + p.at(1).get<std::string>();
    }
    const auto& solo = pairing.at("solo");
    if (!solo.empty()) {
        out += out.empty() ? "solo: " : "; solo: ";
        for (std::size_t i = 0; i < solo.size(); ++i) out += (i ? ", " : "") + solo[i].get<std::string>();
    }
    return out.empty() ? "nobody active" : out;
}

std::string status_text(const json& doc)
{
    std::string out = doc.at("session").get<std::string>() + ": " + doc.at("message").get<std::string>() + "\n";
    std::size_t width = 0;
    for (const auto& m : doc.at("members")) width = std::max(width, m.at("member_id").get<std::string>().size());
    for (const auto& m : doc.at("members")) {
        const std::string id = m.at("member_id").get<std::string>();
        out += "  " + id + std::string(width - id.size() + 2, ' ') + m.at("message").get<std::string>() + "\n";
    }
    return out;
}

std::string countdown_line(const ClientMirror& mirror, Timestamp local)
{
    const auto& state = mirror.state();
    if (!state) return "connecting";
    std::string line = state->session_id + " " + phase_name(state->clock.phase);
    if (const auto secs = mirror.seconds_remaining(local)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %02lld:%02lld left", static_cast<long long>(*secs / 60),
                      static_cast<long long>(*secs % 60));
        line += buf;
        line += state->clock.phase == Phase::Work ? " (do not disturb)" : " (break)";
    }
    if (mirror.stale()) line += " [resyncing]";
    return line;
}

class Connection
{
  public:
    Connection(const Settings& s, const CliEnv& env)
        : s_(s)
        , env_(env)
    {}

    /// Connects and handshakes; returns the snapshot.
    WireMessage hello(std::optional<TimerConfig> create, bool with_member)
    {
        if (s_.session.empty()) throw UsageError("no session; pass --session or set session= in the config");
        if (!connected_) {
            client_.connect(parse_endpoint(s_.server), env_.timeout);
            connected_ = true;
        }
        HelloRequest h;
        h.session_id = s_.session;
        h.token = s_.token;
        h.create = create;
        if (with_member && !s_.member.empty()) {
            Member m;
            m.id = s_.member;
            m.display_name = s_.name.empty() ? s_.member : s_.name;
            m.role = parse_role(s_.role.empty() ? "Developer" : s_.role);
            h.member = m;
        }
        client_.send(make_hello(h));
        const auto deadline = std::chrono::steady_clock::now() + env_.timeout;
        while (true) {
            auto msg = next(deadline);
            if (!msg) throw ConnectionError("no snapshot from " + s_.server);
            if (msg->type == "error") fail(msg->payload);
            if (msg->type == "snapshot") return *msg;
        }
    }

    /// Sends a command and waits for its ack; server errors throw
    /// DomainFailure. A timed-out command is re-sent once with the same id.
    WireMessage command(const std::string& name, json args = json::object())
    {
        const std::string id = random_id();
        const WireMessage cmd = make_command(id, name, std::move(args));
        for (int attempt = 0; attempt < 2; ++attempt) {
            client_.send(cmd);
            const auto deadline = std::chrono::steady_clock::now() + env_.timeout;
            while (true) {
                auto msg = next(deadline);
                if (!msg) break;
                if (msg->type != "ack" && msg->type != "error") continue;
                const auto cid = msg->payload.find("command_id");
                if (cid == msg->payload.end() || *cid != id) {
                    if (msg->type == "error" && cid == msg->payload.end()) fail(msg->payload);
                    continue;
                }
                if (msg->type == "error") fail(msg->payload);
                return *msg;
            }
        }
        throw ConnectionError("no reply to '" + name + "' from " + s_.server);
    }

    std::optional<WireMessage> next(std::chrono::steady_clock::time_point deadline)
    {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return std::nullopt;
        auto msg = client_.read(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now));
        if (msg) mirror_.on_message(*msg, local_now());
        return msg;
    }

    ClientMirror& mirror() { return mirror_; }
    LineClient& client() { return client_; }

    [[noreturn]] static void fail(const json& payload)
    {
        throw DomainFailure(payload, "error: " + payload.value("code", std::string("Error")) + ": " +
                                         payload.value("reason", std::string{}));
    }

  private:
    const Settings& s_;
    const CliEnv& env_;
    LineClient client_;
    ClientMirror mirror_;
    bool connected_{false};
};

ArchiveContents load_archive_file(const Settings& s)
{
    if (s.archive.empty()) throw UsageError("reports read a local archive; pass --archive or set archive=");
    std::ifstream in(s.archive, std::ios::binary);
    if (!in) throw Error(Errc::InvalidArgument, "cannot open archive " + s.archive);
    return parse_archive(in);
}

void require_member(const Settings& s)
{
    if (s.member.empty()) throw UsageError("no member id; pass --member or set member= in the config");
}

} // namespace

std::map<std::string, std::string> parse_config(std::string_view text)
{
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) == std::end(kConfigKeys)) {
            throw Error(Errc::InvalidArgument, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        out[key] = value;
    }
    return out;
}

std::optional<std::string> process_env(const std::string& name)
{
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

int run_cli(const std::vector<std::string>& args, const CliEnv& env)
{
    CLI::App app{"pomo: shared pomodoro client"};
    app.require_subcommand(1);
    app.fallthrough();
    Settings s;
    std::string config_path;
    app.add_option("--server", s.server, "server address host:port");
    app.add_option("--session", s.session, "session id");
    app.add_option("--member", s.member, "your member id");
    app.add_option("--token", s.token, "shared session token");
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--archive", s.archive, "local archive file for reports");
    app.add_flag("--json", s.json, "print raw server payloads");

    // session
    auto* session = app.add_subcommand("session", "create or join a session");
    session->require_subcommand(1);
    auto* create = session->add_subcommand("create", "create a session and join it");
    double work = 25, short_break = 5, long_break = 15;
    int every = 4;
    create->add_option("--work", work, "work minutes")->capture_default_str();
    create->add_option("--short-break", short_break, "short break minutes")->capture_default_str();
    create->add_option("--long-break", long_break, "long break minutes")->capture_default_str();
    create->add_option("--long-every", every, "long break after this many pomodoros")->capture_default_str();
    create->add_option("--role", s.role, "Developer, Coach or CustomerProxy");
    create->add_option("--name", s.name, "display name");
    auto* join_cmd = session->add_subcommand("join", "join a session");
    join_cmd->add_option("--role", s.role, "Developer, Coach or CustomerProxy");
    join_cmd->add_option("--name", s.name, "display name");

    app.add_subcommand("ready", "declare yourself ready");
    app.add_subcommand("start", "start the shared pomodoro");
    auto* void_cmd = app.add_subcommand("void", "void the running pomodoro");
    std::string kind = "external";
    std::string note;
    void_cmd->add_option("--kind", kind, "internal or external")->check(CLI::IsMember({"internal", "external"}));
    void_cmd->add_option("--note", note, "what happened");
    auto* interrupt = app.add_subcommand("interrupt", "log an interruption");
    bool deflected = false;
    interrupt->add_flag("--deflected", deflected, "handled without breaking the pomodoro");
    interrupt->add_option("--kind", kind, "internal or external")->check(CLI::IsMember({"internal", "external"}));
    interrupt->add_option("--note", note, "what happened");

    auto* estimate = app.add_subcommand("estimate", "estimate a story in pomodoros");
    std::string story_id;
    std::string pomodoros;
    std::string title;
    std::string iteration;
    estimate->add_option("story", story_id, "story id")->required();
    estimate->add_option("pomodoros", pomodoros, "estimate, whole or half pomodoros")->required();
    estimate->add_option("--title", title, "title for a new story");
    estimate->add_option("--iteration", iteration, "iteration for a new story");

    auto* track = app.add_subcommand("track", "cross-mark a story for the last pomodoro");
    std::string ptype;
    bool half = false;
    std::int64_t pomodoro_seq = 0;
    track->add_option("story", story_id, "story id")->required();
    track->add_option("--type", ptype, "pomodoro type, e.g. Coding")->required();
    track->add_flag("--half", half, "solo work: half a pomodoro");
    track->add_option("--pomodoro", pomodoro_seq, "log position of the pomodoro's start");

    app.add_subcommand("rotate", "rotate pairs");

    auto* status = app.add_subcommand("status", "show the shared timer and presence");
    bool watch = false;
    double watch_for = 0;
    status->add_flag("--watch", watch, "live countdown");
    status->add_option("--for", watch_for, "stop watching after this many seconds");

    auto* report = app.add_subcommand("report", "offline reports from the archive");
    report->require_subcommand(1);
    auto* report_day = report->add_subcommand("day", "daily record");
    std::string date;
    report_day->add_option("--date", date, "YYYY-MM-DD; default the last day with events");
    auto* report_iteration = report->add_subcommand("iteration", "iteration spreadsheet as CSV");
    report_iteration->add_option("id", iteration, "iteration id")->required();
    auto* report_metrics = report->add_subcommand("metrics", "accuracy, work time and types");
    std::string from;
    std::string to;
    report_metrics->add_option("--from", from, "first date");
    report_metrics->add_option("--to", to, "last date");

    auto* journal = app.add_subcommand("journal", "end-of-day journal");
    journal->require_subcommand(1);
    auto* journal_add = journal->add_subcommand("add", "add lines and regenerate the summary");
    std::vector<std::string> lines;
    journal_add->add_option("lines", lines, "journal lines");
    journal_add->add_option("--date", date, "YYYY-MM-DD; default today on the server");
    auto* journal_show = journal->add_subcommand("show", "print a journal entry");
    journal_show->add_option("--date", date, "YYYY-MM-DD; default today on the server");

    auto* story = app.add_subcommand("story", "manage stories");
    story->require_subcommand(1);
    auto* story_add = story->add_subcommand("add", "add or update a story");
    bool untracked = false;
    story_add->add_option("id", story_id, "story id")->required();
    story_add->add_option("--title", title, "title");
    story_add->add_option("--iteration", iteration, "iteration id");
    story_add->add_flag("--untracked", untracked, "never estimated or tracked");
    auto* story_status = story->add_subcommand("status", "move a story");
    std::string new_status;
    story_status->add_option("id", story_id, "story id")->required();
    story_status->add_option("status", new_status, "Planned, InProgress or Done")
        ->required()
        ->check(CLI::IsMember({"Planned", "InProgress", "Done"}));

    app.add_subcommand("leave", "leave the session");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, env.out, env.err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    // Flags win over the environment, which wins over the config file.
    try {
        if (config_path.empty()) config_path = env.getenv("POMO_CONFIG").value_or("");
        std::map<std::string, std::string> file;
        if (!config_path.empty()) {
            std::ifstream in(config_path, std::ios::binary);
            if (!in) throw UsageError("cannot read config file " + config_path);
            std::ostringstream text;
            text << in.rdbuf();
            file = parse_config(text.str());
        }
        auto fill = [&](std::string& field, const char* env_name, const char* key, const char* fallback) {
            if (!field.empty()) return;
            if (env_name) {
                if (auto v = env.getenv(env_name); v && !v->empty()) {
                    field = *v;
                    return;
                }
            }
            if (auto it = file.find(key); it != file.end()) {
                field = it->second;
                return;
            }
            field = fallback;
        };
        fill(s.server, "POMO_SERVER", "server", "127.0.0.1:7878");
        fill(s.token, "POMO_TOKEN", "token", "");
        fill(s.session, "POMO_SESSION", "session", "");
        fill(s.member, "POMO_MEMBER", "member", "");
        fill(s.role, nullptr, "role", "Developer");
        fill(s.name, nullptr, "name", "");
        fill(s.archive, nullptr, "archive", "");
        parse_role(s.role);
        parse_endpoint(s.server);
    } catch (const UsageError& e) {
        env.err << "pomo: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        env.err << "pomo: " << e.what() << "\n";
        return kExitUsage;
    }

    auto emit = [&](const json& payload, const std::string& human) {
        if (s.json) {
            env.out << payload.dump() << "\n";
        } else {
            env.out << human;
            if (!human.empty() && human.back() != '\n') env.out << "\n";
        }
    };

    Connection conn(s, env);
    auto run_command = [&](const std::string& name, json cmd_args) {
        require_member(s);
        conn.hello(std::nullopt, true);
        return conn.command(name, std::move(cmd_args));
    };

    try {
        if (*create) {
            require_member(s);
            TimerConfig c;
            c.work = std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::ratio<60>>(work));
            c.short_break =
                std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::ratio<60>>(short_break));
            c.long_break =
                std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::ratio<60>>(long_break));
            c.long_break_every = every;
            const WireMessage snap = conn.hello(c, true);
            std::string human = "created session " + s.session;
            if (snap.payload.contains("token")) {
                human += "\ntoken: " + snap.payload.at("token").get<std::string>();
            }
            emit(snap.payload, human);
        } else if (*join_cmd) {
            const auto ack = run_command("join", json{{"role", s.role}, {"name", s.name.empty() ? s.member : s.name}});
            const bool observer = ack.payload.at("result").value("observer", false);
            emit(ack.payload, "joined " + s.session + (observer ? " as an observer until the next break" : ""));
        } else if (app.got_subcommand("ready")) {
            const auto ack = run_command("ready", json::object());
            std::string who;
            for (const auto& r : ack.payload.at("result").at("ready")) who += (who.empty() ? "" : ", ") + r.get<std::string>();
            emit(ack.payload, "ready: " + who);
        } else if (app.got_subcommand("start")) {
            const auto ack = run_command("start", json::object());
            const auto& r = ack.payload.at("result");
            const auto left = Duration{r.at("phase_deadline").get<std::int64_t>() - *ack.server_time};
            emit(ack.payload, "pomodoro started: " + render_presence(PresenceState::DoNotDisturb, minutes_ceil(left)));
        } else if (*void_cmd) {
            const auto ack = run_command("void", json{{"kind", kind}, {"note", note}});
            emit(ack.payload, "pomodoro voided");
        } else if (*interrupt) {
            const auto ack = run_command("interrupt", json{{"kind", kind}, {"note", note}, {"deflected", deflected}});
            emit(ack.payload, deflected ? "interruption logged; pomodoro continues" : "pomodoro voided");
        } else if (*estimate) {
            const auto units = parse_pomodoros(pomodoros);
            if (!units) throw UsageError("estimate must be a whole or half number of pomodoros, got '" + pomodoros + "'");
            json a{{"story", story_id}, {"units", units->units}};
            if (!title.empty()) a["title"] = title;
            if (!iteration.empty()) a["iteration"] = iteration;
            const auto ack = run_command("estimate", a);
            const auto& r = ack.payload.at("result");
            std::string human = story_id + ": " + r.at("estimate_pomodoros").get<std::string>() + " pomodoros";
            const std::string advice = r.at("advice").get<std::string>();
            if (advice == "SplitSuggested") human += " (over 5 pomodoros: consider splitting it)";
            if (advice == "CombineSuggested") human += " (under 1 pomodoro: consider combining it with another story)";
            emit(ack.payload, human);
        } else if (*track) {
            json a{{"story", story_id}, {"type", ptype}, {"units", half ? 1 : 2}};
            if (pomodoro_seq > 0) a["pomodoro_seq"] = pomodoro_seq;
            const auto ack = run_command("track", a);
            const auto& r = ack.payload.at("result");
            const auto& mark = r.at("mark");
            emit(ack.payload, story_id + ": marked " + render_pomodoros(Effort{mark.at("effort").get<std::int64_t>()}) +
                                  " (" + mark.at("ptype").get<std::string>() + "), actual " +
                                  r.at("actual_pomodoros").get<std::string>());
        } else if (app.got_subcommand("rotate")) {
            const auto ack = run_command("rotate", json::object());
            emit(ack.payload, "pairs: " + pairing_text(ack.payload.at("result").at("pairing")));
        } else if (*status) {
            const WireMessage snap = conn.hello(std::nullopt, !s.member.empty());
            if (!watch) {
                const auto ack = conn.command("status");
                emit(ack.payload, status_text(ack.payload.at("result")));
            } else {
                if (s.json) env.out << encode(snap) << "\n";
                const auto start = std::chrono::steady_clock::now();
                const auto stop = start + std::chrono::milliseconds(static_cast<std::int64_t>(watch_for * 1000));
                auto until = start;
                while (watch_for <= 0 || until < stop) {
                    until += std::chrono::milliseconds(250);
                    if (watch_for > 0) until = std::min(until, stop);
                    while (auto msg = conn.next(until)) {
                        if (s.json) env.out << encode(*msg) << "\n";
                        if (conn.mirror().stale()) conn.hello(std::nullopt, !s.member.empty());
                    }
                    if (!s.json) env.out << "\r" << countdown_line(conn.mirror(), local_now()) << "    " << std::flush;
                }
                if (!s.json) env.out << "\n";
            }
        } else if (*report_day) {
            const ArchiveContents a = load_archive_file(s);
            std::string day = date;
            if (day.empty()) {
                if (a.events.empty()) throw Error(Errc::InvalidArgument, "the archive has no events");
                day = civil_date(a.events.back().at, a.utc_offset());
            }
            const auto it = a.days.find(day);
            const DailyRecord r = it != a.days.end()
                                      ? it->second
                                      : summarize_day(a.events, a.header ? a.header->session_id : "", day, a.utc_offset());
            emit(json(r), render_day(r));
        } else if (*report_iteration) {
            const ArchiveContents a = load_archive_file(s);
            env.out << export_iteration_csv(a, iteration);
        } else if (*report_metrics) {
            const ArchiveContents a = load_archive_file(s);
            DateRange range;
            if (!from.empty()) range.from = from;
            if (!to.empty()) range.to = to;
            const Metrics m = process(a, range);
            emit(json(m), render_metrics(m));
        } else if (*journal_add || *journal_show) {
            json a{{"action", *journal_add ? "add" : "show"}};
            if (!date.empty()) a["date"] = date;
            if (*journal_add) a["lines"] = lines;
            const auto ack = run_command("journal", a);
            emit(ack.payload, ack.payload.at("result").at("text").get<std::string>());
        } else if (*story_add) {
            json a{{"id", story_id}, {"tracked", !untracked}};
            if (!title.empty()) a["title"] = title;
            if (!iteration.empty()) a["iteration"] = iteration;
            const auto ack = run_command("story", a);
            const auto& st = ack.payload.at("result").at("story");
            emit(ack.payload, "story " + story_id + " \"" + st.at("title").get<std::string>() + "\" in " +
                                  st.at("iteration_id").get<std::string>());
        } else if (*story_status) {
            const auto ack = run_command("story_status", json{{"id", story_id}, {"status", new_status}});
            emit(ack.payload, story_id + ": " + new_status);
        } else if (app.got_subcommand("leave")) {
            const auto ack = run_command("leave", json::object());
            emit(ack.payload, "left " + s.session);
        }
    } catch (const UsageError& e) {
        env.err << "pomo: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConnectionError& e) {
        env.err << "pomo: " << e.what() << "\n";
        return kExitConnection;
    } catch (const DomainFailure& e) {
        if (s.json) env.out << e.payload.dump() << "\n";
        env.err << e.what() << "\n";
        return kExitDomain;
    } catch (const Error& e) {
        env.err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        env.err << "pomo: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitOk;
}

} // namespace pomo
