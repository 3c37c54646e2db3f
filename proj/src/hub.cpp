#include "pomo/hub.hpp"

#include "pomo/codec.hpp"
#include "pomo/error.hpp"
#include "pomo/presence.hpp"
#include "pomo/reports.hpp"

#include <algorithm>
#include <iostream>
#include <random>

namespace pomo {

namespace {

std::string dedupe_key(const std::string& member, const std::string& id) { return member + '\x1f' + id; }

json without_time(json doc)
{
    doc.erase("server_time");
    return doc;
}

std::string arg_string(const json& args, const char* key, std::string fallback = {})
{
    const auto it = args.find(key);
    if (it == args.end() || it->is_null()) return fallback;
    if (!it->is_string()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::string required_string(const json& args, const char* key)
{
    std::string v = arg_string(args, key);
    if (v.empty()) throw Error(Errc::InvalidArgument, std::string("missing '") + key + "'");
    return v;
}

std::int64_t arg_int(const json& args, const char* key, std::int64_t fallback)
{
    const auto it = args.find(key);
    if (it == args.end() || it->is_null()) return fallback;
    if (!it->is_number_integer()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must be an integer");
    return it->get<std::int64_t>();
}

bool arg_bool(const json& args, const char* key, bool fallback)
{
    const auto it = args.find(key);
    if (it == args.end() || it->is_null()) return fallback;
    if (!it->is_boolean()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must be a boolean");
    return it->get<bool>();
}

InterruptionKind arg_kind(const json& args)
{
    const std::string k = arg_string(args, "kind", "external");
    if (k == "internal" || k == "Internal") return InterruptionKind::Internal;
    if (k == "external" || k == "External") return InterruptionKind::External;
    throw Error(Errc::InvalidArgument, "kind must be internal or external, got '" + k + "'");
}

} // namespace

SteadyServerClock::SteadyServerClock()
    : unix_ms_at_start_(std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count())
    , steady_start_(std::chrono::steady_clock::now())
{}

Timestamp SteadyServerClock::now() const
{
    const auto elapsed = std::chrono::steady_clock::now() - steady_start_;
    return at_ms(unix_ms_at_start_ + std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count());
}

bool valid_session_id(std::string_view id)
{
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
               c == '-';
    });
}

std::string random_id(std::size_t bytes)
{
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes * 2);
    for (std::size_t i = 0; i < bytes; ++i) {
        const auto b = static_cast<unsigned>(rng() & 0xff);
        out += kHex[b >> 4];
        out += kHex[b & 0xf];
    }
    return out;
}

Hub::Hub(HubConfig config, std::shared_ptr<Clock> clock)
    : config_(std::move(config))
    , clock_(std::move(clock))
{
    validate(config_.session_defaults);
    if (!config_.data_dir.empty()) {
        std::filesystem::create_directories(config_.data_dir);
        load_archives();
    }
}

Hub::~Hub() = default;

void Hub::load_archives()
{
    for (const auto& entry : std::filesystem::directory_iterator(config_.data_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
        const auto path = entry.path();
        try {
            Archive archive = Archive::open(path);
            const ArchiveContents contents = archive.load();
            if (!contents.header) throw Error(Errc::CorruptArchive, "no header line");
            const std::string id = contents.header->session_id;
            if (id != path.stem().string() || !valid_session_id(id)) {
                throw Error(Errc::CorruptArchive, "header names session '" + id + "'");
            }
            SessionState state = replay_archive(contents);
            auto host = std::make_shared<Host>(std::move(state), contents.header->token, archive);
            host->utc_offset = contents.header->utc_offset_minutes;
            const auto& log = host->state.event_log;
            host->current_day = civil_date(log.empty() ? clock_->now() : log.back().at, host->utc_offset);
            hosts_.emplace(id, std::move(host));
        } catch (const std::exception& e) {
            load_errors_.push_back(path.string() + ": " + e.what());
        }
    }
}

std::shared_ptr<Hub::Host> Hub::find_host(std::string_view session_id) const
{
    std::lock_guard lock(mu_);
    const auto it = hosts_.find(session_id);
    return it == hosts_.end() ? nullptr : it->second;
}

void Hub::attach(const std::shared_ptr<Peer>& peer)
{
    std::lock_guard lock(mu_);
    conns_[peer.get()] = Conn{peer, {}, {}};
}

void Hub::detach(const std::shared_ptr<Peer>& peer)
{
    std::shared_ptr<Host> host;
    {
        std::lock_guard lock(mu_);
        const auto it = conns_.find(peer.get());
        if (it == conns_.end()) return;
        if (!it->second.session_id.empty()) {
            const auto h = hosts_.find(it->second.session_id);
            if (h != hosts_.end()) host = h->second;
        }
        conns_.erase(it);
    }
    if (!host) return;
    Drops drops;
    {
        std::lock_guard lock(host->mu);
        unsubscribe(*host, peer.get());
        publish_presence(*host, host_now(*host), false, drops);
    }
    finish(drops);
}

void Hub::reply(const std::shared_ptr<Peer>& peer, const WireMessage& msg)
{
    if (!peer->send(encode(msg))) drop(peer);
}

void Hub::drop(const std::shared_ptr<Peer>& peer)
{
    std::shared_ptr<Host> host;
    {
        std::lock_guard lock(mu_);
        const auto it = conns_.find(peer.get());
        if (it != conns_.end()) {
            const auto h = hosts_.find(it->second.session_id);
            if (h != hosts_.end()) host = h->second;
            it->second.session_id.clear();
        }
    }
    if (host) {
        std::lock_guard lock(host->mu);
        unsubscribe(*host, peer.get());
    }
    peer->close();
}

void Hub::finish(const Drops& drops)
{
    for (const auto& p : drops) {
        {
            std::lock_guard lock(mu_);
            const auto it = conns_.find(p.get());
            if (it != conns_.end()) it->second.session_id.clear();
        }
        p->close();
    }
}

void Hub::receive(const std::shared_ptr<Peer>& peer, std::string_view line)
{
    WireMessage msg;
    try {
        msg = decode(line);
    } catch (const Error& e) {
        reply(peer, make_error(e.code(), e.what(), std::nullopt, 0, now()));
        return;
    }
    if (msg.v != kProtocolVersion) {
        reply(peer, make_error(Errc::UnsupportedVersion,
                               "protocol version " + std::to_string(msg.v) + " is not supported; this server speaks " +
                                   std::to_string(kProtocolVersion),
                               std::nullopt, 0, now()));
        peer->close();
        detach(peer);
        return;
    }
    if (msg.type == "hello") {
        handle_hello(peer, msg);
    } else if (msg.type == "command") {
        handle_command(peer, msg);
    } else {
        reply(peer, make_error(Errc::MalformedMessage, "clients may only send hello or command", std::nullopt, 0,
                               now()));
    }
}

void Hub::handle_hello(const std::shared_ptr<Peer>& peer, const WireMessage& msg)
{
    HelloRequest hello;
    std::shared_ptr<Host> host;
    std::optional<std::string> new_token;
    try {
        hello = parse_hello(msg.payload);
        if (hello.create) {
            if (!valid_session_id(hello.session_id)) {
                throw Error(Errc::InvalidArgument, "session id may only use letters, digits, '.', '_' and '-'");
            }
            if (!hello.member) throw Error(Errc::InvalidArgument, "creating a session needs a member");
            validate(*hello.create);
            const Timestamp t = now();
            std::lock_guard lock(mu_);
            const auto path = config_.data_dir / (hello.session_id + ".jsonl");
            if (hosts_.contains(hello.session_id) || (!config_.data_dir.empty() && std::filesystem::exists(path))) {
                throw Error(Errc::SessionExists, "session " + hello.session_id + " already exists");
            }
            SessionState state = create_session(hello.session_id, *hello.create, *hello.member, t, config_.estimation);
            std::string token = hello.token.empty() ? random_id() : hello.token;
            if (hello.token.empty()) new_token = token;
            Archive archive = config_.data_dir.empty() ? Archive::in_memory() : Archive::open(path);
            archive.append_header(ArchiveHeader{hello.session_id, token, config_.utc_offset_minutes});
            for (const auto& e : state.event_log) archive.append_event(e);
            host = std::make_shared<Host>(std::move(state), std::move(token), std::move(archive));
            host->utc_offset = config_.utc_offset_minutes;
            host->current_day = civil_date(t, host->utc_offset);
            hosts_.emplace(hello.session_id, host);
        } else {
            host = find_host(hello.session_id);
            if (!host) throw Error(Errc::UnknownSession, "no session " + hello.session_id);
        }
    } catch (const Error& e) {
        reply(peer, make_error(e.code(), e.what(), std::nullopt, 0, now()));
        return;
    }

    bool authorized = true;
    {
        std::lock_guard lock(host->mu);
        authorized = new_token || hello.token == host->token;
    }
    if (!authorized) {
        peer->send(encode(make_error(Errc::Unauthorized, "wrong session token", std::nullopt, 0, now())));
        peer->close();
        return;
    }

    const std::string member_id = hello.member ? hello.member->id : std::string{};
    std::shared_ptr<Host> previous;
    {
        std::lock_guard lock(mu_);
        auto& conn = conns_[peer.get()];
        conn.peer = peer;
        if (!conn.session_id.empty() && conn.session_id != hello.session_id) {
            const auto it = hosts_.find(conn.session_id);
            if (it != hosts_.end()) previous = it->second;
        }
        conn.session_id = hello.session_id;
        conn.member_id = member_id;
    }

    Drops drops;
    if (previous) {
        std::lock_guard lock(previous->mu);
        unsubscribe(*previous, peer.get());
        publish_presence(*previous, host_now(*previous), false, drops);
    }
    {
        std::lock_guard lock(host->mu);
        const Timestamp t = host_now(*host);
        catch_up(*host, t, drops);
        unsubscribe(*host, peer.get());
        host->subscribers.push_back(Subscriber{peer, member_id});
        WireMessage snap = make_snapshot(host->state, status_document(host->state, online(*host), t), t);
        if (new_token) snap.payload["token"] = *new_token;
        if (!peer->send(encode(snap))) {
            unsubscribe(*host, peer.get());
            drops.push_back(peer);
        }
        publish_presence(*host, t, false, drops);
    }
    finish(drops);
}

void Hub::handle_command(const std::shared_ptr<Peer>& peer, const WireMessage& msg)
{
    std::string command_id;
    std::string name;
    json args = json::object();
    const auto id_it = msg.payload.find("id");
    if (id_it != msg.payload.end() && id_it->is_string()) command_id = id_it->get<std::string>();
    const auto name_it = msg.payload.find("name");
    if (name_it != msg.payload.end() && name_it->is_string()) name = name_it->get<std::string>();
    if (const auto a = msg.payload.find("args"); a != msg.payload.end()) args = *a;
    if (command_id.empty() || name.empty() || !args.is_object()) {
        std::optional<std::string> cid;
        if (!command_id.empty()) cid = command_id;
        reply(peer, make_error(Errc::MalformedMessage, "command needs string 'id', string 'name' and object 'args'",
                               cid, 0, now()));
        return;
    }

    std::shared_ptr<Host> host;
    std::string member_id;
    {
        std::lock_guard lock(mu_);
        const auto it = conns_.find(peer.get());
        if (it != conns_.end() && !it->second.session_id.empty()) {
            const auto h = hosts_.find(it->second.session_id);
            if (h != hosts_.end()) host = h->second;
            member_id = it->second.member_id;
        }
    }
    if (!host) {
        reply(peer, make_error(Errc::NotSubscribed, "send hello before commands", command_id, 0, now()));
        return;
    }

    Drops drops;
    {
        std::lock_guard lock(host->mu);
        const bool subscribed = std::any_of(host->subscribers.begin(), host->subscribers.end(),
                                            [&](const Subscriber& s) { return s.peer == peer; });
        if (!subscribed) {
            if (!peer->send(encode(make_error(Errc::NotSubscribed, "send hello before commands", command_id,
                                              host->state.last_seq(), host_now(*host))))) {
                drops.push_back(peer);
            }
        } else {
            const std::string key = dedupe_key(member_id, command_id);
            if (const auto cached = host->responses.find(key); cached != host->responses.end()) {
                if (!peer->send(cached->second)) {
                    unsubscribe(*host, peer.get());
                    drops.push_back(peer);
                }
            } else {
                const Timestamp t = host_now(*host);
                catch_up(*host, t, drops);
                const std::uint64_t before = host->state.last_seq();
                std::string response;
                try {
                    const json result = run_command(*host, member_id, name, args, t);
                    publish(*host, before, t, drops);
                    response = encode(make_ack(command_id, name, result, host->state.last_seq(), t));
                } catch (const Error& e) {
                    publish(*host, before, t, drops);
                    response = encode(make_error(e.code(), e.what(), command_id, host->state.last_seq(), t));
                } catch (const json::exception& e) {
                    publish(*host, before, t, drops);
                    response = encode(make_error(Errc::InvalidArgument, std::string("bad arguments: ") + e.what(),
                                                 command_id, host->state.last_seq(), t));
                }
                remember(*host, key, response);
                const bool still = std::any_of(host->subscribers.begin(), host->subscribers.end(),
                                               [&](const Subscriber& s) { return s.peer == peer; });
                if (still && !peer->send(response)) {
                    unsubscribe(*host, peer.get());
                    drops.push_back(peer);
                }
                publish_presence(*host, t, false, drops);
            }
        }
    }
    finish(drops);
}

void Hub::remember(Host& host, const std::string& key, const std::string& line)
{
    host.responses[key] = line;
    host.response_order.push_back(key);
    while (host.response_order.size() > config_.dedupe_window) {
        host.responses.erase(host.response_order.front());
        host.response_order.pop_front();
    }
}

json Hub::run_command(Host& host, const std::string& member_id, const std::string& name, const json& args,
                      Timestamp now)
{
    SessionState& s = host.state;
    auto me = [&]() -> const std::string& {
        if (member_id.empty()) throw Error(Errc::InvalidArgument, "say hello with a member id first");
        return member_id;
    };

    if (name == "join") {
        Member m;
        if (args.contains("member")) {
            m = args.at("member").get<Member>();
        } else {
            m.id = me();
            m.display_name = arg_string(args, "name", m.id);
            m.role = parse_role(arg_string(args, "role", "Developer"));
        }
        join(s, m, now);
        return json{{"member", m}, {"observer", s.observers.contains(m.id)}};
    }
    if (name == "leave") {
        const std::string who = arg_string(args, "member", me());
        leave(s, who, now);
        return json{{"member_id", who}};
    }
    if (name == "ready") {
        declare_ready(s, me(), now);
        return json{{"ready", s.ready}};
    }
    if (name == "start") {
        start_shared(s, me(), now);
        return json{{"phase", phase_name(s.clock.phase)}, {"phase_deadline", to_ms(s.clock.phase_deadline)}};
    }
    if (name == "void" || name == "interrupt") {
        Interruption i;
        i.kind = arg_kind(args);
        i.deflected = name == "interrupt" && arg_bool(args, "deflected", true);
        i.at = now;
        i.note = arg_string(args, "note");
        i.initiator = me();
        if (name == "void") {
            void_shared(s, i);
        } else {
            interrupt_shared(s, i);
        }
        return json{{"phase", phase_name(s.clock.phase)}, {"voided", !i.deflected}};
    }
    if (name == "track") {
        const std::string story = required_string(args, "story");
        const std::string ptype = required_string(args, "type");
        const Effort effort{arg_int(args, "units", 2)};
        std::optional<std::uint64_t> pomodoro;
        if (args.contains("pomodoro_seq") && !args.at("pomodoro_seq").is_null()) {
            pomodoro = args.at("pomodoro_seq").get<std::uint64_t>();
        }
        track(s, me(), story, ptype, effort, pomodoro, now);
        const TrackMark& mark = s.ledger.marks().back();
        return json{{"mark", mark}, {"actual_pomodoros", render_pomodoros(s.ledger.actual(story))}};
    }
    if (name == "estimate") {
        const std::string story = required_string(args, "story");
        if (!args.contains("units")) throw Error(Errc::InvalidArgument, "missing 'units'");
        const Effort units{arg_int(args, "units", 0)};
        const auto outcome =
            estimate(s, story, units, arg_string(args, "title"), arg_string(args, "iteration"), now);
        return json{{"story", story}, {"estimate_pomodoros", render_pomodoros(units)},
                    {"advice", to_string(outcome.advice)}};
    }
    if (name == "story") {
        const std::string id = required_string(args, "id");
        Story story;
        if (const Story* existing = s.ledger.find_story(id)) story = *existing;
        story.id = id;
        story.title = arg_string(args, "title", story.title.empty() ? id : story.title);
        story.iteration_id = arg_string(args, "iteration", story.iteration_id.empty() ? "backlog" : story.iteration_id);
        story.tracked = arg_bool(args, "tracked", story.tracked);
        story.legacy_points = arg_string(args, "legacy_points", story.legacy_points);
        if (!story.tracked) story.estimate = Effort{0};
        upsert_story(s, story, now);
        return json{{"story", *s.ledger.find_story(id)}};
    }
    if (name == "story_status") {
        const std::string id = required_string(args, "id");
        const StoryStatus status = parse_story_status(required_string(args, "status"));
        set_story_status(s, id, status, now);
        return json{{"story", *s.ledger.find_story(id)}};
    }
    if (name == "rotate") {
        rotate_pairs(s, now);
        return json{{"round", s.rotation_round}, {"pairing", s.pairing}};
    }
    if (name == "status") {
        return status_document(s, online(host), now);
    }
    if (name == "journal") {
        const std::string action = arg_string(args, "action", "show");
        const std::string date = arg_string(args, "date", civil_date(now, host.utc_offset));
        day_start(date, host.utc_offset); // validates the format
        const std::string who = me();
        const ArchiveContents contents = host.archive.load();
        const auto existing = contents.journals.find({date, who});
        if (action == "show") {
            if (existing == contents.journals.end()) {
                throw Error(Errc::InvalidArgument, "no journal for " + who + " on " + date);
            }
            return json{{"entry", existing->second}, {"text", render_journal(existing->second)}};
        }
        if (action != "add") throw Error(Errc::InvalidArgument, "journal action must be add or show");
        std::vector<std::string> lines;
        if (existing != contents.journals.end()) lines = existing->second.lines;
        if (const auto l = args.find("lines"); l != args.end()) {
            for (const auto& line : l->get<std::vector<std::string>>()) lines.push_back(line);
        }
        const JournalEntry entry = generate_journal(host.archive, who, date, std::move(lines));
        json result{{"entry", entry}, {"text", render_journal(entry)}};
        if (!config_.data_dir.empty()) {
            result["file"] = write_journal_file(config_.data_dir / "journal" / s.session_id, entry).string();
        }
        return result;
    }
    throw Error(Errc::UnknownCommand, "unknown command '" + name + "'");
}

Timestamp Hub::host_now(const Host& host) const
{
    const Timestamp t = clock_->now();
    const auto& log = host.state.event_log;
    return log.empty() ? t : std::max(t, log.back().at);
}

void Hub::catch_up(Host& host, Timestamp now, Drops& drops)
{
    const std::uint64_t before = host.state.last_seq();
    const std::string today = civil_date(now, host.utc_offset);
    if (!host.current_day.empty() && today != host.current_day) {
        advance_session(host.state, now);
        // Archive every civil day that has events, up to but excluding today.
        std::set<std::string> days{host.current_day};
        for (const auto& e : host.state.event_log) {
            const std::string d = civil_date(e.at, host.utc_offset);
            if (d > host.current_day && d < today) days.insert(d);
        }
        publish(host, before, now, drops);
        for (const auto& d : days) {
            try {
                record_day(host.archive, host.state.event_log, d, now);
            } catch (const std::exception& e) {
                std::cerr << "pomo: recording " << d << " for " << host.state.session_id << " failed: " << e.what()
                          << "\n";
            }
        }
        const std::uint64_t mid = host.state.last_seq();
        roll_day(host.state, now);
        host.current_day = today;
        publish(host, mid, now, drops);
        return;
    }
    host.current_day = today;
    advance_session(host.state, now);
    publish(host, before, now, drops);
}

void Hub::publish(Host& host, std::uint64_t from_seq, Timestamp now, Drops& drops)
{
    for (const auto& entry : host.state.event_log) {
        if (entry.seq <= from_seq) continue;
        try {
            host.archive.append_event(entry);
        } catch (const std::exception& e) {
            std::cerr << "pomo: archive write failed for " << host.state.session_id << ": " << e.what() << "\n";
        }
        deliver(host, encode(make_event(entry, now)), drops);
    }
}

void Hub::publish_presence(Host& host, Timestamp now, bool force, Drops& drops)
{
    json doc = status_document(host.state, online(host), now);
    json key = without_time(doc);
    if (!force && host.last_presence && *host.last_presence == key) return;
    host.last_presence = std::move(key);
    deliver(host, encode(make_presence(doc, host.state.last_seq(), now)), drops);
}

void Hub::deliver(Host& host, const std::string& line, Drops& drops)
{
    for (auto it = host.subscribers.begin(); it != host.subscribers.end();) {
        if (it->peer->send(line)) {
            ++it;
            continue;
        }
        drops.push_back(it->peer);
        it = host.subscribers.erase(it);
    }
}

void Hub::unsubscribe(Host& host, const Peer* peer)
{
    std::erase_if(host.subscribers, [&](const Subscriber& s) { return s.peer.get() == peer; });
}

std::set<std::string> Hub::online(const Host& host) const
{
    std::set<std::string> out;
    for (const auto& s : host.subscribers) {
        if (!s.member_id.empty()) out.insert(s.member_id);
    }
    return out;
}

void Hub::tick()
{
    std::vector<std::shared_ptr<Host>> hosts;
    {
        std::lock_guard lock(mu_);
        for (const auto& [_, h] : hosts_) hosts.push_back(h);
    }
    for (const auto& host : hosts) {
        Drops drops;
        {
            std::lock_guard lock(host->mu);
            const Timestamp t = host_now(*host);
            catch_up(*host, t, drops);
            publish_presence(*host, t, false, drops);
        }
        finish(drops);
    }
}

std::optional<json> Hub::status(std::string_view session_id)
{
    const auto host = find_host(session_id);
    if (!host) return std::nullopt;
    Drops drops;
    json doc;
    {
        std::lock_guard lock(host->mu);
        const Timestamp t = host_now(*host);
        catch_up(*host, t, drops);
        doc = status_document(host->state, online(*host), t);
    }
    finish(drops);
    return doc;
}

std::optional<SessionState> Hub::snapshot(std::string_view session_id)
{
    const auto host = find_host(session_id);
    if (!host) return std::nullopt;
    std::lock_guard lock(host->mu);
    return host->state;
}

std::vector<std::string> Hub::sessions() const
{
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : hosts_) out.push_back(id);
    return out;
}

std::optional<Archive> Hub::archive(std::string_view session_id) const
{
    const auto host = find_host(session_id);
    if (!host) return std::nullopt;
    return host->archive;
}

std::size_t Hub::subscriber_count(std::string_view session_id) const
{
    const auto host = find_host(session_id);
    if (!host) return 0;
    std::lock_guard lock(host->mu);
    return host->subscribers.size();
}

} // namespace pomo
