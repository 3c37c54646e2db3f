// pomod: the session server.

#include "pomo/hub.hpp"
#include "pomo/net.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"pomod: shared pomodoro server"};
    pomo::ServerOptions net;
    net.stop_on_signals = true;
    std::string data_dir;
    double work = 25, short_break = 5, long_break = 15;
    int every = 4;
    int utc_offset = 0;
    app.add_option("--listen", net.listen, "NDJSON listener host:port")->envname("POMOD_LISTEN")->capture_default_str();
    app.add_option("--http-listen", net.http_listen, "status and WebSocket listener host:port, empty to disable")
        ->envname("POMOD_HTTP_LISTEN")
        ->capture_default_str();
    app.add_option("--data-dir", data_dir, "archive directory; in memory when empty")->envname("POMOD_DATA_DIR");
    app.add_option("--work", work, "default work minutes")->envname("POMOD_WORK")->capture_default_str();
    app.add_option("--short-break", short_break, "default short break minutes")
        ->envname("POMOD_SHORT_BREAK")
        ->capture_default_str();
    app.add_option("--long-break", long_break, "default long break minutes")
        ->envname("POMOD_LONG_BREAK")
        ->capture_default_str();
    app.add_option("--long-every", every, "default pomodoros per long break")
        ->envname("POMOD_LONG_EVERY")
        ->capture_default_str();
    app.add_option("--utc-offset", utc_offset, "civil day offset from UTC in minutes")
        ->envname("POMOD_UTC_OFFSET")
        ->capture_default_str();
    app.add_option("--max-queue", net.max_queue, "queued messages per connection before it is dropped")
        ->envname("POMOD_MAX_QUEUE")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    using minutes = std::chrono::duration<double, std::ratio<60>>;
    pomo::HubConfig config;
    config.data_dir = data_dir;
    config.session_defaults.work = std::chrono::duration_cast<pomo::Duration>(minutes(work));
    config.session_defaults.short_break = std::chrono::duration_cast<pomo::Duration>(minutes(short_break));
    config.session_defaults.long_break = std::chrono::duration_cast<pomo::Duration>(minutes(long_break));
    config.session_defaults.long_break_every = every;
    config.utc_offset_minutes = utc_offset;

    try {
        pomo::Hub hub(config, std::make_shared<pomo::SteadyServerClock>());
        for (const auto& e : hub.load_errors()) std::cerr << "pomod: skipped " << e << "\n";
        pomo::Server server(hub, net);
        server.start();
        std::cerr << "pomod: " << hub.sessions().size() << " sessions, listening on " << net.listen << " (port "
                  << server.port() << ")";
        if (!net.http_listen.empty()) std::cerr << ", http on port " << server.http_port();
        std::cerr << std::endl;
        server.wait();
    } catch (const std::exception& e) {
        std::cerr << "pomod: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
