#include "pomo/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    pomo::CliEnv env{std::cout, std::cerr, pomo::process_env};
    return pomo::run_cli(args, env);
}
