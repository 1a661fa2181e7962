#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "lsi/runner.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const lsi::RunConfig config = lsi::parse_config(args);
        return lsi::run(config);
    } catch (const lsi::UsageError& e) {
        if (std::string(e.what()) == "help") return 0;
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
