// Misbehaving stand-in for the execution worker. The first argument picks
// the failure mode; anything else serves the real protocol.

#include "dynact/executor.hpp"

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

int main(int argc, char** argv)
{
    std::string mode = argc > 1 ? argv[1] : "";
    if (mode == "silent") {
        std::string line;
        while (std::getline(std::cin, line))
            ;
        return 0;
    }
    if (mode == "exit-at-start")
        return 7;
    if (mode == "wrong-version") {
        std::string line;
        while (std::getline(std::cin, line)) {
            auto j = dynact::Json::parse(line);
            std::cout << dynact::Json{{"id", j["id"]}, {"ok", true}, {"v", 99}}.dump() << "\n" << std::flush;
        }
        return 0;
    }
    if (mode == "garbage-after-ping") {
        std::string line;
        while (std::getline(std::cin, line)) {
            auto j = dynact::Json::parse(line);
            if (j["op"] == "ping" || j["op"] == "load" || j["op"] == "reset")
                std::cout << dynact::Json{{"id", j["id"]}, {"ok", true}, {"v", 1}}.dump() << "\n" << std::flush;
            else
                std::cout << "this is not json\n" << std::flush;
        }
        return 0;
    }
    return dynact::serve_worker(std::cin, std::cout);
}
