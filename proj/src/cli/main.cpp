#include "commands.hpp"

#include "rotortrap/errors.hpp"

#include <exception>
#include <iostream>

int main(int argc, char** argv) {
    try {
        return rotortrap::cli::run(argc, argv);
    } catch (const rotortrap::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
